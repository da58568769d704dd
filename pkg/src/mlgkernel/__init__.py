"""Multiscale Laplacian graph kernels."""

from .classifier import CvReport, SvmModel, cross_validate, svm_train
from .datasets import Dataset, dataset_stats, load_tu_dataset, one_hot_features
from .flg import flg_explicit, flg_kernelized
from .gram import GramMatrix, read_gram, write_gram
from .graph import Graph, build_neighborhood_stack, induced_subgraph, laplacian, permute
from .linalg import bhattacharyya_ratio, spd_logdet
from .mlg_exact import MlsParams, gram_exact, mlg_kernel, mls_kernel
from .mlg_linearized import PipelineParams, gram_linearized, linearized_pipeline

__version__ = "0.1.0"

__all__ = [
    "CvReport", "Dataset", "Graph", "GramMatrix", "MlsParams", "PipelineParams", "SvmModel",
    "bhattacharyya_ratio", "build_neighborhood_stack", "cross_validate", "dataset_stats",
    "flg_explicit", "flg_kernelized", "gram_exact", "gram_linearized", "induced_subgraph",
    "laplacian", "linearized_pipeline", "load_tu_dataset", "mlg_kernel", "mls_kernel",
    "one_hot_features", "permute", "read_gram", "spd_logdet", "svm_train", "write_gram",
]
