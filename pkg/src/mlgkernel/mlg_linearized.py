"""Linearized, randomized-low-rank MLG pipeline.

Each level turns the subgraph kernel into explicit per-vertex features:

1. every vertex's level-``l`` neighborhood subgraph gets an S-matrix built
   from the previous level's feature rows,
2. a uniform sample of vertices (without replacement, across all graphs)
   gives a small Gram matrix of subgraph kernel values,
3. the top ``rank`` eigenpairs of that Gram define a basis, and each vertex
   is projected onto it from its kernel values against the sample.

After the last level, each whole graph gets an S-matrix from its vertices'
feature rows and the dataset Gram is the matrix of pairwise overlaps.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .errors import BaseKernelError, InvalidInputError
from .flg import PSD_RTOL, s_matrix_explicit
from .gram import GramMatrix
from .graph import build_neighborhood_stack
from .linalg import DEFAULT_TAU, batch_logdet, bhattacharyya_ratio_many, sym_eig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineParams:
    levels: int = 2
    r0: int = 1
    eta: float = 0.1
    gamma: float = 0.1
    tau: float = DEFAULT_TAU
    n_samples: int = 100
    rank: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.levels < 1:
            raise InvalidInputError(f"levels must be >= 1, got {self.levels}")
        if self.r0 < 1:
            raise InvalidInputError(f"r0 must be >= 1, got {self.r0}")
        if not (self.eta > 0 and self.gamma > 0):
            raise InvalidInputError("eta and gamma must be positive")
        if not self.n_samples >= self.rank >= 1:
            raise InvalidInputError(
                f"need n_samples >= rank >= 1, got {self.n_samples}, {self.rank}")


@dataclass
class LinearizedLevel:
    """One linearized level.

    ``features`` has a row for every vertex of every graph (graphs
    concatenated in order); ``sample`` holds global vertex ids.
    """

    level: int
    sample: np.ndarray
    sample_gram: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    features: np.ndarray
    spectrum: np.ndarray

    @property
    def rank(self):
        return len(self.eigenvalues)


def sample_vertices(total, n_samples, rng):
    """``n_samples`` distinct ids from ``range(total)``, uniformly without
    replacement. The draw is a prefix of a random permutation, so for a fixed
    generator state larger samples contain smaller ones."""
    if isinstance(total, (list, tuple)):
        total = sum(g.n for g in total)
    if n_samples > total:
        raise InvalidInputError(f"cannot sample {n_samples} of {total} vertices")
    if n_samples < 1:
        raise InvalidInputError("need at least one sample")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return rng.permutation(total)[:n_samples]


def _map_ordered(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _s_matrices(subgraphs, vertex_lists, features, eta, gamma):
    """S-matrix per subgraph, feature rows taken from global ``features``.

    Subgraph objects repeated in ``subgraphs`` are computed once.
    """
    d = features.shape[1]
    out = np.empty((len(subgraphs), d, d))
    done = {}
    for k, (sub, ids) in enumerate(zip(subgraphs, vertex_lists)):
        key = id(sub)
        if key not in done:
            done[key] = s_matrix_explicit(sub, features[ids].T, eta, gamma)
        out[k] = done[key]
    return out


def _overlap_columns(S_all, logdets_all, cols, threads):
    """Matrix of overlaps ``[i, j] = k(S_all[i], S_all[cols[j]])``."""
    def column(j):
        return bhattacharyya_ratio_many(S_all, logdets_all, S_all[j], logdets_all[j])
    return np.stack(_map_ordered(column, list(cols), threads), axis=1)


class _Layout:
    def __init__(self, graphs, params):
        self.graphs = list(graphs)
        self.offsets = np.concatenate([[0], np.cumsum([g.n for g in graphs])]).astype(int)
        self.total = int(self.offsets[-1])
        self.stacks = [build_neighborhood_stack(g, params.r0, params.levels) for g in graphs]

    def level_subgraphs(self, level):
        subs, ids = [], []
        for gi, st in enumerate(self.stacks):
            off = int(self.offsets[gi])
            for v in range(st.graph.n):
                sub = st.subgraph(level, v)
                subs.append(sub)
                ids.append([off + p for p in sub.parent_vertices])
        return subs, ids

    def graph_slices(self):
        return [slice(int(self.offsets[i]), int(self.offsets[i + 1]))
                for i in range(len(self.graphs))]


def base_features(graphs):
    """Level-0 feature rows of every vertex, graphs concatenated."""
    for g in graphs:
        if g.features is None:
            raise InvalidInputError(f"graph {g.graph_id!r} has no vertex features")
    dims = {g.features.shape[1] for g in graphs}
    if len(dims) > 1:
        raise InvalidInputError(f"graphs disagree on feature width: {sorted(dims)}")
    return np.concatenate([g.features for g in graphs], axis=0).astype(float)


def linearize_level(level, layout, prev_features, params, rng, threads=1):
    subs, ids = layout.level_subgraphs(level)
    S_all = _s_matrices(subs, ids, prev_features, params.eta, params.gamma)
    logdets = batch_logdet(S_all)

    sample = sample_vertices(layout.total, params.n_samples, rng)
    S_s, ld_s = S_all[sample], logdets[sample]
    K = np.stack([bhattacharyya_ratio_many(S_s, ld_s, S_s[j], ld_s[j])
                  for j in range(len(sample))], axis=1)
    K = 0.5 * (K + K.T)

    eig = sym_eig(K, params.tau)
    if eig.min_eigenvalue < -PSD_RTOL * max(eig.max_eigenvalue, 0.0) - 1e-14:
        raise BaseKernelError(
            f"level {level} sample Gram is not PSD (min eigenvalue {eig.min_eigenvalue:.3e})")
    rank = min(params.rank, eig.rank)
    if rank < params.rank:
        log.warning("level %d: sample Gram has rank %d < requested %d; shrinking",
                    level, eig.rank, params.rank)
    lam = eig.values[:rank]
    U = eig.vectors[:, :rank]

    C = _overlap_columns(S_all, logdets, sample, threads)
    features = C @ (U / np.sqrt(lam))
    return LinearizedLevel(
        level=level, sample=sample, sample_gram=K, eigenvalues=lam, eigenvectors=U,
        features=features, spectrum=np.linalg.eigvalsh(K)[::-1],
    )


def s_matrices_per_graph(layout, top_features, eta, gamma):
    """One S-matrix per whole graph from its vertices' feature rows."""
    ids = [list(range(s.start, s.stop)) for s in layout.graph_slices()]
    return _s_matrices(layout.graphs, ids, top_features, eta, gamma)


def linearized_pipeline(graphs, params=PipelineParams(), threads=1):
    """Run every level; return ``(levels, graph_s_matrices, layout)``."""
    if not graphs:
        raise InvalidInputError("need at least one graph")
    layout = _Layout(graphs, params)
    feats = base_features(graphs)
    seeds = np.random.SeedSequence(params.seed).spawn(params.levels)
    levels = []
    for lv in range(1, params.levels + 1):
        out = linearize_level(lv, layout, feats, params, np.random.default_rng(seeds[lv - 1]),
                              threads=threads)
        levels.append(out)
        feats = out.features
    S = s_matrices_per_graph(layout, feats, params.eta, params.gamma)
    return levels, S, layout


def gram_from_s_matrices(S, threads=1):
    logdets = batch_logdet(S)
    G = _overlap_columns(S, logdets, range(len(S)), threads)
    G = 0.5 * (G + G.T)
    return G


def gram_linearized(graphs, params=PipelineParams(), threads=1):
    """Dataset Gram matrix of the linearized MLG kernel."""
    levels, S, _ = linearized_pipeline(graphs, params, threads=threads)
    G = gram_from_s_matrices(S, threads=threads)
    meta = {"mode": "linearized", **asdict(params)}
    meta["ranks"] = [lv.rank for lv in levels]
    for lv in levels:
        meta[f"sample_level{lv.level}"] = sorted(int(x) for x in lv.sample)
    return GramMatrix(values=G, metadata=meta)
