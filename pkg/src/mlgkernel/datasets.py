"""Reader/writer for the multi-file plain-text graph-classification format
(``<name>_A.txt``, ``<name>_graph_indicator.txt``, ...), one-hot node
features and dataset summary statistics."""

from __future__ import annotations

import logging
import os
from collections import Counter
from dataclasses import dataclass, replace

import numpy as np

from .errors import DatasetFormatError, InvalidInputError
from .graph import Graph, hop_distances

log = logging.getLogger(__name__)


@dataclass
class Dataset:
    graphs: list
    labels: np.ndarray
    name: str = ""
    node_label_values: tuple = ()

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        if len(self.graphs) != len(self.labels):
            raise InvalidInputError(
                f"{len(self.graphs)} graphs but {len(self.labels)} labels")

    @property
    def label_alphabet(self):
        return len(self.node_label_values)

    def __len__(self):
        return len(self.graphs)

    def subset(self, indices):
        indices = list(indices)
        return replace(self, graphs=[self.graphs[i] for i in indices],
                       labels=self.labels[indices])


def _resolve(path, name):
    nested = os.path.join(path, name)
    if os.path.isfile(os.path.join(nested, f"{name}_A.txt")):
        return nested
    return path


def _read_rows(path, width=None, kind=int):
    """Parse a comma-separated file into rows of numbers.

    Blank lines are skipped; CR/LF and surrounding whitespace are tolerated.
    """
    rows = []
    fname = os.path.basename(path)
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            tokens = [t.strip() for t in line.split(",")]
            if width is not None and len(tokens) != width:
                raise DatasetFormatError(
                    f"{fname}:{lineno}: expected {width} values, got {len(tokens)}")
            try:
                rows.append([kind(t) for t in tokens])
            except ValueError:
                raise DatasetFormatError(
                    f"{fname}:{lineno}: non-{kind.__name__} token in {line!r}") from None
    return rows


def _required(folder, name, suffix):
    path = os.path.join(folder, f"{name}_{suffix}.txt")
    if not os.path.isfile(path):
        raise DatasetFormatError(f"missing required file {path}")
    return path


def load_tu_dataset(path, name):
    """Load ``name`` from ``path`` (or ``path/name``).

    Vertices are re-indexed from 0 within each graph, both directions of an
    edge collapse into one unit-weight undirected edge, and self-loops are
    dropped. Edge labels/attributes are ignored.
    """
    folder = _resolve(path, name)
    indicator = [r[0] for r in _read_rows(_required(folder, name, "graph_indicator"), 1)]
    glabels = [r[0] for r in _read_rows(_required(folder, name, "graph_labels"), 1)]
    edges_raw = _read_rows(_required(folder, name, "A"), 2)

    n_graphs = len(glabels)
    node_graph = np.asarray(indicator, dtype=int) - 1
    if len(node_graph) and (node_graph.min() < 0 or node_graph.max() >= n_graphs):
        bad = int(np.flatnonzero((node_graph < 0) | (node_graph >= n_graphs))[0])
        raise DatasetFormatError(
            f"{name}_graph_indicator.txt:{bad + 1}: graph id outside 1..{n_graphs}")
    if np.any(np.diff(node_graph) < 0):
        bad = int(np.flatnonzero(np.diff(node_graph) < 0)[0]) + 2
        raise DatasetFormatError(f"{name}_graph_indicator.txt:{bad}: graph ids not contiguous")
    counts = np.bincount(node_graph, minlength=n_graphs)
    starts = np.concatenate([[0], np.cumsum(counts)])

    node_labels = None
    lpath = os.path.join(folder, f"{name}_node_labels.txt")
    if os.path.isfile(lpath):
        node_labels = np.array([r[0] for r in _read_rows(lpath, 1)], dtype=int)
        if len(node_labels) != len(node_graph):
            raise DatasetFormatError(
                f"{name}_node_labels.txt has {len(node_labels)} lines, "
                f"expected {len(node_graph)}")
    attrs = None
    apath = os.path.join(folder, f"{name}_node_attributes.txt")
    if os.path.isfile(apath):
        attrs = np.array(_read_rows(apath, kind=float), dtype=float)
        if len(attrs) != len(node_graph):
            raise DatasetFormatError(
                f"{name}_node_attributes.txt has {len(attrs)} lines, expected {len(node_graph)}")

    per_graph = [set() for _ in range(n_graphs)]
    loops = 0
    for lineno, (u, v) in enumerate(edges_raw, 1):
        u, v = u - 1, v - 1
        total = len(node_graph)
        if not (0 <= u < total and 0 <= v < total):
            raise DatasetFormatError(f"{name}_A.txt:{lineno}: node id outside 1..{total}")
        g = node_graph[u]
        if node_graph[v] != g:
            raise DatasetFormatError(
                f"{name}_A.txt:{lineno}: edge ({u + 1}, {v + 1}) crosses graphs "
                f"{g + 1} and {node_graph[v] + 1}")
        if u == v:
            loops += 1
            continue
        a, b = u - starts[g], v - starts[g]
        per_graph[g].add((min(a, b), max(a, b)))
    if loops:
        log.warning("%s: dropped %d self-loops", name, loops)

    graphs = []
    for g in range(n_graphs):
        sl = slice(starts[g], starts[g + 1])
        graphs.append(Graph(
            n=int(counts[g]),
            edges=tuple((int(a), int(b), 1.0) for a, b in sorted(per_graph[g])),
            features=None if attrs is None else attrs[sl],
            graph_id=g + 1,
            node_labels=None if node_labels is None else node_labels[sl],
        ))
    values = () if node_labels is None else tuple(int(x) for x in np.unique(node_labels))
    return Dataset(graphs=graphs, labels=np.array(glabels, dtype=int), name=name,
                   node_label_values=values)


def write_tu_dataset(ds, path, name=None):
    """Write ``ds`` in the multi-file format (edges listed in both directions)."""
    name = name or ds.name
    os.makedirs(path, exist_ok=True)
    offset = 0
    with open(os.path.join(path, f"{name}_A.txt"), "w") as fa, \
            open(os.path.join(path, f"{name}_graph_indicator.txt"), "w") as fi:
        for gi, g in enumerate(ds.graphs, 1):
            for i, j, _ in g.edges:
                fa.write(f"{i + offset + 1}, {j + offset + 1}\n")
                fa.write(f"{j + offset + 1}, {i + offset + 1}\n")
            fi.write(f"{gi}\n" * g.n)
            offset += g.n
    with open(os.path.join(path, f"{name}_graph_labels.txt"), "w") as f:
        f.writelines(f"{int(y)}\n" for y in ds.labels)
    if all(g.node_labels is not None for g in ds.graphs):
        with open(os.path.join(path, f"{name}_node_labels.txt"), "w") as f:
            for g in ds.graphs:
                f.writelines(f"{int(x)}\n" for x in g.node_labels)


def one_hot_features(ds, alphabet=None):
    """Attach one-hot node-label rows as vertex features.

    The one-hot block indexes ``ds.node_label_values``; existing continuous
    attributes, if any, are appended after it.
    """
    values = tuple(alphabet) if alphabet is not None else ds.node_label_values
    if not values:
        raise InvalidInputError(f"dataset {ds.name!r} has no node labels")
    index = {v: k for k, v in enumerate(values)}
    graphs = []
    for g in ds.graphs:
        if g.node_labels is None:
            raise InvalidInputError(f"graph {g.graph_id} has no node labels")
        try:
            cols = [index[int(x)] for x in g.node_labels]
        except KeyError as exc:
            raise InvalidInputError(f"node label {exc.args[0]} not in alphabet") from None
        onehot = np.zeros((g.n, len(values)))
        onehot[np.arange(g.n), cols] = 1.0
        if g.features is not None:
            onehot = np.hstack([onehot, g.features])
        graphs.append(replace(g, features=onehot, _cache={}))
    return replace(ds, graphs=graphs, node_label_values=values)


def graph_diameter(g):
    """Largest finite hop distance (max over components if disconnected)."""
    best = 0
    for v in range(g.n):
        d = hop_distances(g, v)
        best = max(best, max(d.values()))
    return best


@dataclass(frozen=True)
class DatasetStats:
    size: int
    classes: dict
    label_alphabet: int
    mean_nodes: float
    mean_edges: float
    mean_edges_directed: float
    mean_diameter: float


def dataset_stats(ds):
    """Summary with edges counted both as undirected pairs and as directed
    adjacency entries (twice the former)."""
    nodes = np.array([g.n for g in ds.graphs], dtype=float)
    edges = np.array([g.num_edges for g in ds.graphs], dtype=float)
    diam = np.array([graph_diameter(g) for g in ds.graphs], dtype=float)
    classes = dict(sorted(Counter(int(y) for y in ds.labels).items()))
    mean = (lambda a: float(a.mean()) if len(a) else 0.0)
    return DatasetStats(
        size=len(ds.graphs),
        classes=classes,
        label_alphabet=ds.label_alphabet,
        mean_nodes=mean(nodes),
        mean_edges=mean(edges),
        mean_edges_directed=2 * mean(edges),
        mean_diameter=mean(diam),
    )
