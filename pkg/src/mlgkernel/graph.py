"""Graphs, regularized Laplacians and nested vertex neighborhoods."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as la

from .errors import InvalidInputError


@dataclass(frozen=True, eq=False)
class Graph:
    """Weighted undirected graph with optional per-vertex payloads.

    ``edges`` holds ``(i, j, w)`` triples with ``i < j`` and ``w > 0``; they
    are normalized (swapped and sorted) on construction. ``features`` is an
    ``n x d`` array of vertex feature rows and ``node_labels`` an integer
    label per vertex. Induced subgraphs record the parent index of every
    local vertex in ``parent_vertices``.
    """

    n: int
    edges: tuple = ()
    features: np.ndarray | None = None
    graph_id: object = None
    node_labels: np.ndarray | None = None
    parent_vertices: tuple | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n = int(self.n)
        if n < 0:
            raise InvalidInputError(f"vertex count must be nonnegative, got {n}")
        object.__setattr__(self, "n", n)

        seen = set()
        norm = []
        for e in self.edges:
            if len(e) == 2:
                i, j, w = e[0], e[1], 1.0
            else:
                i, j, w = e
            i, j, w = int(i), int(j), float(w)
            if i == j:
                raise InvalidInputError(f"self-loop on vertex {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise InvalidInputError(f"edge ({i}, {j}) outside [0, {n})")
            if not w > 0:
                raise InvalidInputError(f"edge ({i}, {j}) has non-positive weight {w}")
            if i > j:
                i, j = j, i
            if (i, j) in seen:
                raise InvalidInputError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
            norm.append((i, j, w))
        object.__setattr__(self, "edges", tuple(sorted(norm)))

        if self.features is not None:
            feats = np.asarray(self.features, dtype=float)
            if feats.ndim == 1:
                feats = feats.reshape(n, -1) if n else feats.reshape(0, 0)
            if feats.ndim != 2 or feats.shape[0] != n:
                raise InvalidInputError(
                    f"features must have one row per vertex, got shape {feats.shape} for n={n}")
            feats.setflags(write=False)
            object.__setattr__(self, "features", feats)
        if self.node_labels is not None:
            labels = np.asarray(self.node_labels, dtype=int)
            if labels.shape != (n,):
                raise InvalidInputError(f"need {n} node labels, got shape {labels.shape}")
            labels.setflags(write=False)
            object.__setattr__(self, "node_labels", labels)
        if self.parent_vertices is not None:
            object.__setattr__(self, "parent_vertices", tuple(int(v) for v in self.parent_vertices))

    @property
    def num_edges(self):
        return len(self.edges)

    @cached_property
    def neighbors(self):
        adj = [[] for _ in range(self.n)]
        for i, j, _ in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def degrees(self):
        return np.array([len(a) for a in self.neighbors], dtype=int)

    def adjacency(self):
        A = np.zeros((self.n, self.n))
        for i, j, w in self.edges:
            A[i, j] = A[j, i] = w
        return A


def laplacian(g, eta):
    """Regularized Laplacian ``D - A + eta * I`` as a dense array."""
    if not eta > 0:
        raise InvalidInputError(f"eta must be positive, got {eta}")
    A = g.adjacency()
    L = np.diag(A.sum(axis=1)) - A
    L[np.diag_indices(g.n)] += eta
    return L


def laplacian_factor(g, eta):
    """Cholesky factor of ``laplacian(g, eta)``, memoized on the graph."""
    key = ("chol", float(eta))
    fac = g._cache.get(key)
    if fac is None:
        fac = la.cho_factor(laplacian(g, eta), lower=True)
        g._cache[key] = fac
    return fac


def laplacian_solve(g, eta, rhs):
    """Solve ``(D - A + eta I) X = rhs`` without forming the inverse."""
    if g.n == 0:
        return np.zeros_like(rhs, dtype=float)
    return la.cho_solve(laplacian_factor(g, eta), rhs)


def ball(g, v, r):
    """Vertices within ``r`` hops of ``v``; edge weights are ignored."""
    if not 0 <= v < g.n:
        raise InvalidInputError(f"vertex {v} outside [0, {g.n})")
    dist = {v: 0}
    queue = deque([v])
    while queue:
        u = queue.popleft()
        if dist[u] == r:
            continue
        for w in g.neighbors[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return frozenset(dist)


def hop_distances(g, v):
    """BFS hop distance from ``v`` to every reachable vertex."""
    dist = {v: 0}
    queue = deque([v])
    while queue:
        u = queue.popleft()
        for w in g.neighbors[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def induced_subgraph(g, vs):
    """Subgraph on ``vs`` with local indices in ascending parent order."""
    vs = sorted(set(int(v) for v in vs))
    if not vs:
        raise InvalidInputError("induced subgraph needs at least one vertex")
    if vs[0] < 0 or vs[-1] >= g.n:
        raise InvalidInputError(f"vertex set not within [0, {g.n})")
    local = {v: k for k, v in enumerate(vs)}
    edges = [(local[i], local[j], w) for i, j, w in g.edges if i in local and j in local]
    idx = np.array(vs)
    return Graph(
        n=len(vs),
        edges=tuple(edges),
        features=None if g.features is None else g.features[idx],
        graph_id=g.graph_id,
        node_labels=None if g.node_labels is None else g.node_labels[idx],
        parent_vertices=tuple(vs),
    )


def permute(g, perm):
    """Relabel vertex ``i`` as ``perm[i]``, carrying payloads along."""
    perm = np.asarray(perm, dtype=int)
    if sorted(perm.tolist()) != list(range(g.n)):
        raise InvalidInputError("perm must be a permutation of range(n)")
    inv = np.argsort(perm)
    edges = tuple((perm[i], perm[j], w) for i, j, w in g.edges)
    return Graph(
        n=g.n,
        edges=edges,
        features=None if g.features is None else g.features[inv],
        graph_id=g.graph_id,
        node_labels=None if g.node_labels is None else g.node_labels[inv],
    )


@dataclass(frozen=True, eq=False)
class NeighborhoodStack:
    """Nested neighborhoods ``N_1(v) <= ... <= N_L(v)`` and induced subgraphs.

    ``sets[l][v]`` and ``subgraphs[l][v]`` are indexed by 0-based level, so
    ``sets[0]`` holds the radius-``r0`` balls.
    """

    graph: Graph
    r0: int
    levels: int
    sets: tuple
    subgraphs: tuple

    def neighborhood(self, level, v):
        return self.sets[level - 1][v]

    def subgraph(self, level, v):
        return self.subgraphs[level - 1][v]


def build_neighborhood_stack(g, r0, levels):
    """Neighborhoods grown by the doubling union rule from radius-``r0`` balls."""
    if levels < 1:
        raise InvalidInputError(f"levels must be >= 1, got {levels}")
    if r0 < 0:
        raise InvalidInputError(f"r0 must be nonnegative, got {r0}")
    current = [ball(g, v, r0) for v in range(g.n)]
    sets = [tuple(current)]
    for _ in range(1, levels):
        current = [frozenset().union(*(current[w] for w in current[v])) for v in range(g.n)]
        sets.append(tuple(current))
    # equal vertex sets share one subgraph object (and its cached factorization)
    memo = {}
    subgraphs = []
    for level_sets in sets:
        row = []
        for s in level_sets:
            if s not in memo:
                memo[s] = induced_subgraph(g, s)
            row.append(memo[s])
        subgraphs.append(tuple(row))
    subgraphs = tuple(subgraphs)
    return NeighborhoodStack(graph=g, r0=r0, levels=levels, sets=tuple(sets), subgraphs=subgraphs)


def random_graph(rng, n, p=0.4, n_labels=3, weighted=False, connected=True):
    """Erdos-Renyi fixture with one-hot features over ``n_labels`` labels.

    With ``connected`` a random spanning path is added first.
    """
    order = rng.permutation(n)
    pairs = set()
    if connected:
        pairs.update((min(a, b), max(a, b)) for a, b in zip(order[:-1], order[1:]))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                pairs.add((i, j))
    edges = tuple((int(i), int(j), float(rng.uniform(0.5, 2.0)) if weighted else 1.0)
                  for i, j in sorted(pairs))
    labels = rng.integers(0, n_labels, size=n)
    feats = np.eye(n_labels)[labels]
    return Graph(n=n, edges=edges, features=feats, node_labels=labels)
