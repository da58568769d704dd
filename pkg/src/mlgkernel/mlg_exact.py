"""Exact multiscale Laplacian subgraph (MLS) and graph (MLG) kernels.

The level-``l`` subgraph kernel between vertices ``a`` and ``b`` is the FLG
kernel between their level-``l`` neighborhood subgraphs, induced from the
level ``l - 1`` kernel (level 0 being the user base kernel on feature rows).
The MLG kernel is the FLG kernel between whole graphs induced from the
top level.

Every ``(level, pair)`` value is computed at most once per :class:`ExactMlg`
instance. With ``dedup`` enabled, vertices whose neighborhood subgraphs are
provably isomorphic (including lower-level identities) share cache entries.
This is the slow verification path; see :mod:`mlgkernel.mlg_linearized` for
the dataset-scale pipeline.
"""

from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .errors import BudgetExceededError, InvalidInputError
from .flg import dot_kernel, flg_from_gram
from .gram import GramMatrix
from .graph import build_neighborhood_stack
from .linalg import DEFAULT_TAU

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MlsParams:
    levels: int = 2
    r0: int = 1
    eta: float = 0.1
    gamma: float = 0.1
    tau: float = DEFAULT_TAU
    base_kernel: object = dot_kernel
    max_evaluations: int = 10**7
    dedup: bool = True

    def __post_init__(self):
        if self.levels < 1:
            raise InvalidInputError(f"levels must be >= 1, got {self.levels}")
        if self.r0 < 1:
            raise InvalidInputError(f"r0 must be >= 1, got {self.r0}")
        if not (self.eta > 0 and self.gamma > 0):
            raise InvalidInputError("eta and gamma must be positive")


def _quantize(x, digits=6):
    # +0.0 folds negative zero into positive zero
    return tuple(np.round(np.asarray(x, dtype=float), digits).ravel() + 0.0)


def subgraph_fingerprint(sub, labels):
    """Cheap reordering-invariant summary of a labelled subgraph.

    ``labels`` holds one hashable identity per local vertex (lower-level
    class ids). Equal fingerprints are necessary, not sufficient, for two
    subgraphs to be interchangeable.
    """
    A = sub.adjacency()
    lap = np.diag(A.sum(axis=1)) - A
    eigs = np.linalg.eigvalsh(lap) if sub.n else np.zeros(0)
    return (
        sub.n,
        sub.num_edges,
        tuple(sorted(sub.degrees.tolist())),
        tuple(sorted(labels)),
        tuple(sorted(_quantize(eigs))),
    )


def canonical_form(sub, labels):
    """Vertex ordering by refined colors, and the graph written in that order.

    Two subgraphs with equal forms are isomorphic via their orderings with
    labels and edge weights preserved. Ties in the refinement are broken by
    local index, so some isomorphic pairs get different forms; that only
    costs a missed merge.
    """
    n = sub.n
    colors = list(labels)
    weights = {}
    for i, j, w in sub.edges:
        weights[i, j] = weights[j, i] = w
    for _ in range(n):
        sig = [(colors[v], tuple(sorted((colors[u], weights[v, u]) for u in sub.neighbors[v])))
               for v in range(n)]
        ranks = {s: r for r, s in enumerate(sorted(set(sig), key=repr))}
        new = [ranks[s] for s in sig]
        if len(set(new)) == len(set(colors)):
            colors = new
            break
        colors = new
    order = sorted(range(n), key=lambda v: (colors[v], v))
    pos = {v: k for k, v in enumerate(order)}
    edges = tuple(sorted(
        (min(pos[i], pos[j]), max(pos[i], pos[j]), w) for i, j, w in sub.edges))
    return tuple(labels[v] for v in order), edges


class ExactMlg:
    """Memoized exact MLS/MLG evaluation over a fixed list of graphs.

    Vertices are addressed by global ids: vertex ``v`` of graph ``i`` is
    ``offsets[i] + v``. The cache maps ``(level, a, b)`` with ``a <= b`` to a
    kernel value and is write-once.
    """

    def __init__(self, graphs, params=MlsParams()):
        if not graphs:
            raise InvalidInputError("need at least one graph")
        for g in graphs:
            if g.features is None:
                raise InvalidInputError(f"graph {g.graph_id!r} has no vertex features")
        dims = {g.features.shape[1] for g in graphs}
        if len(dims) > 1:
            raise InvalidInputError(f"graphs disagree on feature width: {sorted(dims)}")
        self.graphs = list(graphs)
        self.params = params
        self.offsets = np.concatenate([[0], np.cumsum([g.n for g in graphs])]).astype(int)
        self.owner = np.repeat(np.arange(len(graphs)), [g.n for g in graphs])
        self.features = np.concatenate([g.features for g in graphs], axis=0)
        self.stacks = [build_neighborhood_stack(g, params.r0, params.levels) for g in graphs]
        self.cache = {}
        self.evaluations = 0
        self.evaluations_by_level = [0] * (params.levels + 2)
        self._lock = threading.Lock()
        self._key_of = self._build_keys()

    # -- vertex bookkeeping -------------------------------------------------

    def _locate(self, a):
        gi = int(self.owner[a])
        return gi, int(a - self.offsets[gi])

    def subgraph(self, level, a):
        gi, v = self._locate(a)
        return self.stacks[gi].subgraph(level, v)

    def subgraph_vertices(self, level, a):
        gi, _ = self._locate(a)
        sub = self.subgraph(level, a)
        return [int(self.offsets[gi]) + p for p in sub.parent_vertices]

    def _build_keys(self):
        """Per-level identity used in cache keys: the vertex id itself, or with
        dedup the id of a representative with an identical canonical form."""
        total = int(self.offsets[-1])
        ident = np.arange(total)
        keys = [ident]
        if not self.params.dedup:
            return keys * (self.params.levels + 1)
        # level 0: exact feature rows
        rows = {}
        k0 = np.empty(total, dtype=int)
        for a in range(total):
            k0[a] = rows.setdefault(self.features[a].tobytes(), a)
        keys = [k0]
        self.fingerprints = {}
        for level in range(1, self.params.levels + 1):
            prev = keys[-1]
            table = {}
            kl = np.empty(total, dtype=int)
            form_of_sub = {}
            for a in range(total):
                sub = self.subgraph(level, a)
                # sub objects are shared between vertices with equal neighborhoods
                ck = id(sub)
                if ck in form_of_sub:
                    kl[a] = form_of_sub[ck]
                    continue
                labels = [int(prev[b]) for b in self.subgraph_vertices(level, a)]
                fp = subgraph_fingerprint(sub, labels)
                form = canonical_form(sub, labels)
                bucket = table.setdefault(fp, [])
                for other_form, rep in bucket:
                    if other_form == form:
                        kl[a] = rep
                        break
                else:
                    bucket.append((form, a))
                    kl[a] = a
                form_of_sub[ck] = kl[a]
            self.fingerprints[level] = table
            keys.append(kl)
        return keys

    def key(self, level, a, b):
        ka, kb = int(self._key_of[level][a]), int(self._key_of[level][b])
        return (level, ka, kb) if ka <= kb else (level, kb, ka)

    # -- kernel evaluation ----------------------------------------------------

    def _count(self, level):
        with self._lock:
            self.evaluations += 1
            self.evaluations_by_level[level] += 1
            if self.evaluations > self.params.max_evaluations:
                raise BudgetExceededError(
                    f"exceeded {self.params.max_evaluations} FLG evaluations at level {level}",
                    level=level, evaluations=self.evaluations)

    def _joint_gram(self, level, ids):
        """Gram over ``ids`` under the level-``level`` kernel (0 = base kernel)."""
        if level == 0:
            X = self.features[ids]
            return np.asarray(self.params.base_kernel(X, X), dtype=float)
        n = len(ids)
        K = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                K[i, j] = K[j, i] = self.cache[self.key(level, ids[i], ids[j])]
        return K

    def _evaluate(self, key):
        level, a, b = key
        K = self._joint_gram(level - 1, self.subgraph_vertices(level, a)
                             + self.subgraph_vertices(level, b))
        self._count(level)
        p = self.params
        return flg_from_gram(self.subgraph(level, a), self.subgraph(level, b),
                             K, p.eta, p.gamma, p.tau)

    def ensure(self, level, pairs):
        """Fill the cache for every ``(a, b)`` in ``pairs`` at ``level``.

        Demand is propagated top-down first, then levels are evaluated
        bottom-up, so no Python recursion is involved.
        """
        keys = (self.key(level, a, b) for a, b in pairs)
        demand = {level: {k for k in keys if k not in self.cache}}
        for lv in range(level, 1, -1):
            need = set()
            for _, a, b in demand[lv]:
                ids = self.subgraph_vertices(lv, a) + self.subgraph_vertices(lv, b)
                for i, j in combinations_with_replacement(range(len(ids)), 2):
                    k = self.key(lv - 1, ids[i], ids[j])
                    if k not in self.cache:
                        need.add(k)
            demand[lv - 1] = need
        for lv in range(1, level + 1):
            for k in sorted(demand.get(lv, ())):
                if k in self.cache:
                    continue
                value = self._evaluate(k)
                self.cache.setdefault(k, value)

    def mls_kernel(self, level, a, b):
        if not 1 <= level <= self.params.levels:
            raise InvalidInputError(f"level must be in [1, {self.params.levels}]")
        self.ensure(level, [(a, b)])
        return self.cache[self.key(level, a, b)]

    def mlg_kernel(self, i, j):
        """Kernel between graphs ``i`` and ``j`` (indices into ``graphs``)."""
        L = self.params.levels
        ids = list(range(self.offsets[i], self.offsets[i + 1])) + \
            list(range(self.offsets[j], self.offsets[j + 1]))
        self.ensure(L, [(ids[s], ids[t]) for s, t in
                        combinations_with_replacement(range(len(ids)), 2)])
        K = self._joint_gram(L, ids)
        self._count(L + 1)
        p = self.params
        return flg_from_gram(self.graphs[i], self.graphs[j], K, p.eta, p.gamma, p.tau)

    def gram(self, threads=1):
        M = len(self.graphs)
        pairs = [(i, j) for i in range(M) for j in range(i, M)]
        G = np.empty((M, M))
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                values = list(ex.map(lambda ij: self.mlg_kernel(*ij), pairs))
        else:
            values = [self.mlg_kernel(i, j) for i, j in pairs]
        for (i, j), v in zip(pairs, values):
            G[i, j] = G[j, i] = v
        return G


def mls_kernel(graph1, v1, graph2, v2, level, params=MlsParams()):
    """Level-``level`` subgraph kernel between vertex ``v1`` of ``graph1`` and
    vertex ``v2`` of ``graph2``."""
    eng = ExactMlg([graph1, graph2], params)
    return eng.mls_kernel(level, v1, graph1.n + v2)


def mlg_kernel(graph1, graph2, params=MlsParams()):
    return ExactMlg([graph1, graph2], params).mlg_kernel(0, 1)


def gram_exact(graphs, params=MlsParams(), threads=1):
    """Exact MLG Gram matrix of ``graphs`` with one shared cache."""
    eng = ExactMlg(graphs, params)
    G = eng.gram(threads=threads)
    meta = {
        "mode": "exact",
        "levels": params.levels,
        "radius": params.r0,
        "eta": params.eta,
        "gamma": params.gamma,
        "tau": params.tau,
        "dedup": params.dedup,
        "evaluations": eng.evaluations,
        "cache_entries": len(eng.cache),
    }
    return GramMatrix(values=G, metadata=meta)


# -- cache-free reference -----------------------------------------------------

def naive_mlg_kernel(graph1, graph2, params=MlsParams()):
    """Plain recursion straight from the definitions; no memoization.

    Exponential in the number of levels; only for cross-checking
    :class:`ExactMlg` on toy graphs.
    """
    stacks = [build_neighborhood_stack(g, params.r0, params.levels) for g in (graph1, graph2)]
    graphs = (graph1, graph2)

    def vertices(level, gi, v):
        if level == 0:
            return [(gi, v)]
        sub = stacks[gi].subgraph(level, v)
        return [(gi, p) for p in sub.parent_vertices]

    def kernel(level, x, y):
        if level == 0:
            fx = graphs[x[0]].features[x[1]][None, :]
            fy = graphs[y[0]].features[y[1]][None, :]
            return float(params.base_kernel(fx, fy)[0, 0])
        ids = vertices(level, *x) + vertices(level, *y)
        n = len(ids)
        K = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                K[i, j] = K[j, i] = kernel(level - 1, ids[i], ids[j])
        return flg_from_gram(stacks[x[0]].subgraph(level, x[1]),
                             stacks[y[0]].subgraph(level, y[1]),
                             K, params.eta, params.gamma, params.tau)

    L = params.levels
    ids = [(0, v) for v in range(graph1.n)] + [(1, v) for v in range(graph2.n)]
    n = len(ids)
    K = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            K[i, j] = K[j, i] = kernel(L, ids[i], ids[j])
    return flg_from_gram(graph1, graph2, K, params.eta, params.gamma, params.tau)


def naive_gram(graphs, params=MlsParams()):
    M = len(graphs)
    G = np.empty((M, M))
    for i in range(M):
        for j in range(i, M):
            G[i, j] = G[j, i] = naive_mlg_kernel(graphs[i], graphs[j], params)
    return G
