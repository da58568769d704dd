"""Soft-margin SVM on a precomputed kernel and a repeated stratified
cross-validation harness.

The binary solver is an SMO dual solver with second-order working-set
selection: it minimizes ``0.5 a'Qa - sum(a)`` subject to ``0 <= a <= C`` and
``y'a = 0`` where ``Q = (y y') * K``. Multiclass problems are handled one
vs. rest.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, InvalidInputError, StratificationError

log = logging.getLogger(__name__)

DEFAULT_C_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)
KKT_TOL = 1e-3
PSD_CLIP_RTOL = 1e-8
_TAU = 1e-12


@dataclass
class SvmModel:
    alpha: np.ndarray
    bias: float
    support: np.ndarray
    C: float
    y: np.ndarray
    kkt_gap: float = 0.0
    iterations: int = 0

    def decision_function(self, K_test):
        """``K_test`` is (n_test, n_train) against the training points."""
        K_test = np.atleast_2d(np.asarray(K_test, dtype=float))
        coef = (self.alpha * self.y)[self.support]
        return K_test[:, self.support] @ coef + self.bias

    def predict(self, K_test):
        return np.where(self.decision_function(K_test) > 0, 1, -1)


def _as_matrix(gram):
    values = getattr(gram, "values", gram)
    K = np.asarray(values, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise InvalidInputError(f"Gram matrix must be square, got {K.shape}")
    return K


def repair_psd(K, rtol=PSD_CLIP_RTOL):
    """Return ``(K + eps*I, eps)``.

    ``eps`` is zero unless the smallest eigenvalue is below
    ``-rtol * max eigenvalue``, in which case it lifts the spectrum to zero.
    """
    K = 0.5 * (K + K.T)
    w = np.linalg.eigvalsh(K)
    lo, hi = float(w[0]), float(w[-1])
    if lo >= -rtol * max(hi, 0.0):
        return K, 0.0
    eps = -lo
    log.warning("Gram has min eigenvalue %.3e (max %.3e); adding %.3e*I", lo, hi, eps)
    return K + eps * np.eye(len(K)), eps


def svm_train(gram, y, C, tol=KKT_TOL, max_iter=None):
    """Train a binary C-SVM on a precomputed Gram matrix.

    Parameters
    ----------
    gram : array or GramMatrix, shape (n, n)
    y : array of +1/-1 labels
    C : box constraint
    tol : stop when the maximal KKT violation ``m(a) - M(a)`` drops below it
    max_iter : iteration cap, default ``max(10**5, 100 n)``

    Raises ConvergenceError (carrying the final gap) if the cap is hit.
    """
    K = _as_matrix(gram)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if K.shape[0] != n:
        raise InvalidInputError(f"Gram is {K.shape[0]}x{K.shape[0]} but {n} labels given")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise InvalidInputError("labels must be +1 or -1")
    if not C > 0:
        raise InvalidInputError(f"C must be positive, got {C}")
    if max_iter is None:
        max_iter = max(10 ** 5, 100 * n)

    Q = (y[:, None] * y[None, :]) * K
    QD = np.diag(Q).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    it = 0
    gap = np.inf
    while True:
        yG = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            gap = 0.0
            break
        cand = np.where(up, yG, -np.inf)
        i = int(np.argmax(cand))
        m = cand[i]
        M = np.min(yG[low])
        gap = m - M
        if gap < tol:
            break
        if it >= max_iter:
            raise ConvergenceError(
                f"SMO did not converge in {max_iter} iterations (KKT gap {gap:.3e})",
                kkt_gap=float(gap))
        it += 1

        # second-order choice of j among violating members of the low set
        b = m - yG
        viol = low & (b > 0)
        a = QD[i] + QD - 2.0 * y[i] * y * Q[i]
        a = np.where(a > 0, a, _TAU)
        score = np.where(viol, -(b * b) / a, np.inf)
        j = int(np.argmin(score))

        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = QD[i] + QD[j] + 2.0 * Q[i, j]
            delta = (-G[i] - G[j]) / max(quad, _TAU)
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            quad = QD[i] + QD[j] - 2.0 * Q[i, j]
            delta = (G[i] - G[j]) / max(quad, _TAU)
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
            elif nj < 0:
                nj, ni = 0.0, total
            if total > C:
                if nj > C:
                    nj, ni = C, total - C
            elif ni < 0:
                ni, nj = 0.0, total
        di, dj = ni - ai, nj - aj
        alpha[i], alpha[j] = ni, nj
        G += Q[:, i] * di + Q[:, j] * dj

    alpha = np.clip(alpha, 0.0, C)
    rho = _rho(alpha, y, G, C)
    support = np.flatnonzero(alpha > 0)
    return SvmModel(alpha=alpha, bias=-rho, support=support, C=float(C), y=y,
                    kkt_gap=float(gap), iterations=it)


def _rho(alpha, y, G, C):
    yG = y * G
    at_upper = alpha >= C
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        return float(yG[free].mean())
    ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    if np.isinf(ub) or np.isinf(lb):
        return float(ub if np.isfinite(ub) else lb)
    return float(0.5 * (ub + lb))


@dataclass
class OneVsRest:
    classes: np.ndarray
    models: list

    def decision_function(self, K_test):
        return np.column_stack([m.decision_function(K_test) for m in self.models])

    def predict(self, K_test):
        if len(self.classes) == 2:
            f = self.models[0].decision_function(K_test)
            return np.where(f > 0, self.classes[1], self.classes[0])
        # argmax takes the first maximum, so ties go to the lowest class id
        return self.classes[np.argmax(self.decision_function(K_test), axis=1)]


def fit_multiclass(K, labels, C, tol=KKT_TOL):
    """One-vs-rest over the sorted class ids present in ``labels``.

    Two classes train a single machine with the larger id as +1.
    """
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if len(classes) < 2:
        raise StratificationError(f"need at least two classes, got {classes.tolist()}")
    if len(classes) == 2:
        y = np.where(labels == classes[1], 1.0, -1.0)
        return OneVsRest(classes, [svm_train(K, y, C, tol)])
    models = [svm_train(K, np.where(labels == c, 1.0, -1.0), C, tol) for c in classes]
    return OneVsRest(classes, models)


def stratified_folds(labels, folds, rng):
    """Fold id per sample; each class is shuffled and dealt round-robin,
    continuing where the previous class stopped."""
    labels = np.asarray(labels)
    assign = np.empty(len(labels), dtype=int)
    pos = 0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        assign[idx] = (pos + np.arange(len(idx))) % folds
        pos = (pos + len(idx)) % folds
    return assign


def _accuracy(model, K, train, test, labels):
    pred = model.predict(K[np.ix_(test, train)])
    return float(np.mean(pred == labels[test]))


def select_C(K, labels, C_grid, inner_folds, rng):
    """C with the best inner stratified CV accuracy (ties go to the smaller C)."""
    if len(C_grid) == 1:
        return float(C_grid[0])
    counts = np.unique(labels, return_counts=True)[1]
    k = int(min(inner_folds, counts.min()))
    if k < 2:
        return float(sorted(C_grid)[len(C_grid) // 2])
    assign = stratified_folds(labels, k, rng)
    scores = []
    for C in sorted(C_grid):
        correct = 0
        for f in range(k):
            tr, te = np.flatnonzero(assign != f), np.flatnonzero(assign == f)
            model = fit_multiclass(K[np.ix_(tr, tr)], labels[tr], C)
            correct += np.sum(model.predict(K[np.ix_(te, tr)]) == labels[te])
        scores.append(correct / len(labels))
    return float(sorted(C_grid)[int(np.argmax(scores))])


@dataclass
class CvReport:
    fold_accuracies: np.ndarray
    repeat_accuracies: np.ndarray
    chosen_C: np.ndarray
    psd_shift: float = 0.0
    classes: tuple = ()
    extra: dict = field(default_factory=dict)

    @property
    def mean(self):
        return float(self.repeat_accuracies.mean())

    @property
    def std(self):
        return float(self.repeat_accuracies.std())

    def summary(self):
        return f"{100 * self.mean:.2f} (±{100 * self.std:.2f})"


def cross_validate(gram, labels, C_grid=DEFAULT_C_GRID, folds=10, repeats=10, seed=0,
                   inner_folds=3, threads=1):
    """Repeated stratified k-fold CV on a precomputed Gram matrix.

    Every repeat reshuffles the folds with its own seed derived from
    ``seed``. Inside each training split, C is chosen from ``C_grid`` by an
    inner stratified CV. A repeat's accuracy is the fraction of all samples
    predicted correctly when held out; ``mean``/``std`` are over repeats.
    """
    K, shift = repair_psd(_as_matrix(gram))
    labels = np.asarray(labels)
    if len(labels) != len(K):
        raise InvalidInputError(f"{len(labels)} labels for a {len(K)}x{len(K)} Gram")
    if folds < 2:
        raise InvalidInputError(f"need at least 2 folds, got {folds}")
    classes = np.unique(labels)
    seeds = np.random.SeedSequence(seed).spawn(repeats)

    def run_fold(task):
        r, f, assign, inner_seed = task
        train, test = np.flatnonzero(assign != f), np.flatnonzero(assign == f)
        missing = np.setdiff1d(classes, labels[train])
        if len(missing):
            raise StratificationError(
                f"repeat {r} fold {f}: class(es) {missing.tolist()} absent from training split")
        rng = np.random.default_rng(inner_seed)
        Ktr = K[np.ix_(train, train)]
        C = select_C(Ktr, labels[train], C_grid, inner_folds, rng)
        model = fit_multiclass(Ktr, labels[train], C)
        pred = model.predict(K[np.ix_(test, train)])
        return int(np.sum(pred == labels[test])), len(test), C

    tasks = []
    for r in range(repeats):
        rng = np.random.default_rng(seeds[r])
        assign = stratified_folds(labels, folds, rng)
        inner = seeds[r].spawn(folds)
        tasks.extend((r, f, assign, inner[f]) for f in range(folds))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(run_fold, tasks))
    else:
        results = [run_fold(t) for t in tasks]

    correct = np.array([c for c, _, _ in results]).reshape(repeats, folds)
    sizes = np.array([s for _, s, _ in results]).reshape(repeats, folds)
    chosen = np.array([C for _, _, C in results]).reshape(repeats, folds)
    with np.errstate(invalid="ignore"):
        fold_acc = np.where(sizes > 0, correct / np.maximum(sizes, 1), np.nan)
    repeat_acc = correct.sum(axis=1) / sizes.sum(axis=1)
    return CvReport(fold_accuracies=fold_acc, repeat_accuracies=repeat_acc,
                    chosen_C=chosen, psd_shift=shift,
                    classes=tuple(int(c) for c in classes))
