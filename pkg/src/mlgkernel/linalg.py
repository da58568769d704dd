"""Symmetric positive-definite helpers: Cholesky, log-determinants, eigenbases
and the Bhattacharyya overlap between zero-mean Gaussians."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .errors import InvalidInputError, SingularMatrixError

log = logging.getLogger(__name__)

DEFAULT_TAU = 1e-8
JITTER = 1e-12


@dataclass(frozen=True)
class SymEig:
    """Thresholded eigendecomposition, eigenvalues in descending order.

    ``values[i] > tau * max(eigenvalue)`` for every retained pair and the
    columns of ``vectors`` are orthonormal. ``min_eigenvalue`` is the
    smallest eigenvalue of the full input, kept for PSD diagnostics.
    """

    values: np.ndarray
    vectors: np.ndarray
    tau: float
    min_eigenvalue: float
    max_eigenvalue: float

    @property
    def rank(self):
        return len(self.values)


def _fix_signs(vectors):
    # deterministic orientation: largest-magnitude entry of each column positive
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def check_symmetric(K, rtol=1e-8, name="matrix"):
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {K.shape}")
    if not np.all(np.isfinite(K)):
        raise InvalidInputError(f"{name} has non-finite entries")
    scale = max(np.abs(K).max(initial=0.0), 1.0)
    if np.abs(K - K.T).max(initial=0.0) > rtol * scale:
        raise InvalidInputError(f"{name} is not symmetric")
    return K


def sym_eig(K, tau=DEFAULT_TAU):
    """Eigenpairs of symmetric ``K`` with eigenvalue above ``tau * lambda_max``."""
    K = check_symmetric(K, name="K")
    n = K.shape[0]
    if n == 0:
        return SymEig(np.zeros(0), np.zeros((0, 0)), tau, 0.0, 0.0)
    w, V = np.linalg.eigh(0.5 * (K + K.T))
    w, V = w[::-1], V[:, ::-1]
    lam_max = w[0]
    keep = w > tau * lam_max if lam_max > 0 else np.zeros(n, dtype=bool)
    return SymEig(
        values=w[keep].copy(),
        vectors=_fix_signs(V[:, keep].copy()),
        tau=tau,
        min_eigenvalue=float(w[-1]),
        max_eigenvalue=float(lam_max),
    )


def cholesky(S):
    """Lower Cholesky factor of ``S``.

    On failure one diagonal jitter of ``1e-12 * trace / p`` is added before
    giving up with :class:`SingularMatrixError`.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise SingularMatrixError("matrix has non-finite entries")
    c, info = lapack.dpotrf(S, lower=1, clean=1)
    if info == 0:
        return c
    p = S.shape[0]
    jitter = JITTER * max(np.trace(S), 0.0) / p
    log.warning("Cholesky failed at pivot %d; retrying with jitter %.3g", info - 1, jitter)
    c, info = lapack.dpotrf(S + jitter * np.eye(p), lower=1, clean=1)
    if info != 0:
        raise SingularMatrixError(
            f"matrix is not positive definite (pivot {info - 1})", pivot=info - 1)
    return c


def logdet_chol(c):
    return 2.0 * np.log(np.diagonal(c)).sum()


def spd_logdet(S):
    return logdet_chol(cholesky(S))


def spd_logdet_and_inverse(S):
    """Return ``(log|S|, S^-1)`` from one Cholesky factorization."""
    c = cholesky(S)
    inv, info = lapack.dpotri(c, lower=1)
    if info != 0:
        raise SingularMatrixError("inversion failed", pivot=info - 1)
    inv = np.tril(inv) + np.tril(inv, -1).T
    return logdet_chol(c), inv


def bhattacharyya_log_ratio(S1, S2, logdet1=None, logdet2=None):
    """Log of the Bhattacharyya overlap of ``N(0, S1)`` and ``N(0, S2)``.

    Uses ``(S1^-1 + S2^-1)/2 = S1^-1 (S1 + S2)/2 S2^-1``, so only the three
    log-determinants of ``S1``, ``S2`` and ``(S1 + S2)/2`` are needed.
    """
    S1 = np.asarray(S1, dtype=float)
    S2 = np.asarray(S2, dtype=float)
    if S1.shape != S2.shape:
        raise InvalidInputError(f"dimension mismatch: {S1.shape} vs {S2.shape}")
    if S1.shape[0] == 0:
        return 0.0
    if logdet1 is None:
        logdet1 = spd_logdet(S1)
    if logdet2 is None:
        logdet2 = spd_logdet(S2)
    mid = spd_logdet(0.5 * (S1 + S2))
    return 0.25 * (logdet1 + logdet2) - 0.5 * mid


def bhattacharyya_ratio(S1, S2, logdet1=None, logdet2=None):
    """``|(S1^-1/2 + S2^-1/2)^-1|^(1/2) / (|S1|^(1/4) |S2|^(1/4))``, in (0, 1]."""
    return float(np.exp(bhattacharyya_log_ratio(S1, S2, logdet1, logdet2)))


def batch_logdet(stack):
    """Log-determinants of a ``(k, p, p)`` stack of SPD matrices."""
    stack = np.asarray(stack, dtype=float)
    if stack.shape[-1] == 0:
        return np.zeros(stack.shape[0])
    try:
        c = np.linalg.cholesky(stack)
        return 2.0 * np.log(np.diagonal(c, axis1=-2, axis2=-1)).sum(axis=-1)
    except np.linalg.LinAlgError:
        return np.array([spd_logdet(S) for S in stack])


def bhattacharyya_ratio_many(stack, logdets, S, logdet):
    """Overlaps between every matrix in ``stack`` and a single ``S``."""
    mids = batch_logdet(0.5 * (stack + S))
    return np.exp(0.25 * (logdets + logdet) - 0.5 * mids)
