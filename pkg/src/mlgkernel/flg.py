"""Feature-space Laplacian graph (FLG) kernel.

Three entry points compute the same quantity:

* :func:`flg_explicit` from explicit vertex feature matrices,
* :func:`flg_kernelized` from a base kernel between vertices, via an
  orthonormal basis of the span of both graphs' vertex features,
* :func:`flg_from_gram` from an already assembled joint Gram matrix, which is
  what the multiscale recursion uses.
"""

from __future__ import annotations

import numpy as np

from .errors import BaseKernelError, InvalidInputError
from .graph import laplacian_solve
from .linalg import DEFAULT_TAU, bhattacharyya_ratio, sym_eig

PSD_RTOL = 1e-8


def dot_kernel(X, Y):
    """Linear base kernel between two stacks of feature rows."""
    return np.asarray(X, dtype=float) @ np.asarray(Y, dtype=float).T


def s_matrix_explicit(g, U, eta, gamma):
    """``U L^-1 U^T + gamma I`` for an ``m x n`` feature matrix ``U``."""
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[1] != g.n:
        raise InvalidInputError(f"feature matrix must be m x {g.n}, got {U.shape}")
    if not gamma > 0:
        raise InvalidInputError(f"gamma must be positive, got {gamma}")
    X = laplacian_solve(g, eta, U.T)
    S = U @ X
    S = 0.5 * (S + S.T)
    S[np.diag_indices_from(S)] += gamma
    return S


def flg_explicit(g1, U1, g2, U2, eta, gamma):
    U1 = np.asarray(U1, dtype=float)
    U2 = np.asarray(U2, dtype=float)
    if U1.shape[0] != U2.shape[0]:
        raise InvalidInputError(
            f"feature dimension mismatch: {U1.shape[0]} vs {U2.shape[0]}")
    S1 = s_matrix_explicit(g1, U1, eta, gamma)
    S2 = s_matrix_explicit(g2, U2, eta, gamma)
    return bhattacharyya_ratio(S1, S2)


def basis_from_gram(K, tau=DEFAULT_TAU):
    """Coordinates ``Q = [sqrt(l_1) u_1, ...]`` of each vertex in an orthonormal
    basis of the feature span, from the joint Gram matrix ``K``.

    Rows of ``Q`` satisfy ``Q Q^T = K`` on the retained eigenspace.
    """
    eig = sym_eig(K, tau)
    if eig.min_eigenvalue < -PSD_RTOL * max(eig.max_eigenvalue, 0.0) - 1e-14:
        raise BaseKernelError(
            f"base kernel Gram is not PSD: min eigenvalue {eig.min_eigenvalue:.3e}, "
            f"max {eig.max_eigenvalue:.3e}")
    return eig, eig.vectors * np.sqrt(eig.values)


def joint_basis(vertices, kappa=dot_kernel, tau=DEFAULT_TAU):
    """Joint Gram of ``vertices`` under ``kappa`` and its coordinate matrix."""
    if len(vertices) < 1:
        raise InvalidInputError("joint basis needs at least one vertex")
    K = np.asarray(kappa(vertices, vertices), dtype=float)
    return basis_from_gram(K, tau)


def s_matrix_from_coords(g, Q, eta, gamma):
    """``Q^T L^-1 Q + gamma I`` where ``Q`` has one row per vertex of ``g``."""
    return s_matrix_explicit(g, np.asarray(Q).T, eta, gamma)


def flg_from_gram(g1, g2, K, eta, gamma, tau=DEFAULT_TAU):
    """FLG kernel given the ``(n1 + n2)``-square joint Gram over both vertex sets.

    The first ``g1.n`` rows/columns of ``K`` belong to ``g1``.
    """
    K = np.asarray(K, dtype=float)
    if K.shape != (g1.n + g2.n, g1.n + g2.n):
        raise InvalidInputError(f"joint Gram must be {g1.n + g2.n}-square, got {K.shape}")
    _, Q = basis_from_gram(K, tau)
    S1 = s_matrix_from_coords(g1, Q[:g1.n], eta, gamma)
    S2 = s_matrix_from_coords(g2, Q[g1.n:], eta, gamma)
    return bhattacharyya_ratio(S1, S2)


def flg_kernelized(g1, g2, kappa=dot_kernel, eta=0.1, gamma=0.1, tau=DEFAULT_TAU,
                   payloads1=None, payloads2=None):
    """FLG kernel induced from the base kernel ``kappa``.

    ``kappa(xs, ys)`` returns the Gram block between two payload sequences.
    Payloads default to the graphs' feature rows.
    """
    p1 = g1.features if payloads1 is None else payloads1
    p2 = g2.features if payloads2 is None else payloads2
    if p1 is None or p2 is None:
        raise InvalidInputError("vertex payloads required (graph has no features)")
    if len(p1) != g1.n or len(p2) != g2.n:
        raise InvalidInputError("one payload per vertex required")
    if isinstance(p1, np.ndarray) and isinstance(p2, np.ndarray):
        if p1.shape[1:] != p2.shape[1:]:
            raise InvalidInputError("payload shapes differ between graphs")
        joint = np.concatenate([p1, p2], axis=0)
    else:
        joint = list(p1) + list(p2)
    K = np.asarray(kappa(joint, joint), dtype=float)
    return flg_from_gram(g1, g2, K, eta, gamma, tau)
