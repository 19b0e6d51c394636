"""Unrolled closed forms of (preconditioned) gradient descent from ``w_0 = 0``.

Products of varying factors follow the convention
``prod_{i=K-1}^{0} A_i = A_{K-1} ... A_1 A_0``, i.e. ``A_0`` acts first. They
are only ever needed applied to a vector, so they are accumulated as a sequence
of matrix-vector products.
"""
from __future__ import annotations

from math import comb

import numpy as np

from .linalg import (
    DimensionMismatchError,
    NotPositiveDefiniteError,
    as_matrix,
    as_vector,
    matrix_power,
    solve_spd,
)

__all__ = [
    "SingularGramError",
    "closed_form_gd_under",
    "closed_form_gd_over",
    "closed_form_precond_under",
    "closed_form_prediction_over",
    "closed_form_constant_d_over",
    "constant_D_limit_over",
    "closed_form_ridge",
    "binomial_unroll_under",
]


class SingularGramError(NotPositiveDefiniteError):
    pass


def _xy(X, y):
    X = as_matrix(X, "X")
    y = as_vector(y, "y")
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatchError("closed form", X.shape, y.shape)
    return X, y


def _solve_gram(G, b, which):
    try:
        return solve_spd(G, b)
    except NotPositiveDefiniteError as exc:
        raise SingularGramError(f"{which} is singular: {exc}") from None


def _d_sequence(D_seq, K, dim):
    if D_seq is None:
        return None
    D = np.asarray(D_seq, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] < K or D.shape[1] != dim:
        raise DimensionMismatchError("preconditioner sequence", D.shape, (K, dim))
    if np.any(D[:K] <= 0) or not np.all(np.isfinite(D[:K])):
        raise ValueError("preconditioners must be finite and strictly positive")
    return D[:K]


def closed_form_gd_under(X, y, eta: float, K: int) -> np.ndarray:
    """``w_K = (-X^T X)^{-1} ((I - eta X^T X)^K - I) X^T y`` (needs n >= d, full rank)."""
    X, y = _xy(X, y)
    G = X.T @ X
    M = matrix_power(np.eye(G.shape[0]) - eta * G, K)
    b = X.T @ y
    return _solve_gram(G, b - M @ b, "X^T X")


def closed_form_gd_over(X, y, eta: float, K: int) -> np.ndarray:
    """``w_K = X^T (-X X^T)^{-1} ((I - eta X X^T)^K - I) y`` (needs d >= n, full rank)."""
    X, y = _xy(X, y)
    G = X @ X.T
    M = matrix_power(np.eye(G.shape[0]) - eta * G, K)
    return X.T @ _solve_gram(G, y - M @ y, "X X^T")


def closed_form_precond_under(X, y, eta: float, D_seq, K: int) -> np.ndarray:
    """Weights after ``K`` steps with diagonal preconditioners ``D_0 .. D_{K-1}``.

    ``w_K = (-X^T X)^{-1} (prod_{i=K-1}^{0} (I - eta X^T X D_i) - I) X^T y``.
    ``D_seq=None`` means identity preconditioners (plain GD).
    """
    return closed_form_ridge(X, y, eta, D_seq, K, 0.0)


def closed_form_prediction_over(X, y, eta: float, D_seq, K: int) -> np.ndarray:
    """Training-set predictions ``X w_K`` in the over-parameterized regime.

    ``y_hat_K = -(prod_{i=K-1}^{0} (I - eta X D_i X^T) - I) y``. No inverse is
    involved, so this holds for any ``n``, ``d``.
    """
    X, y = _xy(X, y)
    D = _d_sequence(D_seq, K, X.shape[1])
    u = y.copy()
    for i in range(K):
        z = X.T @ u
        if D is not None:
            z = D[i] * z
        u = u - eta * (X @ z)
    return y - u


def closed_form_constant_d_over(X, y, eta: float, D, K: int) -> np.ndarray:
    """``w_K = D X^T (-X D X^T)^{-1} ((I - eta X D X^T)^K - I) y`` for fixed ``D``."""
    X, y = _xy(X, y)
    D = as_vector(D, "D")
    G = (X * D) @ X.T
    M = matrix_power(np.eye(G.shape[0]) - eta * G, K)
    return D * (X.T @ _solve_gram(G, y - M @ y, "X D X^T"))


def constant_D_limit_over(X, y, D) -> np.ndarray:
    """Limit ``D X^T (X D X^T)^{-1} y`` of constant-preconditioner descent.

    Equals the minimum-norm solution only when ``D`` is a multiple of ``I``.
    """
    X, y = _xy(X, y)
    D = as_vector(D, "D")
    if D.shape[0] != X.shape[1]:
        raise DimensionMismatchError("constant_D_limit_over", X.shape, D.shape)
    if np.any(D <= 0):
        raise ValueError("D must be strictly positive")
    G = (X * D) @ X.T
    return D * (X.T @ _solve_gram(G, y, "X D X^T"))


def closed_form_ridge(X, y, eta: float, D_seq, K: int, lam: float) -> np.ndarray:
    """Weights after ``K`` preconditioned steps on the ridge objective.

    With ``H = X^T X + lam I``:
    ``w_K = (-H)^{-1} (prod_{i=K-1}^{0} (I - eta H D_i) - I) X^T y``.
    ``lam = 0`` is allowed when ``X^T X`` is itself invertible.
    """
    X, y = _xy(X, y)
    if lam < 0:
        raise ValueError(f"ridge weight must be >= 0, got {lam}")
    d = X.shape[1]
    D = _d_sequence(D_seq, K, d)
    H = X.T @ X
    if lam:
        H = H + lam * np.eye(d)
    b = X.T @ y
    v = b.copy()
    for i in range(K):
        z = v if D is None else D[i] * v
        v = v - eta * (H @ z)
    which = "X^T X + lam I" if lam else "X^T X"
    return _solve_gram(H, b - v, which)


def binomial_unroll_under(X, y, eta: float, K: int) -> np.ndarray:
    """Explicit binomial expansion of ``K`` plain GD steps.

    ``w_K = sum_{i=1}^{K} (-1)^{i-1} C(K, i) eta^i (X^T X)^{i-1} X^T y``.
    Only usable as a cross-check for small ``K``; the alternating binomial sum
    loses all precision well before ``K = 60``.
    """
    X, y = _xy(X, y)
    if K > 30:
        raise ValueError("binomial unroll is only meaningful for small K (<= 30)")
    G = X.T @ X
    term = X.T @ y
    w = np.zeros(X.shape[1])
    for i in range(1, K + 1):
        w += (-1) ** (i - 1) * comb(K, i) * eta**i * term
        term = G @ term
    return w
