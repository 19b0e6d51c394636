"""Small dense linear-algebra layer shared by the rest of the package.

Matrices and vectors are plain ``float64`` numpy arrays. The helpers here
validate shapes and finiteness, and wrap the handful of factorizations the
package needs (Cholesky solves, power iteration, matrix powers).
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

__all__ = [
    "DimensionMismatchError",
    "NotPositiveDefiniteError",
    "ConvergenceError",
    "as_matrix",
    "as_vector",
    "matmul",
    "solve_spd",
    "top_eigenvalue",
    "matrix_power",
]

SYMMETRY_TOL = 1e-10


class DimensionMismatchError(ValueError):
    """Raised when operand shapes do not conform."""

    def __init__(self, op: str, *shapes: tuple[int, ...]):
        self.shapes = shapes
        listed = " and ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {listed}")


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


class ConvergenceError(RuntimeError):
    """Iterative routine ran out of iterations; ``estimate`` holds the last value."""

    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D float64 array (copy only if needed)."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def as_vector(v, name: str = "vector") -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit shape check."""
    A = as_matrix(a, "A")
    B = np.asarray(b, dtype=np.float64)
    if B.ndim == 1:
        B = as_vector(B, "B")
    else:
        B = as_matrix(B, "B")
    if A.shape[1] != B.shape[0]:
        raise DimensionMismatchError("matmul", A.shape, B.shape)
    return A @ B


def _cholesky(A: np.ndarray) -> np.ndarray:
    if not np.allclose(A, A.T, rtol=0.0, atol=SYMMETRY_TOL * max(1.0, np.abs(A).max())):
        raise NotPositiveDefiniteError("matrix is not symmetric")
    try:
        L = scipy.linalg.cholesky(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"matrix is not positive definite ({exc})") from None
    # Numerically singular Gram matrices often factor with tiny positive pivots.
    pivots = np.diag(L) ** 2
    if pivots.min() <= A.shape[0] * np.finfo(float).eps * np.abs(np.diag(A)).max():
        raise NotPositiveDefiniteError("matrix is not positive definite (vanishing pivot)")
    return L


def solve_spd(a, b) -> np.ndarray:
    """Solve ``A x = b`` for symmetric positive definite ``A`` via Cholesky.

    ``b`` may be a vector or a matrix of right-hand sides. One step of
    iterative refinement is applied to tighten the residual.
    """
    A = as_matrix(a, "A")
    b = np.asarray(b, dtype=np.float64)
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatchError("solve_spd", A.shape)
    if b.shape[0] != A.shape[0]:
        raise DimensionMismatchError("solve_spd", A.shape, b.shape)
    L = _cholesky(A)
    factor = (L, True)
    x = scipy.linalg.cho_solve(factor, b, check_finite=False)
    x += scipy.linalg.cho_solve(factor, b - A @ x, check_finite=False)
    return x


def top_eigenvalue(a, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration.

    Starts from the normalized all-ones vector. Stops once the eigen-residual
    ``||A v - lam v||`` falls below ``tol * lam``.
    """
    A = as_matrix(a, "A")
    n = A.shape[0]
    if A.shape[1] != n:
        raise DimensionMismatchError("top_eigenvalue", A.shape)
    scale = np.abs(A).max()
    if scale == 0.0:
        return 0.0

    v = np.ones(n) / np.sqrt(n)
    Av = A @ v
    if np.linalg.norm(Av) <= 1e-14 * scale:
        # all-ones direction lies in the null space; use a fixed aperiodic start
        v = np.cos(np.arange(1, n + 1) * 1.618033988749895)
        v /= np.linalg.norm(v)
        Av = A @ v

    lam = float(v @ Av)
    for _ in range(max_iter):
        norm = np.linalg.norm(Av)
        if norm == 0.0:
            return 0.0
        if np.linalg.norm(Av - lam * v) <= tol * abs(lam):
            return lam
        v = Av / norm
        Av = A @ v
        lam = float(v @ Av)
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations", lam
    )


def matrix_power(a, k: int) -> np.ndarray:
    """``A**k`` for a square matrix by repeated squaring (``k >= 0``)."""
    A = as_matrix(a, "A")
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatchError("matrix_power", A.shape)
    if k < 0:
        raise ValueError("exponent must be non-negative")
    result = np.eye(A.shape[0])
    base = A.copy()
    while k:
        if k & 1:
            result = result @ base
        k >>= 1
        if k:
            base = base @ base
    return result
