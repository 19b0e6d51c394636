"""Analytic reference solutions that iterative methods are measured against."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .closed_form import _solve_gram, _xy

__all__ = [
    "SolutionKind",
    "ReferenceSolution",
    "NotApplicable",
    "least_squares_solution",
    "min_norm_solution",
    "ridge_solution",
    "adagrad_variant_fixed_point",
    "angular_distance",
]

COLLINEARITY_TOL = 1e-8


class SolutionKind(str, enum.Enum):
    LEFT_INVERSE = "LeftInverse"
    MIN_NORM = "MinNorm"
    RIDGE = "Ridge"
    ADAGRAD_VARIANT_FIXED_POINT = "AdaGradVariantFixedPoint"


@dataclass(frozen=True)
class ReferenceSolution:
    w: np.ndarray
    kind: SolutionKind
    residual: float
    # fixed point only: X v = scale * y for the unnormalized direction v
    scale: Optional[float] = None


@dataclass(frozen=True)
class NotApplicable:
    """Returned when a solution's structural assumption fails on the data."""

    reason: str
    cross_residual: float = float("nan")

    def __bool__(self):
        return False


def _residual(X, w, y) -> float:
    return float(np.linalg.norm(X @ w - y))


def least_squares_solution(X, y) -> ReferenceSolution:
    """``(X^T X)^{-1} X^T y`` for full-column-rank ``X``."""
    X, y = _xy(X, y)
    w = _solve_gram(X.T @ X, X.T @ y, "X^T X")
    return ReferenceSolution(w, SolutionKind.LEFT_INVERSE, _residual(X, w, y))


def min_norm_solution(X, y) -> ReferenceSolution:
    """``X^T (X X^T)^{-1} y``, the smallest-norm interpolant for full-row-rank ``X``."""
    X, y = _xy(X, y)
    w = X.T @ _solve_gram(X @ X.T, y, "X X^T")
    return ReferenceSolution(w, SolutionKind.MIN_NORM, _residual(X, w, y))


def ridge_solution(X, y, lam: float) -> ReferenceSolution:
    X, y = _xy(X, y)
    if not lam > 0:
        raise ValueError(f"ridge weight must be positive, got {lam}")
    d = X.shape[1]
    w = _solve_gram(X.T @ X + lam * np.eye(d), X.T @ y, "X^T X + lam I")
    return ReferenceSolution(w, SolutionKind.RIDGE, _residual(X, w, y))


def adagrad_variant_fixed_point(X, y) -> Union[ReferenceSolution, NotApplicable]:
    """Direction the squared-window AdaGrad variant is pinned to, when it exists.

    With ``Q = diag(|X^T y|^3)`` and ``v = Q^{-1} sign(X^T y)``: if ``X v`` is
    collinear with ``y`` then every iterate started at zero stays on the ray
    spanned by ``v``. The returned ``w`` is ``v / ||v||``; ``scale`` is ``c`` in
    ``X v = c y``. Otherwise a :class:`NotApplicable` is returned.
    """
    X, y = _xy(X, y)
    b = X.T @ y
    if np.any(np.abs(b) <= 1e-12 * max(1.0, np.abs(b).max())):
        raise ValueError("X^T y has a zero component; the fixed point is undefined")
    v = np.sign(b) / np.abs(b) ** 3
    Xv = X @ v
    c = float(y @ Xv) / float(y @ y)
    cross = float(np.linalg.norm(Xv - c * y) / np.linalg.norm(Xv))
    if cross > COLLINEARITY_TOL:
        return NotApplicable("X Q^{-1} sign(X^T y) is not a multiple of y", cross)
    u = v / np.linalg.norm(v)
    return ReferenceSolution(
        u, SolutionKind.ADAGRAD_VARIANT_FIXED_POINT, _residual(X, u, y), scale=c
    )


def angular_distance(a, b) -> float:
    """Angle in radians between two nonzero vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    # chord form stays accurate for tiny angles, unlike arccos of the cosine
    chord = np.linalg.norm(a / np.linalg.norm(a) - b / np.linalg.norm(b))
    return float(2.0 * np.arcsin(min(1.0, chord / 2.0)))
