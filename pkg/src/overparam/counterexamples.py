"""Sparse structured datasets where one feature decides the class.

Each row ``i`` (1-based below, 0-based in code) carries its label in column 1,
ones in a few *common* columns shared by every row, and ones in *unique*
columns used by that row only:

``wilson-v1``
    common ``{2, 3}``; unique ``4 + 5(i-1)`` for a positive row, the five
    columns ``4 + 5(i-1) .. 8 + 5(i-1)`` for a negative row.
``new-ce``
    common ``{2, 3, 4, 6}``; unique ``5 + 5(i-1)`` (positive) or
    ``7 + 5(i-1)`` (negative).

A model trained from zero only ever touches columns used by the training
rows, so for a fresh test row the inner product ``x^T w`` reduces to the
label column plus the common columns. Accuracy is evaluated that way, without
materializing test rows.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .models import Dataset, Generator

__all__ = [
    "Rule",
    "GeneratorSpec",
    "LabeledExample",
    "make_rng",
    "draw_labels",
    "generate",
    "quantize",
    "draw_test_examples",
    "evaluate_accuracy",
    "COMMON_COLUMNS",
]

# 0-based column indices shared by every row
COMMON_COLUMNS = {
    Generator.WILSON_V1: (1, 2),
    Generator.NEW_CE: (1, 2, 3, 5),
}


class Rule(str, enum.Enum):
    QUANT = "quant"
    SIGN = "sign"


def make_rng(seed: int) -> np.random.Generator:
    """Portable seeded stream (PCG64); same seed, same numbers on every platform."""
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass(frozen=True)
class GeneratorSpec:
    version: Generator
    n: int
    p: float
    level: float
    d: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        version = Generator(self.version)
        if version is Generator.CUSTOM:
            raise ValueError("custom datasets have no generator")
        object.__setattr__(self, "version", version)
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"p must lie in (0, 1), got {self.p}")
        if not (np.isfinite(self.level) and self.level > 0):
            raise ValueError(f"level must be positive, got {self.level}")
        if self.d is not None and self.d < self.min_dim:
            raise ValueError(
                f"d = {self.d} is too small; the construction uses {self.min_dim} columns"
            )

    @property
    def min_dim(self) -> int:
        # last unique column of a negative row n (1-based)
        return 5 * self.n + (3 if self.version is Generator.WILSON_V1 else 2)

    @property
    def dim(self) -> int:
        if self.d is not None:
            return self.d
        return max(6 * self.n, self.min_dim)


@dataclass(frozen=True)
class LabeledExample:
    label: float
    overlap_features: tuple

    def __post_init__(self):
        if self.label == 0 or not np.isfinite(self.label):
            raise ValueError("label must be +level or -level")


def draw_labels(rng: np.random.Generator, count: int, p: float, level: float) -> np.ndarray:
    return np.where(rng.random(count) < p, level, -level)


def _fill_row(X, i, label, version):
    row = X[i]
    row[0] = label
    row[list(COMMON_COLUMNS[version])] = 1.0
    base = 5 * i
    if version is Generator.WILSON_V1:
        if label > 0:
            row[base + 3] = 1.0
        else:
            row[base + 3 : base + 8] = 1.0
    else:
        row[base + (4 if label > 0 else 6)] = 1.0


def generate(spec: GeneratorSpec) -> Dataset:
    y = draw_labels(make_rng(spec.seed), spec.n, spec.p, spec.level)
    X = np.zeros((spec.n, spec.dim))
    for i, label in enumerate(y):
        _fill_row(X, i, label, spec.version)
    return Dataset(X=X, y=y, level=spec.level, generator=spec.version, seed=spec.seed)


def quantize(alpha: float, level: float) -> float:
    """Nearest point of ``{+level, -level}``; ties at zero go to ``+level``."""
    if not level > 0:
        raise ValueError(f"level must be positive, got {level}")
    if not np.isfinite(alpha):
        raise ValueError(f"cannot quantize non-finite value {alpha}")
    return level if alpha >= 0 else -level


def draw_test_examples(spec: GeneratorSpec, Q: int, seed: int) -> list[LabeledExample]:
    """Fresh examples as (label, values on label and common columns)."""
    labels = draw_labels(make_rng(seed), Q, spec.p, spec.level)
    ones = (1.0,) * len(COMMON_COLUMNS[spec.version])
    return [LabeledExample(float(t), (float(t),) + ones) for t in labels]


def evaluate_accuracy(w, spec: GeneratorSpec, Q: int, rule: Rule = Rule.QUANT, seed: int = 0) -> float:
    """Percentage of ``Q`` fresh examples classified correctly by ``w``.

    ``quant`` picks the nearest of ``+-level`` (zero goes to ``+level``);
    ``sign`` uses ``sign(x^T w)`` and counts a zero score as wrong.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (spec.dim,):
        raise ValueError(f"model has shape {w.shape}, generator dimension is {spec.dim}")
    if Q < 1:
        raise ValueError("need at least one test example")
    labels = draw_labels(make_rng(seed), Q, spec.p, spec.level)
    score = w[0] * labels + w[list(COMMON_COLUMNS[spec.version])].sum()
    if Rule(rule) is Rule.QUANT:
        pred = np.where(score >= 0, spec.level, -spec.level)
    else:
        pred = np.sign(score) * spec.level
    return 100.0 * np.count_nonzero(pred == labels) / Q
