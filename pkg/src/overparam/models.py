"""Least-squares problem definitions and the ``Dataset`` container."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .linalg import DimensionMismatchError, as_matrix, as_vector

__all__ = ["Generator", "Dataset", "Objective", "gradient", "loss"]


class Generator(str, enum.Enum):
    WILSON_V1 = "wilson-v1"
    NEW_CE = "new-ce"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Dataset:
    """Design matrix ``X`` (n x d), targets ``y`` and generator metadata.

    For generated datasets every label is ``+level`` or ``-level``.
    """

    X: np.ndarray
    y: np.ndarray
    level: float = 1.0
    generator: Generator = Generator.CUSTOM
    seed: int = 0

    def __post_init__(self):
        X = as_matrix(self.X, "X")
        y = as_vector(self.y, "y")
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatchError("Dataset", X.shape, y.shape)
        gen = Generator(self.generator)
        if not (np.isfinite(self.level) and self.level > 0):
            raise ValueError(f"level must be positive, got {self.level}")
        if gen is not Generator.CUSTOM and not np.all(np.abs(y) == self.level):
            raise ValueError("generated labels must lie in {+level, -level}")
        X = X.copy()
        y = y.copy()
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "generator", gen)
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def overparameterized(self) -> bool:
        return self.d > self.n

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "level": self.level,
            "generator": self.generator.value,
            "seed": self.seed,
            "X": self.X.ravel().tolist(),
            "y": self.y.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Dataset":
        n, d = int(doc["n"]), int(doc["d"])
        flat = np.asarray(doc["X"], dtype=np.float64)
        if flat.size != n * d:
            raise ValueError(f"X has {flat.size} entries, expected n*d = {n * d}")
        return cls(
            X=flat.reshape(n, d),
            y=np.asarray(doc["y"], dtype=np.float64),
            level=float(doc.get("level", 1.0)),
            generator=Generator(doc.get("generator", "custom")),
            seed=int(doc.get("seed", 0)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Dataset":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "Dataset":
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True)
class Objective:
    """``0.5 * ||X w - y||^2 + 0.5 * lam * ||w||^2``.

    The ridge term carries the factor one half so that its gradient is
    ``lam * w``.
    """

    dataset: Dataset
    lam: float = field(default=0.0)

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise ValueError(f"ridge weight must be finite and >= 0, got {self.lam}")

    @property
    def X(self) -> np.ndarray:
        return self.dataset.X

    @property
    def y(self) -> np.ndarray:
        return self.dataset.y


def _check_w(obj: Objective, w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (obj.dataset.d,):
        raise DimensionMismatchError("objective", obj.X.shape, w.shape)
    return w


def gradient(obj: Objective, w) -> np.ndarray:
    w = _check_w(obj, w)
    g = obj.X.T @ (obj.X @ w - obj.y)
    if obj.lam:
        g = g + obj.lam * w
    return g


def loss(obj: Objective, w) -> float:
    w = _check_w(obj, w)
    r = obj.X @ w - obj.y
    value = 0.5 * float(r @ r)
    if obj.lam:
        value += 0.5 * obj.lam * float(w @ w)
    return value
