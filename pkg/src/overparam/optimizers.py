"""Deterministic full-batch optimizers for least squares.

Every method runs the recursion ``w_{k+1} = w_k - eta * D_k grad f(w_k)`` from
``w_0 = 0`` for a fixed number of iterations, where ``D_k`` is a positive
diagonal preconditioner built from the gradient history:

* ``GD``: identity.
* ``AdaGrad``: ``1 / sqrt(S_k + eps)`` with ``S_k`` the sum of squared
  gradients over the window ``j = max(0, k - J) .. k``.
* ``AdaGradVariant``: ``1 / (S_k + eps)**2`` over the same window.
* ``RMSProp``: ``1 / sqrt(v_k + eps)`` with an exponential average ``v_k``.
* ``Adam``: bias-corrected first and second moments. With ``beta1 > 0`` this
  is a momentum method and no ``D_k`` is recorded.
* ``ConstantD``: a fixed user-supplied diagonal.
"""
from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .linalg import as_vector, top_eigenvalue
from .models import Objective

__all__ = [
    "Kind",
    "OptimizerSpec",
    "Trajectory",
    "DivergenceError",
    "run",
    "run_many",
    "default_step_size",
    "stable_step_bound",
    "preconditioner_ceiling",
    "final_model",
]


class Kind(str, enum.Enum):
    GD = "GD"
    ADAGRAD = "AdaGrad"
    ADAGRAD_VARIANT = "AdaGradVariant"
    RMSPROP = "RMSProp"
    ADAM = "Adam"
    CONSTANT_D = "ConstantD"


DEFAULT_EPSILON = {
    Kind.GD: 1e-8,
    Kind.ADAGRAD: 1e-8,
    Kind.ADAGRAD_VARIANT: 1e-7,  # squared denominator amplifies small sums
    Kind.RMSPROP: 1e-8,
    Kind.ADAM: 1e-8,
    Kind.CONSTANT_D: 1e-8,
}


class DivergenceError(FloatingPointError):
    def __init__(self, iteration: int, norm: float):
        super().__init__(f"iterate became non-finite at iteration {iteration} (||w|| = {norm})")
        self.iteration = iteration
        self.norm = norm


@dataclass(frozen=True)
class OptimizerSpec:
    """Algorithm choice plus hyperparameters.

    ``eta=None`` means "use :func:`default_step_size` of the objective".
    ``epsilon=None`` picks the per-kind default from ``DEFAULT_EPSILON``.
    """

    kind: Kind
    eta: Optional[float] = None
    K: int = 10_000
    J: int = 10
    epsilon: Optional[float] = None
    beta1: float = 0.9
    beta2: float = 0.999
    rho: float = 0.9
    D: Optional[np.ndarray] = None
    normalize_output: bool = False
    name: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", DEFAULT_EPSILON[kind])
        if self.eta is not None and not (np.isfinite(self.eta) and self.eta > 0):
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if int(self.K) != self.K or self.K < 0:
            raise ValueError(f"K must be a non-negative integer, got {self.K}")
        object.__setattr__(self, "K", int(self.K))
        if kind in (Kind.ADAGRAD, Kind.ADAGRAD_VARIANT) and self.J < 1:
            raise ValueError("window length J must be >= 1")
        for label in ("beta1", "beta2", "rho"):
            if not 0.0 <= getattr(self, label) < 1.0:
                raise ValueError(f"{label} must lie in [0, 1)")
        if kind is Kind.CONSTANT_D:
            if self.D is None:
                raise ValueError("ConstantD requires a diagonal D")
            D = as_vector(self.D, "D").copy()
            if np.any(D <= 0):
                raise ValueError("D must be strictly positive")
            D.flags.writeable = False
            object.__setattr__(self, "D", D)
        elif self.D is not None:
            raise ValueError(f"D is only meaningful for ConstantD, not {kind.value}")

    # the array field rules out the generated __eq__/__hash__
    def __eq__(self, other):
        if not isinstance(other, OptimizerSpec):
            return NotImplemented
        a, b = self.to_dict(), other.to_dict()
        a.pop("name", None), b.pop("name", None)
        return a == b

    __hash__ = None

    @property
    def label(self) -> str:
        return self.name or self.kind.value

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["kind"] = self.kind.value
        doc["D"] = None if self.D is None else self.D.tolist()
        if doc["name"] is None:
            del doc["name"]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "OptimizerSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown optimizer keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_json(cls, text: str) -> "OptimizerSpec":
        return cls.from_dict(json.loads(text))


@dataclass
class Trajectory:
    """Iterates ``w_0 .. w_K`` with their losses and gradient norms.

    ``preconditioners[k]`` is the diagonal of ``D_k`` used to go from
    ``w_k`` to ``w_{k+1}``; ``None`` for momentum methods.
    """

    iterates: np.ndarray
    losses: np.ndarray
    grad_norms: np.ndarray
    preconditioners: Optional[np.ndarray] = None

    @property
    def K(self) -> int:
        return len(self.iterates) - 1

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iteration", "loss", "grad_norm"])
        for k, (f, g) in enumerate(zip(self.losses, self.grad_norms)):
            writer.writerow([k, format(float(f), ".17g"), format(float(g), ".17g")])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


# --------------------------------------------------------------------------
# preconditioners


class _Identity:
    records = True

    def __call__(self, g, k):
        return g, None


class _Constant:
    records = True

    def __init__(self, D):
        self.D = D

    def __call__(self, g, k):
        return self.D * g, self.D


class _Window:
    """Windowed sum of squared gradients; ``squared`` selects the variant."""

    records = True

    def __init__(self, dim, J, eps, squared):
        self.buf = np.zeros((J + 1, dim))
        self.eps = eps
        self.squared = squared

    def __call__(self, g, k):
        np.multiply(g, g, out=self.buf[k % len(self.buf)])
        t = self.buf.sum(axis=0)
        t += self.eps
        if self.squared:
            t *= t
            D = np.reciprocal(t, out=t)
        else:
            D = np.reciprocal(np.sqrt(t, out=t), out=t)
        return D * g, D


class _RMSProp:
    records = True

    def __init__(self, dim, rho, eps):
        self.v = np.zeros(dim)
        self.rho = rho
        self.eps = eps

    def __call__(self, g, k):
        self.v *= self.rho
        self.v += (1.0 - self.rho) * (g * g)
        D = 1.0 / np.sqrt(self.v + self.eps)
        return D * g, D


class _Adam:
    def __init__(self, dim, beta1, beta2, eps):
        self.m = np.zeros(dim)
        self.v = np.zeros(dim)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.records = beta1 == 0.0

    def __call__(self, g, k):
        b1, b2 = self.beta1, self.beta2
        self.m *= b1
        self.m += (1.0 - b1) * g
        self.v *= b2
        self.v += (1.0 - b2) * (g * g)
        m_hat = self.m / (1.0 - b1 ** (k + 1))
        v_hat = self.v / (1.0 - b2 ** (k + 1))
        D = 1.0 / (np.sqrt(v_hat) + self.eps)
        return D * m_hat, D


def _preconditioner(spec: OptimizerSpec, dim: int, D_full=None):
    kind = spec.kind
    if kind is Kind.GD:
        return _Identity()
    if kind is Kind.CONSTANT_D:
        return _Constant(spec.D if D_full is None else D_full)
    if kind is Kind.ADAGRAD:
        return _Window(dim, spec.J, spec.epsilon, squared=False)
    if kind is Kind.ADAGRAD_VARIANT:
        return _Window(dim, spec.J, spec.epsilon, squared=True)
    if kind is Kind.RMSPROP:
        return _RMSProp(dim, spec.rho, spec.epsilon)
    return _Adam(dim, spec.beta1, spec.beta2, spec.epsilon)


def _iterate(X, y, lam, eta, spec, *, D_full=None, record=False, strict=True):
    """Core loop shared by :func:`run` and :func:`run_many`.

    ``X`` may be dense or sparse; ``eta`` a scalar or a per-coordinate array.
    """
    dim = X.shape[1]
    XT = X.T.tocsr() if sp.issparse(X) else X.T
    K = spec.K
    pre = _preconditioner(spec, dim, D_full)
    w = np.zeros(dim)

    if record:
        iterates = np.empty((K + 1, dim))
        losses = np.empty(K + 1)
        grad_norms = np.empty(K + 1)
        precs = np.empty((K, dim)) if pre.records else None

    for k in range(K + 1):
        r = X @ w - y
        g = XT @ r
        if lam:
            g += lam * w
        if record:
            iterates[k] = w
            f = 0.5 * float(r @ r)
            if lam:
                f += 0.5 * lam * float(w @ w)
            losses[k] = f
            grad_norms[k] = np.linalg.norm(g)
        if k == K:
            break
        direction, D = pre(g, k)
        if record and precs is not None:
            precs[k] = 1.0 if D is None else D
        w = w - eta * direction
        if strict and not np.all(np.isfinite(w)):
            raise DivergenceError(k + 1, float(np.linalg.norm(w)))

    if record:
        return Trajectory(iterates, losses, grad_norms, precs)
    return w


def run(obj: Objective, spec: OptimizerSpec) -> Trajectory:
    """Run ``spec`` on ``obj`` from ``w_0 = 0`` and record the full trajectory."""
    eta = default_step_size(obj) if spec.eta is None else spec.eta
    if spec.kind is Kind.CONSTANT_D and spec.D.shape != (obj.dataset.d,):
        raise ValueError(f"D has length {spec.D.shape[0]}, expected {obj.dataset.d}")
    with np.errstate(over="ignore", invalid="ignore"):
        return _iterate(obj.X, obj.y, obj.lam, eta, spec, record=True)


def run_many(objectives: Sequence[Objective], spec: OptimizerSpec) -> list[np.ndarray]:
    """Final iterates of ``spec`` on several independent problems.

    The problems are stacked into one block-diagonal sparse system; since every
    preconditioner acts coordinate-wise this is the same as running them one at
    a time. Diverged runs come back with non-finite entries instead of raising.
    """
    if not objectives:
        return []
    lams = {o.lam for o in objectives}
    if len(lams) != 1:
        raise ValueError("run_many needs a common ridge weight")
    dims = [o.dataset.d for o in objectives]
    X = sp.block_diag([sp.csr_matrix(o.X) for o in objectives], format="csr")
    y = np.concatenate([o.y for o in objectives])
    etas = [default_step_size(o) if spec.eta is None else spec.eta for o in objectives]
    eta = np.repeat(etas, dims)
    D_full = None
    if spec.kind is Kind.CONSTANT_D:
        if any(dim != len(spec.D) for dim in dims):
            raise ValueError("ConstantD diagonal does not match every problem")
        D_full = np.tile(spec.D, len(objectives))
    with np.errstate(over="ignore", invalid="ignore"):
        w = _iterate(X, y, lams.pop(), eta, spec, D_full=D_full, strict=False)
    return np.split(w, np.cumsum(dims)[:-1])


def default_step_size(obj: Objective) -> float:
    """``1 / lambda_max(X^T X + lam I)``, using whichever Gram matrix is smaller."""
    X = obj.X
    if not np.any(X):
        raise ValueError("default step size undefined for an all-zero design matrix")
    gram = X @ X.T if X.shape[0] < X.shape[1] else X.T @ X
    return 1.0 / (top_eigenvalue(gram, tol=1e-8) + obj.lam)


def stable_step_bound(obj: Objective, preconditioners) -> float:
    """``min_i 1 / lambda_max((X^T X + lam I) D_i)`` over a sequence of diagonals.

    Taking the minimum over ``i`` makes every factor ``I - eta H D_i`` a
    contraction (in the ``D_i``-weighted sense) for ``eta`` below the bound.
    """
    X = obj.X
    bound = np.inf
    for D in np.atleast_2d(preconditioners):
        s = np.sqrt(D)
        if X.shape[0] < X.shape[1] and not obj.lam:
            M = (X * s) @ (X * s).T
        else:
            M = (X * s).T @ (X * s) + obj.lam * np.diag(D)
        bound = min(bound, 1.0 / top_eigenvalue(M, tol=1e-8))
    return bound


def preconditioner_ceiling(spec: OptimizerSpec) -> float:
    """Largest entry any ``D_k`` of ``spec`` can reach.

    ``eta <= 1 / (ceiling * lambda_max(H))`` therefore keeps every factor
    ``I - eta H D_k`` a contraction, whatever the gradients do.
    """
    eps = spec.epsilon
    return {
        Kind.GD: lambda: 1.0,
        Kind.CONSTANT_D: lambda: float(np.max(spec.D)),
        Kind.ADAGRAD: lambda: 1.0 / np.sqrt(eps),
        Kind.ADAGRAD_VARIANT: lambda: 1.0 / eps**2,
        Kind.RMSPROP: lambda: 1.0 / np.sqrt(eps),
        Kind.ADAM: lambda: 1.0 / eps,
    }[spec.kind]()


def final_model(traj: Trajectory, spec: OptimizerSpec) -> np.ndarray:
    if len(traj.iterates) == 0:
        raise ValueError("empty trajectory")
    w = np.array(traj.iterates[-1])
    if spec.normalize_output:
        norm = np.linalg.norm(w)
        if norm == 0.0:
            raise ValueError("cannot normalize a zero final iterate")
        w = w / norm
    return w
