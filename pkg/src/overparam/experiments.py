"""Monte-Carlo comparison of optimizers on the structured counterexamples.

For every grid cell ``(n, level, p)`` and trial, one dataset is drawn and all
optimizers are trained on it. Per cell the report gives the mean test accuracy
and the medians (over trials) of the distance to the minimum-norm solution,
the same distance after unit-normalizing the model, and the relative training
residual ``||X w - y|| / ||y||``.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import closed_form as cf
from .counterexamples import GeneratorSpec, Rule, evaluate_accuracy, generate
from .linalg import top_eigenvalue
from .models import Dataset, Generator, Objective
from .optimizers import Kind, OptimizerSpec, default_step_size, preconditioner_ceiling, run, run_many
from .solutions import adagrad_variant_fixed_point, angular_distance, min_norm_solution, ridge_solution

__all__ = [
    "ExperimentSpec",
    "ReportRow",
    "ExperimentReport",
    "CSV_HEADER",
    "PRESETS",
    "preset",
    "trial_seeds",
    "run_experiment",
    "equalizer_specs",
    "replay_error",
    "Check",
    "VerifyReport",
    "verify_suite",
]

log = logging.getLogger(__name__)

CSV_HEADER = (
    "n",
    "level",
    "p",
    "optimizer",
    "accuracy_pct",
    "median_dist_mn",
    "median_dist_mn_normalized",
    "median_train_residual",
    "diverged_trials",
)
MAX_DIVERGED_FRACTION = 0.10


@dataclass(frozen=True)
class ExperimentSpec:
    version: Generator
    ns: tuple
    levels: tuple
    ps: tuple
    optimizers: tuple
    trials: int = 100
    test_count: int = 10_000
    master_seed: int = 0
    rule: Rule = Rule.QUANT
    report_normalized: bool = True

    def __post_init__(self):
        object.__setattr__(self, "version", Generator(self.version))
        object.__setattr__(self, "rule", Rule(self.rule))
        for name in ("ns", "levels", "ps"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        opts = tuple(
            o if isinstance(o, OptimizerSpec) else OptimizerSpec.from_dict(o)
            for o in self.optimizers
        )
        object.__setattr__(self, "optimizers", opts)
        if self.trials < 1 or self.test_count < 1:
            raise ValueError("trials and test_count must be >= 1")
        if not (self.ns and self.levels and self.ps and opts):
            raise ValueError("grid and optimizer list must be non-empty")

    @property
    def cells(self) -> list[tuple]:
        return list(itertools.product(self.ns, self.levels, self.ps))

    def to_dict(self) -> dict:
        return {
            "version": self.version.value,
            "ns": list(self.ns),
            "levels": list(self.levels),
            "ps": list(self.ps),
            "optimizers": [o.to_dict() for o in self.optimizers],
            "trials": self.trials,
            "test_count": self.test_count,
            "master_seed": self.master_seed,
            "rule": self.rule.value,
            "report_normalized": self.report_normalized,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown experiment keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentSpec":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ReportRow:
    n: int
    level: float
    p: float
    optimizer: str
    accuracy_pct: float
    median_dist_mn: float
    median_dist_mn_normalized: float
    median_train_residual: float
    diverged_trials: int

    @property
    def valid(self) -> bool:
        return not np.isnan(self.accuracy_pct)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


@dataclass
class ExperimentReport:
    rows: list = field(default_factory=list)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            writer.writerow([_fmt(getattr(row, col)) for col in CSV_HEADER])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, text: str) -> "ExperimentReport":
        reader = csv.DictReader(io.StringIO(text))
        rows = [
            ReportRow(
                n=int(r["n"]),
                level=float(r["level"]),
                p=float(r["p"]),
                optimizer=r["optimizer"],
                accuracy_pct=float(r["accuracy_pct"]),
                median_dist_mn=float(r["median_dist_mn"]),
                median_dist_mn_normalized=float(r["median_dist_mn_normalized"]),
                median_train_residual=float(r["median_train_residual"]),
                diverged_trials=int(r["diverged_trials"]),
            )
            for r in reader
        ]
        return cls(rows)

    def get(self, n, level, optimizer, p=None) -> ReportRow:
        for row in self.rows:
            if row.n == n and row.level == level and row.optimizer == optimizer:
                if p is None or row.p == p:
                    return row
        raise KeyError((n, level, optimizer, p))


def trial_seeds(master_seed: int, cell: int, trial: int) -> tuple[int, int]:
    """(training seed, test seed) for one trial, derived from the master seed."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(cell, trial))
    train, test = ss.generate_state(2, np.uint64)
    return int(train), int(test)


def _run_cell(spec: ExperimentSpec, cell_index: int) -> list[ReportRow]:
    n, level, p = spec.cells[cell_index]
    gens, objs, mins, test_seeds = [], [], [], []
    for t in range(spec.trials):
        train_seed, test_seed = trial_seeds(spec.master_seed, cell_index, t)
        g = GeneratorSpec(spec.version, n, p, level, seed=train_seed)
        data = generate(g)
        gens.append(g)
        objs.append(Objective(data))
        mins.append(min_norm_solution(data.X, data.y).w)
        test_seeds.append(test_seed)

    rows = []
    for opt in spec.optimizers:
        ws = run_many(objs, opt)
        acc, dist, ndist, resid = [], [], [], []
        diverged = 0
        for g, obj, w_mn, seed, w in zip(gens, objs, mins, test_seeds, ws):
            if not np.all(np.isfinite(w)):
                diverged += 1
                continue
            acc.append(evaluate_accuracy(w, g, spec.test_count, spec.rule, seed))
            dist.append(np.linalg.norm(w - w_mn))
            norm = np.linalg.norm(w)
            ndist.append(np.linalg.norm(w / norm - w_mn) if norm > 0 else np.nan)
            resid.append(np.linalg.norm(obj.X @ w - obj.y) / np.linalg.norm(obj.y))
        if diverged > MAX_DIVERGED_FRACTION * spec.trials:
            log.warning("n=%d level=%g p=%g %s: %d diverged trials, row invalid",
                        n, level, p, opt.label, diverged)
            stats = (np.nan,) * 4
        else:
            stats = (
                float(np.mean(acc)),
                float(np.median(dist)),
                float(np.median(ndist)) if spec.report_normalized else np.nan,
                float(np.median(resid)),
            )
        rows.append(ReportRow(n, level, p, opt.label, *stats, diverged))
    log.info("cell n=%d level=%g p=%g done", n, level, p)
    return rows


def _thread_count(threads: Optional[int]) -> int:
    if threads is None:
        env = os.environ.get("OVERPARAM_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def run_experiment(spec: ExperimentSpec, threads: Optional[int] = None) -> ExperimentReport:
    """Run every optimizer on ``spec.trials`` datasets per grid cell.

    Cells may be processed in parallel (``threads`` or ``OVERPARAM_THREADS``);
    rows are always assembled in grid order, so the report does not depend on
    scheduling.
    """
    cells = range(len(spec.cells))
    workers = min(_thread_count(threads), len(cells))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_cell, [spec] * len(cells), cells))
    else:
        chunks = [_run_cell(spec, c) for c in cells]
    return ExperimentReport([row for chunk in chunks for row in chunk])


# --------------------------------------------------------------------------
# presets


def _table_optimizers(with_rmsprop: bool, K: int = 10_000) -> tuple:
    opts = [
        OptimizerSpec(Kind.GD, K=K),
        OptimizerSpec(Kind.ADAGRAD_VARIANT, K=K, J=10),
    ]
    if with_rmsprop:
        opts.append(OptimizerSpec(Kind.RMSPROP, K=K))
    opts.append(OptimizerSpec(Kind.ADAM, K=K))
    return tuple(opts)


_WILSON_GRID = dict(ns=(10, 50, 100), levels=(1 / 32, 1 / 16, 1 / 8))

PRESETS = {
    "table1": ExperimentSpec(
        Generator.WILSON_V1, ps=(7 / 8,), optimizers=_table_optimizers(False), **_WILSON_GRID
    ),
    "table6a": ExperimentSpec(
        Generator.WILSON_V1, ps=(3 / 8,), optimizers=_table_optimizers(True), **_WILSON_GRID
    ),
    "table6b": ExperimentSpec(
        Generator.WILSON_V1, ps=(5 / 8,), optimizers=_table_optimizers(True), **_WILSON_GRID
    ),
    "table6c": ExperimentSpec(
        Generator.NEW_CE,
        ns=(50,),
        levels=(0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0),
        ps=(3 / 8, 1 / 2, 5 / 8),
        optimizers=_table_optimizers(True),
        trials=10,
        test_count=100,
        rule=Rule.SIGN,
    ),
}


def preset(name: str, **overrides) -> ExperimentSpec:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(base, **overrides) if overrides else base


# --------------------------------------------------------------------------
# self-verification


def equalizer_specs(obj: Objective, K: int = 20_000) -> list[OptimizerSpec]:
    """Hyperparameters under which every method provably contracts on a ridge problem.

    Each adaptive step size is scaled by the largest value its preconditioner
    can take, so ``eta * lambda_max(H D_k) <= 1`` for all ``k``.
    """
    X, y = obj.X, obj.y
    L = top_eigenvalue(X.T @ X + obj.lam * np.eye(X.shape[1]), tol=1e-10)
    eps = 1e-2
    # variant: eps dominating the window sum keeps D_k within ~20% of 1/eps^2
    J = 10
    eps_v = 10.0 * (J + 1) * float(np.max((X.T @ y) ** 2))
    return [
        OptimizerSpec(Kind.GD, eta=1.0 / L, K=K),
        OptimizerSpec(Kind.ADAGRAD, eta=np.sqrt(eps) / L, K=K, J=J, epsilon=eps),
        OptimizerSpec(Kind.ADAGRAD_VARIANT, eta=eps_v**2 / L, K=K, J=J, epsilon=eps_v),
        OptimizerSpec(Kind.RMSPROP, eta=np.sqrt(eps) / L, K=K, epsilon=eps),
        OptimizerSpec(Kind.ADAM, eta=eps / L, K=K, epsilon=eps),
    ]


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    max_error: float
    tolerance: float

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<34} max_err={self.max_error:.3e}  tol={self.tolerance:.1e}"


@dataclass(frozen=True)
class VerifyReport:
    seed: int
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def max_error(self) -> float:
        return max(c.max_error for c in self.checks)

    def __str__(self):
        lines = [str(c) for c in self.checks]
        lines.append(f"{'ALL PASS' if self.passed else 'FAILURES'} (seed={self.seed})")
        return "\n".join(lines)


def _rel(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        return np.inf
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def _instance(rng, n, d, lam=0.0) -> Objective:
    X = rng.standard_normal((n, d))
    y = rng.standard_normal(n)
    return Objective(Dataset(X, y), lam)


def _preconditioned_kinds(d: int, rng) -> list[OptimizerSpec]:
    # floors large enough that every D_k stays within a factor ~100 of 1
    return [
        OptimizerSpec(Kind.GD),
        OptimizerSpec(Kind.ADAGRAD, J=3, epsilon=1e-2),
        OptimizerSpec(Kind.ADAGRAD_VARIANT, J=3, epsilon=1.0),
        OptimizerSpec(Kind.RMSPROP, epsilon=1e-2),
        OptimizerSpec(Kind.ADAM, beta1=0.0, epsilon=1e-2, name="Adam(beta1=0)"),
        OptimizerSpec(Kind.CONSTANT_D, D=rng.uniform(0.5, 2.0, d)),
    ]


def replay_error(obj: Objective, spec: OptimizerSpec, K: int) -> float:
    """Relative gap between an iterative run and its closed form.

    The run uses ``eta = 0.5 / (ceiling * lambda_max)`` so that every factor of
    the unrolled product is a contraction, then the recorded preconditioners
    are fed to the matching closed form. Over-parameterized problems without a
    ridge term compare training predictions, everything else compares weights.
    """
    eta = 0.5 * default_step_size(obj) / preconditioner_ceiling(spec)
    traj = run(obj, replace(spec, eta=eta, K=K))
    X, y, lam = obj.X, obj.y, obj.lam
    w_K = traj.iterates[-1]
    D = traj.preconditioners
    if lam:
        ref, got = cf.closed_form_ridge(X, y, eta, D, K, lam), w_K
    elif obj.dataset.overparameterized and spec.kind is Kind.GD:
        ref, got = cf.closed_form_gd_over(X, y, eta, K), w_K
    elif obj.dataset.overparameterized and spec.kind is Kind.CONSTANT_D:
        ref, got = cf.closed_form_constant_d_over(X, y, eta, spec.D, K), w_K
    elif obj.dataset.overparameterized:
        ref, got = cf.closed_form_prediction_over(X, y, eta, D, K), X @ w_K
    elif spec.kind is Kind.GD:
        ref, got = cf.closed_form_gd_under(X, y, eta, K), w_K
    else:
        ref, got = cf.closed_form_precond_under(X, y, eta, D, K), w_K
    scale = np.linalg.norm(ref)
    return float(np.linalg.norm(got - ref) / scale) if scale > 0 else float(np.linalg.norm(got))


def verify_suite(seed: int = 0) -> VerifyReport:
    """Cross-check optimizers, closed forms and reference solutions on random data.

    Each check reports the largest error it saw; failures are report entries,
    never exceptions.
    """
    rng = np.random.default_rng(seed)
    checks = []

    def add(name, errors, tol):
        errors = [float(e) for e in errors]
        worst = max(errors) if errors else 0.0
        checks.append(Check(name, bool(np.isfinite(worst) and worst <= tol), worst, tol))

    def guarded(fn):
        try:
            return fn()
        except Exception as exc:  # noqa: BLE001 - any failure is a failed check
            log.warning("verify check raised: %s", exc)
            return np.inf

    # plain GD against its closed forms
    errs = []
    for _ in range(3):
        obj = _instance(rng, 8, 3)
        eta = 0.9 / top_eigenvalue(obj.X.T @ obj.X)
        traj = run(obj, OptimizerSpec(Kind.GD, eta=eta, K=50))
        errs.append(guarded(lambda: _rel(cf.closed_form_gd_under(obj.X, obj.y, eta, 50),
                                          traj.iterates[-1])))
    add("gd_under_closed_form", errs, 1e-8)

    errs = []
    for _ in range(3):
        obj = _instance(rng, 3, 8)
        eta = 0.9 / top_eigenvalue(obj.X @ obj.X.T)
        traj = run(obj, OptimizerSpec(Kind.GD, eta=eta, K=37))
        errs.append(guarded(lambda: _rel(cf.closed_form_gd_over(obj.X, obj.y, eta, 37),
                                          traj.iterates[-1])))
    add("gd_over_closed_form", errs, 1e-8)

    # preconditioned families, replaying recorded D_k
    for regime, (n, d, lam) in {
        "under": (9, 4, 0.0),
        "over": (4, 9, 0.0),
        "ridge": (4, 9, 0.5),
    }.items():
        errs = []
        for _ in range(2):
            obj = _instance(rng, n, d, lam)
            for spec in _preconditioned_kinds(d, rng):
                errs.append(guarded(lambda: replay_error(obj, spec, 30)))
        add(f"preconditioned_{regime}_closed_form", errs, 1e-8)

    # constant D, over-parameterized: finite-K form and limit
    errs, lim_errs = [], []
    for _ in range(2):
        obj = _instance(rng, 3, 7)
        D = rng.uniform(0.5, 2.0, 7)
        eta = 0.9 / top_eigenvalue((obj.X * D) @ obj.X.T)
        w = run(obj, OptimizerSpec(Kind.CONSTANT_D, eta=eta, K=40, D=D)).iterates[-1]
        errs.append(guarded(lambda: _rel(cf.closed_form_constant_d_over(obj.X, obj.y, eta, D, 40), w)))
        w_long = run(obj, OptimizerSpec(Kind.CONSTANT_D, eta=eta, K=20_000, D=D)).iterates[-1]
        lim_errs.append(guarded(lambda: _rel(w_long, cf.constant_D_limit_over(obj.X, obj.y, D))))
    add("constant_d_over_closed_form", errs, 1e-8)
    add("constant_d_limit", lim_errs, 1e-7)

    # binomial expansion of small-K GD
    errs = []
    for K in range(1, 7):
        obj = _instance(rng, 7, 3)
        eta = 0.5 / top_eigenvalue(obj.X.T @ obj.X)
        errs.append(guarded(lambda: _rel(cf.binomial_unroll_under(obj.X, obj.y, eta, K),
                                          cf.closed_form_gd_under(obj.X, obj.y, eta, K))))
    add("binomial_unroll_identity", errs, 1e-10)

    # minimum norm solution: row-space membership, GD limit
    errs, lim_errs = [], []
    for _ in range(3):
        obj = _instance(rng, 3, 8)
        X = obj.X
        w_mn = guarded(lambda: min_norm_solution(X, obj.y).w)
        if np.ndim(w_mn) == 0:
            errs.append(np.inf)
            continue
        off = w_mn - X.T @ np.linalg.lstsq(X.T, w_mn, rcond=None)[0]
        errs.append(np.linalg.norm(off) / np.linalg.norm(w_mn))
        eta = 1.0 / top_eigenvalue(X @ X.T)
        w = run(obj, OptimizerSpec(Kind.GD, eta=eta, K=20_000)).iterates[-1]
        lim_errs.append(_rel(w, w_mn))
    add("min_norm_row_space", errs, 1e-9)
    add("gd_limit_is_min_norm", lim_errs, 1e-6)

    # ridge: every method reaches the same solution
    errs = []
    for lam in (0.1, 1.0):
        obj = _instance(rng, 4, 8, lam)
        w_r = ridge_solution(obj.X, obj.y, lam).w
        for spec in equalizer_specs(obj, K=20_000):
            errs.append(guarded(lambda: _rel(run(obj, spec).iterates[-1], w_r)))
    add("ridge_equalizer", errs, 1e-6)

    # AdaGrad variant stays on the fixed-point ray
    errs = []
    for n in (3, 7):
        y = rng.choice([-1.0, 1.0], size=n)
        errs.append(guarded(lambda: _fixed_point_angle(np.eye(n), y)))
    errs.append(guarded(lambda: _fixed_point_angle(np.diag([4.0, 1.0]), np.array([1.0, 2.0]))))
    na = adagrad_variant_fixed_point(np.eye(2), np.array([1.0, 2.0]))
    errs.append(0.0 if not na else np.inf)
    add("adagrad_variant_fixed_point", errs, 1e-6)

    return VerifyReport(seed, tuple(checks))


def _fixed_point_angle(X, y, K: int = 200) -> float:
    ref = adagrad_variant_fixed_point(X, y)
    if not ref:
        return np.inf
    obj = Objective(Dataset(X, y))
    traj = run(obj, OptimizerSpec(Kind.ADAGRAD_VARIANT, K=K, epsilon=1e-12))
    return max(angular_distance(w, ref.w) for w in traj.iterates[1:])
