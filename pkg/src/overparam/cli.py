"""Command-line front end: ``overparam {generate,run,verify,table}``.

Settings come from three layers, later ones winning: built-in defaults, an
optional JSON ``--config`` file, explicit flags. Nothing is written unless an
output path is given; without ``--out`` results go to stdout.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .counterexamples import GeneratorSpec, Rule, generate
from .experiments import PRESETS, ExperimentSpec, preset, run_experiment, verify_suite
from .models import Dataset, Generator, Objective
from .optimizers import DivergenceError, Kind, OptimizerSpec, final_model, run
from .solutions import least_squares_solution, min_norm_solution, ridge_solution

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

GENERATOR_DEFAULTS = {"version": "wilson-v1", "n": 10, "p": 0.875, "level": 1 / 32, "d": None, "seed": 0}
OPTIMIZER_DEFAULTS = {
    "kind": "GD",
    "eta": None,
    "K": 10_000,
    "J": 10,
    "epsilon": None,
    "beta1": 0.9,
    "beta2": 0.999,
    "rho": 0.9,
    "normalize_output": False,
}


class UsageError(Exception):
    pass


def _help(text, default):
    return f"{text} (default: {default})"


def _add_generator_flags(parser):
    d = GENERATOR_DEFAULTS
    g = parser.add_argument_group("generator")
    g.add_argument("--version", choices=[v.value for v in Generator if v is not Generator.CUSTOM],
                   help=_help("construction", d["version"]))
    g.add_argument("--n", type=int, help=_help("number of training rows", d["n"]))
    g.add_argument("--p", type=float, help=_help("probability of a positive label", d["p"]))
    g.add_argument("--level", type=float, help=_help("label magnitude", d["level"]))
    g.add_argument("--d", type=int, help=_help("dimension", "max(6n, minimum for the construction)"))
    g.add_argument("--seed", type=int, help=_help("generator seed", d["seed"]))


def _add_optimizer_flags(parser):
    d = OPTIMIZER_DEFAULTS
    g = parser.add_argument_group("optimizer")
    g.add_argument("--kind", choices=[k.value for k in Kind if k is not Kind.CONSTANT_D],
                   help=_help("algorithm", d["kind"]))
    g.add_argument("--eta", type=float, help=_help("step size", "1/lambda_max of the Gram matrix"))
    g.add_argument("--K", type=int, help=_help("iterations", d["K"]))
    g.add_argument("--J", type=int, help=_help("AdaGrad window length", d["J"]))
    g.add_argument("--epsilon", type=float, help=_help("preconditioner floor", "1e-8, 1e-7 for the variant"))
    g.add_argument("--beta1", type=float, help=_help("Adam first-moment decay", d["beta1"]))
    g.add_argument("--beta2", type=float, help=_help("Adam second-moment decay", d["beta2"]))
    g.add_argument("--rho", type=float, help=_help("RMSProp decay", d["rho"]))
    g.add_argument("--normalize-output", dest="normalize_output", action="store_true", default=None,
                   help=_help("unit-normalize the final iterate", d["normalize_output"]))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="overparam", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{generate,run,verify,table}")

    p = sub.add_parser("generate", help="draw a counterexample dataset and write it as JSON",
                       description="Draw a counterexample dataset and write it as JSON.")
    p.add_argument("--config", type=Path, help="JSON file with generator keys (default: none)")
    _add_generator_flags(p)
    p.add_argument("--out", type=Path, help="output JSON path (default: stdout)")

    p = sub.add_parser("run", help="train one optimizer and report distances to reference solutions",
                       description="Train one optimizer on a dataset. Prints a JSON summary with the "
                                   "distances of the final model to the minimum-norm or least-squares "
                                   "solution and to the ridge solution.")
    p.add_argument("--dataset", type=Path, help="dataset JSON; otherwise one is generated (default: none)")
    p.add_argument("--config", type=Path,
                   help="JSON file with optional 'generator' and 'optimizer' objects and 'lam' (default: none)")
    _add_generator_flags(p)
    _add_optimizer_flags(p)
    p.add_argument("--lam", type=float, help=_help("ridge weight of the training objective", 0.0))
    p.add_argument("--ridge-lam", dest="ridge_lam", type=float,
                   help=_help("ridge weight of the reference solution when --lam is 0", 1.0))
    p.add_argument("--out", type=Path, help="trajectory CSV path, '-' for stdout (default: not written)")

    p = sub.add_parser("verify", help="run the self-verification suite",
                       description="Run the self-verification suite; exit status 1 if any check fails.")
    p.add_argument("--seed", type=int, default=0, help=_help("seed of the random instances", 0))

    p = sub.add_parser("table", help="run a Monte-Carlo table and write the report CSV",
                       description="Run a Monte-Carlo table from a preset or a JSON experiment config.")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(PRESETS), help="built-in experiment (default: none, one of --preset/--config is required)")
    src.add_argument("--config", type=Path, help="JSON experiment config (default: none)")
    p.add_argument("--trials", type=int, help="trials per cell (default: from preset/config, 100)")
    p.add_argument("--test-count", dest="test_count", type=int,
                   help="test examples per trial (default: from preset/config, 10000)")
    p.add_argument("--seed", "--master-seed", dest="master_seed", type=int,
                   help="master seed (default: from preset/config, 0)")
    p.add_argument("--rule", choices=[r.value for r in Rule], help="decision rule (default: from preset/config)")
    p.add_argument("--K", type=int, help="override the iteration count of every optimizer (default: unchanged)")
    p.add_argument("--threads", type=int,
                   help="worker processes (default: $OVERPARAM_THREADS, else CPU count)")
    p.add_argument("--out", type=Path, help="report CSV path (default: stdout)")
    return parser


def _read_config(path: Optional[Path]) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return doc


def _merge(defaults: dict, config: dict, args: argparse.Namespace, what: str) -> dict:
    unknown = set(config) - set(defaults)
    if unknown:
        raise UsageError(f"unknown {what} keys in config: {sorted(unknown)}")
    merged = {**defaults, **config}
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _generator_spec(config: dict, args) -> GeneratorSpec:
    return GeneratorSpec(**_merge(GENERATOR_DEFAULTS, config, args, "generator"))


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None or str(out) == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        out.write_text(text)


def _cmd_generate(args) -> int:
    spec = _generator_spec(_read_config(args.config), args)
    _emit(generate(spec).to_json(), args.out)
    return EXIT_OK


def _distance(w, ref) -> float:
    return float(np.linalg.norm(w - ref.w))


def _cmd_run(args) -> int:
    config = _read_config(args.config)
    unknown = set(config) - {"generator", "optimizer", "lam", "ridge_lam"}
    if unknown:
        raise UsageError(f"unknown run config keys: {sorted(unknown)}")
    if args.dataset is not None:
        try:
            data = Dataset.load(args.dataset)
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read dataset {args.dataset}: {exc}") from None
    else:
        data = generate(_generator_spec(config.get("generator", {}), args))
    opt = OptimizerSpec(**_merge(OPTIMIZER_DEFAULTS, config.get("optimizer", {}), args, "optimizer"))
    lam = args.lam if args.lam is not None else float(config.get("lam", 0.0))
    ridge_lam = args.ridge_lam if args.ridge_lam is not None else float(config.get("ridge_lam", 1.0))
    obj = Objective(data, lam=lam)

    try:
        traj = run(obj, opt)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    w = final_model(traj, opt)
    if args.out is not None:
        _emit(traj.to_csv(), args.out)

    summary = {
        "optimizer": opt.label,
        "n": data.n,
        "d": data.d,
        "K": opt.K,
        "final_loss": float(traj.losses[-1]),
        "train_residual": float(np.linalg.norm(data.X @ w - data.y)),
    }
    if data.overparameterized:
        summary["dist_min_norm"] = _distance(w, min_norm_solution(data.X, data.y))
    else:
        summary["dist_least_squares"] = _distance(w, least_squares_solution(data.X, data.y))
    ridge = ridge_solution(data.X, data.y, lam if lam > 0 else ridge_lam)
    summary["dist_ridge"] = _distance(w, ridge)
    summary["ridge_lam"] = lam if lam > 0 else ridge_lam
    print(json.dumps(summary, indent=2), file=sys.stderr if args.out and str(args.out) == "-" else sys.stdout)
    return EXIT_OK


def _cmd_verify(args) -> int:
    report = verify_suite(args.seed)
    print(report)
    return EXIT_OK if report.passed else EXIT_FAILURE


def _cmd_table(args) -> int:
    if args.preset is not None:
        spec = preset(args.preset)
    else:
        try:
            spec = ExperimentSpec.from_dict(_read_config(args.config))
        except TypeError as exc:
            raise UsageError(f"bad experiment config: {exc}") from None
    overrides = {
        key: getattr(args, key)
        for key in ("trials", "test_count", "master_seed", "rule")
        if getattr(args, key) is not None
    }
    if args.K is not None:
        overrides["optimizers"] = tuple(
            OptimizerSpec.from_dict({**o.to_dict(), "K": args.K}) for o in spec.optimizers
        )
    if overrides:
        spec = ExperimentSpec.from_dict({**spec.to_dict(), **overrides})
    report = run_experiment(spec, threads=args.threads)
    _emit(report.to_csv(), args.out)
    return EXIT_OK


COMMANDS = {"generate": _cmd_generate, "run": _cmd_run, "verify": _cmd_verify, "table": _cmd_table}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValueError, TypeError) as exc:
        parser.print_usage(sys.stderr)
        print(f"overparam {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
