import numpy as np
import pytest

from overparam import closed_form as cf
from overparam.counterexamples import Rule
from overparam.experiments import (
    CSV_HEADER,
    PRESETS,
    ExperimentReport,
    ExperimentSpec,
    equalizer_specs,
    preset,
    run_experiment,
    trial_seeds,
    verify_suite,
)
from overparam.models import Dataset, Objective
from overparam.linalg import top_eigenvalue
from overparam.optimizers import Kind, OptimizerSpec, preconditioner_ceiling


def _small_spec(**kw):
    base = dict(
        version="wilson-v1",
        ns=(5, 8),
        levels=(1 / 16,),
        ps=(7 / 8,),
        optimizers=(OptimizerSpec(Kind.GD, K=300), OptimizerSpec(Kind.ADAGRAD_VARIANT, K=300)),
        trials=4,
        test_count=200,
        master_seed=3,
    )
    base.update(kw)
    return ExperimentSpec(**base)


@pytest.fixture(scope="module")
def suite42():
    return verify_suite(42)


def test_verify_suite_passes(suite42):
    assert suite42.passed, str(suite42)
    assert suite42.max_error <= 1e-8
    assert len(suite42.checks) >= 10


def test_verify_suite_is_deterministic(suite42):
    again = verify_suite(42)
    assert str(again) == str(suite42)
    assert [c.max_error for c in again.checks] == [c.max_error for c in suite42.checks]


def test_verify_suite_catches_tampered_closed_form(monkeypatch):
    original = cf.closed_form_gd_under
    monkeypatch.setattr(cf, "closed_form_gd_under", lambda X, y, eta, K: -original(X, y, eta, K))
    report = verify_suite(1)
    assert not report.passed
    failed = {c.name for c in report.checks if not c.passed}
    assert "gd_under_closed_form" in failed


def test_single_trial_gd_reaches_min_norm():
    spec = _small_spec(ns=(10,), optimizers=(OptimizerSpec(Kind.GD),), trials=1)
    row = run_experiment(spec, threads=1).rows[0]
    assert row.median_dist_mn <= 1e-6
    assert row.diverged_trials == 0


def test_report_shape_and_ranges():
    report = run_experiment(_small_spec(), threads=1)
    assert len(report.rows) == 2 * 1 * 1 * 2
    assert [r.optimizer for r in report.rows] == ["GD", "AdaGradVariant"] * 2
    for r in report.rows:
        assert 0.0 <= r.accuracy_pct <= 100.0
        assert r.median_dist_mn >= 0 and r.median_dist_mn_normalized >= 0
        assert r.valid


def test_csv_round_trip_and_header():
    report = run_experiment(_small_spec(), threads=1)
    text = report.to_csv()
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    back = ExperimentReport.from_csv(text)
    assert back.to_csv() == text
    assert back.rows == report.rows


def test_same_seed_same_bytes_and_thread_independence():
    spec = _small_spec()
    a = run_experiment(spec, threads=1).to_csv()
    b = run_experiment(spec, threads=1).to_csv()
    c = run_experiment(spec, threads=2).to_csv()
    assert a == b == c
    other = run_experiment(_small_spec(master_seed=4), threads=1).to_csv()
    assert other != a


def test_divergent_optimizer_invalidates_row():
    spec = _small_spec(optimizers=(OptimizerSpec(Kind.GD, eta=50.0, K=2000),), ns=(5,))
    row = run_experiment(spec, threads=1).rows[0]
    assert row.diverged_trials == spec.trials
    assert not row.valid
    assert "nan" in run_experiment(spec, threads=1).to_csv()


def test_trial_seeds():
    assert trial_seeds(7, 0, 0) == trial_seeds(7, 0, 0)
    seeds = {trial_seeds(7, c, t) for c in range(5) for t in range(50)}
    assert len(seeds) == 250
    assert trial_seeds(7, 0, 0) != trial_seeds(8, 0, 0)


def test_spec_validation_and_json():
    with pytest.raises(ValueError):
        _small_spec(trials=0)
    with pytest.raises(ValueError):
        _small_spec(test_count=0)
    with pytest.raises(ValueError):
        _small_spec(ns=())
    with pytest.raises(ValueError):
        ExperimentSpec.from_dict({**_small_spec().to_dict(), "iterations": 5})
    spec = _small_spec(rule="sign")
    back = ExperimentSpec.from_json(__import__("json").dumps(spec.to_dict()))
    assert back == spec and back.rule is Rule.SIGN


def test_presets_match_published_grids():
    t1 = PRESETS["table1"]
    assert t1.ps == (7 / 8,) and t1.ns == (10, 50, 100) and t1.levels == (1 / 32, 1 / 16, 1 / 8)
    assert [o.label for o in t1.optimizers] == ["GD", "AdaGradVariant", "Adam"]
    assert t1.optimizers[1].J == 10 and t1.trials == 100 and t1.test_count == 10_000
    assert PRESETS["table6a"].ps == (3 / 8,) and PRESETS["table6b"].ps == (5 / 8,)
    assert "RMSProp" in [o.label for o in PRESETS["table6a"].optimizers]
    c = PRESETS["table6c"]
    assert c.version.value == "new-ce" and c.ns == (50,) and c.trials == 10 and c.test_count == 100
    assert c.levels == (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0) and c.ps == (3 / 8, 1 / 2, 5 / 8)
    assert c.rule is Rule.SIGN
    assert preset("table1", trials=3).trials == 3
    with pytest.raises(ValueError):
        preset("table9")


def test_equalizer_step_sizes_contract(rng):
    obj = Objective(Dataset(rng.standard_normal((4, 9)), rng.standard_normal(4)), 0.5)
    L = top_eigenvalue(obj.X.T @ obj.X + 0.5 * np.eye(9))
    for spec in equalizer_specs(obj, K=5):
        assert spec.eta * preconditioner_ceiling(spec) * L <= 1.0 + 1e-12
