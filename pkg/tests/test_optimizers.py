import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from overparam import closed_form as cf
from overparam.counterexamples import GeneratorSpec, generate
from overparam.models import Dataset, Objective, loss
from overparam.optimizers import (
    DivergenceError,
    Kind,
    OptimizerSpec,
    default_step_size,
    final_model,
    run,
    run_many,
    stable_step_bound,
)

ALL_KINDS = [k for k in Kind if k is not Kind.CONSTANT_D]


def _objective(rng, n, d, lam=0.0):
    return Objective(Dataset(rng.standard_normal((n, d)), rng.standard_normal(n)), lam=lam)


def _spec(kind, d, **kw):
    if Kind(kind) is Kind.CONSTANT_D:
        kw.setdefault("D", np.linspace(0.5, 1.5, d))
    return OptimizerSpec(kind, **kw)


def test_gd_one_step_identity_design():
    y = np.array([0.3, -2.0, 5.0])
    traj = run(Objective(Dataset(np.eye(3), y)), OptimizerSpec(Kind.GD, eta=1.0, K=1))
    np.testing.assert_array_equal(traj.iterates[1], y)


@pytest.mark.parametrize("kind", list(Kind))
def test_zero_iterations_returns_origin(kind, rng):
    obj = _objective(rng, 4, 6)
    traj = run(obj, _spec(kind, 6, K=0))
    assert traj.K == 0
    np.testing.assert_array_equal(traj.iterates[-1], np.zeros(6))


def test_gd_under_matches_closed_form(rng):
    obj = _objective(rng, 12, 5)
    eta = default_step_size(obj)
    w = run(obj, OptimizerSpec(Kind.GD, eta=eta, K=200)).iterates[-1]
    ref = cf.closed_form_gd_under(obj.X, obj.y, eta, 200)
    assert np.linalg.norm(w - ref) <= 1e-9 * np.linalg.norm(ref)


def test_variant_fits_training_data_on_counterexample():
    data = generate(GeneratorSpec("wilson-v1", n=10, p=7 / 8, level=1 / 32, seed=0))
    traj = run(Objective(data), OptimizerSpec(Kind.ADAGRAD_VARIANT, K=10_000))
    residual = float(np.linalg.norm(data.X @ traj.iterates[-1] - data.y))
    assert residual < 1e-6


def test_default_step_size_examples():
    assert default_step_size(Objective(Dataset(np.eye(2), [1.0, 1.0]))) == pytest.approx(1.0)
    assert default_step_size(Objective(Dataset([[2.0]], [1.0]))) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        default_step_size(Objective(Dataset(np.zeros((2, 3)), [1.0, 1.0])))


def test_final_model_normalization():
    traj = run(Objective(Dataset(np.eye(2), [3.0, 4.0])), OptimizerSpec(Kind.GD, eta=1.0, K=1))
    np.testing.assert_array_equal(final_model(traj, OptimizerSpec(Kind.GD, K=1)), [3.0, 4.0])
    np.testing.assert_allclose(
        final_model(traj, OptimizerSpec(Kind.GD, K=1, normalize_output=True)), [0.6, 0.8], rtol=1e-15
    )
    zero = run(Objective(Dataset(np.eye(2), [3.0, 4.0])), OptimizerSpec(Kind.GD, K=0))
    with pytest.raises(ValueError):
        final_model(zero, OptimizerSpec(Kind.GD, K=0, normalize_output=True))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 10), st.integers(1, 10), st.floats(0.05, 1.0), st.integers(0, 2**32 - 1))
def test_gd_is_monotone_below_one_over_L(n, d, frac, seed):
    obj = _objective(np.random.default_rng(seed), n, d)
    traj = run(obj, OptimizerSpec(Kind.GD, eta=frac * default_step_size(obj), K=60))
    assert np.all(np.diff(traj.losses) <= 1e-12 * traj.losses[0])


def test_constant_identity_equals_gd_bitwise(rng):
    obj = _objective(rng, 5, 8)
    gd = run(obj, OptimizerSpec(Kind.GD, K=50))
    cd = run(obj, OptimizerSpec(Kind.CONSTANT_D, K=50, D=np.ones(8)))
    assert np.array_equal(gd.iterates, cd.iterates)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(list(Kind)), st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_recorded_preconditioners_positive(kind, n, d, seed):
    r = np.random.default_rng(seed)
    obj = _objective(r, n, d)
    spec = _spec(kind, d, K=30, beta1=0.0)
    traj = run(obj, spec)
    assert traj.preconditioners.shape == (30, d)
    assert np.all(traj.preconditioners > 0)


def test_adam_with_momentum_records_no_preconditioner(rng):
    traj = run(_objective(rng, 3, 4), OptimizerSpec(Kind.ADAM, K=5))
    assert traj.preconditioners is None


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(ALL_KINDS), st.integers(0, 2**32 - 1))
def test_normalization_keeps_prediction_signs(kind, seed):
    r = np.random.default_rng(seed)
    obj = _objective(r, 4, 9)
    traj = run(obj, OptimizerSpec(kind, K=20))
    w = final_model(traj, OptimizerSpec(kind, K=20))
    u = final_model(traj, OptimizerSpec(kind, K=20, normalize_output=True))
    probes = r.standard_normal((50, 9))
    assert np.array_equal(np.sign(probes @ w), np.sign(probes @ u))


def test_divergence_reports_iteration(rng):
    obj = _objective(rng, 3, 3)
    with pytest.raises(DivergenceError) as exc:
        run(obj, OptimizerSpec(Kind.GD, eta=1e3 * default_step_size(obj), K=10_000))
    assert exc.value.iteration > 0
    assert not np.isfinite(exc.value.norm) or exc.value.norm > 1e100


@pytest.mark.parametrize("kind", list(Kind))
def test_run_many_matches_individual_runs(kind, rng):
    objs = [_objective(rng, 3, 7) for _ in range(4)]
    spec = _spec(kind, 7, K=40)
    batched = run_many(objs, spec)
    for obj, w in zip(objs, batched):
        single = run(obj, spec).iterates[-1]
        # the variant's large steps amplify summation-order rounding
        assert np.linalg.norm(w - single) <= 1e-8 * max(1.0, np.linalg.norm(single))


def test_run_many_flags_divergence_without_raising(rng):
    objs = [_objective(rng, 3, 3) for _ in range(2)]
    out = run_many(objs, OptimizerSpec(Kind.GD, eta=1e3, K=5000))
    assert not np.all(np.isfinite(out[0]))


def test_stable_step_bound_gd_equals_default(rng):
    obj = _objective(rng, 4, 9)
    bound = stable_step_bound(obj, np.ones((1, 9)))
    assert bound == pytest.approx(default_step_size(obj), rel=1e-6)


def test_spec_validation():
    with pytest.raises(ValueError):
        OptimizerSpec(Kind.GD, eta=-1.0)
    with pytest.raises(ValueError):
        OptimizerSpec(Kind.ADAGRAD, J=0)
    with pytest.raises(ValueError):
        OptimizerSpec(Kind.ADAM, beta2=1.0)
    with pytest.raises(ValueError):
        OptimizerSpec(Kind.CONSTANT_D)
    with pytest.raises(ValueError):
        OptimizerSpec(Kind.GD, D=[1.0])
    with pytest.raises(ValueError):
        OptimizerSpec("SGD")
    assert OptimizerSpec(Kind.ADAGRAD_VARIANT).epsilon == 1e-7
    assert OptimizerSpec(Kind.ADAGRAD).epsilon == 1e-8


def test_spec_json_round_trip():
    spec = OptimizerSpec(Kind.CONSTANT_D, eta=0.1, K=7, D=[1.0, 2.0], name="cd")
    back = OptimizerSpec.from_dict(spec.to_dict())
    assert back == spec and back.label == "cd"
    np.testing.assert_array_equal(back.D, [1.0, 2.0])
    with pytest.raises(ValueError):
        OptimizerSpec.from_dict({"kind": "GD", "lr": 0.1})


def test_trajectory_csv_round_trip(rng):
    traj = run(_objective(rng, 3, 5), OptimizerSpec(Kind.ADAGRAD, K=12))
    rows = list(csv.reader(io.StringIO(traj.to_csv())))
    assert rows[0] == ["iteration", "loss", "grad_norm"]
    assert len(rows) == 14
    np.testing.assert_array_equal([float(r[1]) for r in rows[1:]], traj.losses)
    np.testing.assert_array_equal([float(r[2]) for r in rows[1:]], traj.grad_norms)


def test_adagrad_window_includes_current_gradient():
    # X = I: gradients are w - y, so the first step is eta * g0 / sqrt(g0^2 + eps)
    y = np.array([2.0, -0.5])
    traj = run(Objective(Dataset(np.eye(2), y)), OptimizerSpec(Kind.ADAGRAD, eta=0.1, K=1, epsilon=1e-8))
    np.testing.assert_allclose(traj.preconditioners[0], 1 / np.sqrt(y**2 + 1e-8), rtol=1e-14)
    variant = run(Objective(Dataset(np.eye(2), y)), OptimizerSpec(Kind.ADAGRAD_VARIANT, eta=0.1, K=1))
    np.testing.assert_allclose(variant.preconditioners[0], 1 / (y**2 + 1e-7) ** 2, rtol=1e-14)


def test_adagrad_window_drops_old_gradients():
    y = np.array([1.0])
    obj = Objective(Dataset(np.eye(1), y))
    traj = run(obj, OptimizerSpec(Kind.ADAGRAD, eta=0.3, K=8, J=2, epsilon=1e-8))
    g = traj.iterates[:-1, 0] - 1.0
    for k in range(8):
        window = g[max(0, k - 2) : k + 1]
        assert traj.preconditioners[k, 0] == pytest.approx(1 / np.sqrt(np.sum(window**2) + 1e-8), rel=1e-13)
