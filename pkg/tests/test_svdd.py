import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dual_objective, gaussian_kernel_loop, projected_gradient_dual
from svddtrace import svdd as svdd_mod
from svddtrace.errors import NonConvergence, UsageError
from svddtrace.kernel import gaussian_gram, squared_distances
from svddtrace.svdd import (
    Position,
    TrainConfig,
    _KernelColumns,
    classify_training_points,
    full_alpha,
    radius_squared,
    score,
    score_batch,
    smo_solve,
    train_svdd,
)

E_HALF = math.exp(-0.5)
TWO_POINT_W = 0.5 + 0.5 * E_HALF
TWO_POINT_R2 = 1 - 2 * (0.5 + 0.5 * E_HALF) + TWO_POINT_W


@pytest.fixture
def two_point():
    x = np.array([[0.0], [1.0]])
    return x, train_svdd(x, 1.0, TrainConfig(f=0.5))


def test_single_point_model():
    x = np.array([[1.0, 2.0]])
    model = train_svdd(x, 0.7, TrainConfig(f=1.0))
    assert model.C == 1.0
    np.testing.assert_allclose(model.alpha, [1.0])
    assert model.r_squared == pytest.approx(0.0, abs=1e-15)
    z = np.array([2.0, 0.0])
    k = math.exp(-np.sum((z - x[0]) ** 2) / (2 * 0.7**2))
    assert score(model, z)[0] == pytest.approx(2 - 2 * k, rel=1e-12)


def test_two_point_model(two_point):
    x, model = two_point
    np.testing.assert_allclose(full_alpha(model, x), [0.5, 0.5], atol=1e-12)
    assert model.offset_w == pytest.approx(TWO_POINT_W, rel=1e-12)
    assert model.offset_w == pytest.approx(0.803265, abs=1e-6)
    assert model.r_squared == pytest.approx(TWO_POINT_R2, rel=1e-12)
    assert model.r_squared == pytest.approx(0.196735, abs=1e-6)


def test_two_point_radius_from_either_vector(two_point):
    x, model = two_point
    r2, per_point = radius_squared(model, x)
    assert per_point.size == 2
    np.testing.assert_allclose(per_point, TWO_POINT_R2, rtol=1e-12)
    assert r2 == pytest.approx(TWO_POINT_R2, rel=1e-12)


def test_two_point_positions_and_scores(two_point):
    x, model = two_point
    assert classify_training_points(model, x) == [Position.BOUNDARY, Position.BOUNDARY]
    d2, outlier = score(model, [0.0])
    assert d2 == pytest.approx(TWO_POINT_R2, rel=1e-12)
    assert not outlier
    d2, outlier = score(model, [0.5])
    assert d2 == pytest.approx(1 - 2 * math.exp(-0.125) + TWO_POINT_W, rel=1e-12)
    assert d2 == pytest.approx(0.038271, abs=1e-6)
    assert not outlier


def test_far_point_tends_to_one_plus_offset(two_point):
    _, model = two_point
    d2, outlier = score(model, [1e3])
    assert d2 == pytest.approx(1 + model.offset_w, rel=1e-12)
    assert outlier


def test_all_capped_fallback():
    x = np.random.default_rng(0).normal(size=(10, 2))
    model = train_svdd(x, 0.5, TrainConfig(f=1.0))
    assert model.C == pytest.approx(0.1)
    np.testing.assert_allclose(model.alpha, 0.1)
    d2 = model.decision_distances(x)
    assert model.r_squared == d2.max()
    assert all(p is Position.OUTSIDE for p in classify_training_points(model, x))


def test_inside_points_have_zero_alpha():
    x = np.random.default_rng(1).normal(size=(60, 2))
    model = train_svdd(x, 1.0, TrainConfig(f=0.1))
    alpha = full_alpha(model, x)
    labels = classify_training_points(model, x)
    assert Position.INSIDE in labels
    for a, lab in zip(alpha, labels):
        if a == 0:
            assert lab is Position.INSIDE


@pytest.mark.parametrize("seed", range(5))
def test_outside_fraction_bounded_by_f(seed):
    x = np.random.default_rng(seed).normal(size=(200, 3))
    f = 0.05
    model = train_svdd(x, 0.8, TrainConfig(f=f))
    labels = classify_training_points(model, x)
    n_out = sum(p is Position.OUTSIDE for p in labels)
    assert n_out / len(x) <= f + model.kkt_tol * len(x)


def _kkt_ok(model, x, tol):
    alpha = full_alpha(model, x)
    d2 = model.decision_distances(x)
    r2 = model.r_squared
    small = alpha < model.kkt_tol
    capped = alpha > model.C - model.kkt_tol
    free = ~small & ~capped
    return (
        np.all(d2[small] <= r2 + tol)
        and np.all(np.abs(d2[free] - r2) <= tol)
        and np.all(d2[capped] >= r2 - tol)
    )


@pytest.mark.parametrize("seed", range(20))
def test_matches_projected_gradient_oracle(seed):
    x = np.random.default_rng(seed).normal(size=(8, 2))
    K = gaussian_kernel_loop(x, 1.0)
    C = 1.0 / (8 * 0.25)
    a_ref = projected_gradient_dual(K, C, 1e-3, 1_000_000)
    model = train_svdd(x, 1.0, TrainConfig(f=0.25))
    a = full_alpha(model, x)
    assert np.max(np.abs(a - a_ref)) <= 1e-3
    assert abs(dual_objective(K, a) - dual_objective(K, a_ref)) <= 1e-6
    assert _kkt_ok(model, x, 1e-5)


def test_radius_values_agree_over_free_vectors():
    x = np.random.default_rng(4).normal(size=(150, 2))
    model = train_svdd(x, 0.6, TrainConfig(f=0.05))
    _, per_point = radius_squared(model, x)
    assert per_point.size >= 2
    assert per_point.max() - per_point.min() <= 10 * model.kkt_tol


def test_smo_iterates_feasible_and_monotone():
    x = np.random.default_rng(5).normal(size=(40, 2))
    kcols = _KernelColumns(x, 0.7)
    C = 1 / (40 * 0.1)
    alpha, trace = smo_solve(kcols, C, 1e-6, 10_000, record_objective=True)
    hist = np.array(trace.objective_history)
    assert np.all(np.diff(hist) >= -1e-14)
    assert abs(alpha.sum() - 1) <= 1e-12
    assert np.all(alpha >= 0) and np.all(alpha <= C)
    # replay at reduced budgets: every intermediate iterate is feasible
    for budget in (1, 5, 20, 100):
        a, _ = smo_solve(_KernelColumns(x, 0.7), C, 1e-6, budget)
        assert abs(a.sum() - 1) <= 1e-12
        assert np.all(a >= 0) and np.all(a <= C)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.2, 5.0), st.sampled_from([0.01, 0.1, 0.5]))
def test_distances_nonnegative(seed, s, f):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(30, 2))
    model = train_svdd(x, s, TrainConfig(f=f))
    d2, _ = score_batch(model, rng.normal(size=(200, 2)) * 3)
    assert np.all(d2 >= -1e-10)
    assert abs(model.alpha.sum() - 1) <= 1e-10
    assert np.all(model.alpha <= model.C)
    assert 0 < model.offset_w <= 1 + 1e-12
    assert model.r_squared >= -1e-10


def test_row_cache_path_matches_full_cache(monkeypatch):
    x = np.random.default_rng(6).normal(size=(120, 2))
    full = train_svdd(x, 0.5, TrainConfig(f=0.05))
    monkeypatch.setattr(svdd_mod, "FULL_CACHE_LIMIT", 10)
    rows = train_svdd(x, 0.5, TrainConfig(f=0.05))
    np.testing.assert_allclose(full_alpha(rows, x), full_alpha(full, x), atol=1e-9)
    assert rows.r_squared == pytest.approx(full.r_squared, abs=1e-9)


def test_nonconvergence_reports_violation():
    x = np.random.default_rng(7).normal(size=(80, 2))
    with pytest.raises(NonConvergence) as info:
        train_svdd(x, 0.5, TrainConfig(f=0.05, max_passes=3))
    assert info.value.violation > 1e-6


@pytest.mark.parametrize("f", [0.0, -0.1, 1.5])
def test_outlier_fraction_range(f):
    with pytest.raises(UsageError):
        train_svdd(np.zeros((3, 1)) + np.arange(3)[:, None], 1.0, TrainConfig(f=f))


def test_score_dimension_mismatch(two_point):
    _, model = two_point
    with pytest.raises(UsageError):
        score(model, [0.0, 1.0])


def test_score_batch_edge_cases(two_point):
    _, model = two_point
    d2, out = score_batch(model, np.empty((0, 1)))
    assert d2.size == 0 and out.size == 0
    d2, out = score_batch(model, [[0.5]])
    assert (d2[0], bool(out[0])) == score(model, [0.5])


def test_score_batch_matches_elementwise():
    rng = np.random.default_rng(8)
    x = rng.normal(size=(100, 3))
    model = train_svdd(x, 1.0, TrainConfig(f=0.05))
    z = rng.normal(size=(1000, 3)) * 1.5
    d2, out = score_batch(model, z)
    for i in range(len(z)):
        d, o = score(model, z[i])
        assert d == d2[i] and o == out[i]


def test_standardized_model_scores_raw_inputs():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(100, 2)) * [100.0, 0.01] + [5.0, -3.0]
    model = train_svdd(x, 1.0, TrainConfig(f=0.05), standardize=True)
    z = (x - x.mean(axis=0)) / x.std(axis=0)
    plain = train_svdd(z, 1.0, TrainConfig(f=0.05))
    np.testing.assert_allclose(model.decision_distances(x), plain.decision_distances(z), atol=1e-12)


def test_kernel_columns_matvec_blocks():
    x = np.random.default_rng(10).normal(size=(50, 2))
    kc = _KernelColumns(x, 0.9)
    kc.full = None
    v = np.random.default_rng(11).uniform(size=50)
    expect = gaussian_gram(squared_distances(x, x), 0.9) @ v
    np.testing.assert_allclose(kc.matvec(v, block=7), expect, rtol=1e-12)
