from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from monoboot.bootstrap_engine import (
    BootstrapPlan,
    WeightScheme,
    bootstrap_slopes,
    ci_for_model,
    draw_weights,
    m_of_n_ci,
    naive_draw,
    percentile_ci,
    replication_rng,
    reshaped_draw,
    run_ci_pipeline,
)
from monoboot.errors import BadSubsampleSize, BoundaryEvaluation, EmptyDraws
from monoboot.estimators import (
    build_censored_density,
    build_current_status,
    build_density,
    build_hazard,
    build_isoreg,
    generalized_grenander,
)
from monoboot.mean_function import QMode, build_perturbation
from oracles import empirical_quantile_type1, pava


def _model1(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=n)
    return x, 2 * np.exp(x - 0.5) + rng.normal(size=n)


def _all_kinds(seed, n=80):
    rng = np.random.default_rng(seed)
    x, y = _model1(n, seed)
    t, c = rng.exponential(1.0, n), rng.exponential(2.0, n)
    cs = rng.uniform(size=n)
    return {
        "isoreg": build_isoreg(x, y, float(np.sort(x)[n // 2])),
        "current_status": build_current_status(cs, (rng.uniform(size=n) < cs).astype(float),
                                               float(np.sort(cs)[n // 3])),
        "density": build_density(np.sqrt(rng.uniform(size=n)), 0.5),
        "censored_density": build_censored_density(np.minimum(t, c), t <= c, 0.6),
        "hazard": build_hazard(np.minimum(t, c), t <= c, 0.6),
    }


# -- weights ---------------------------------------------------------------------


def test_multinomial_weights_support():
    w = draw_weights(WeightScheme("multinomial"), 4, np.random.default_rng(0))
    assert w.sum() == 4 and np.all(w >= 0) and np.all(w == np.round(w))


@pytest.mark.parametrize("n", [1, 7, 500])
def test_dirichlet_weights_normalized(n):
    w = draw_weights("dirichlet", n, np.random.default_rng(n))
    assert abs(w.sum() - n) < 1e-12 * n and np.all(w > 0)


def test_multinomial_weight_variance():
    n = 50
    rng = replication_rng(1, 0)
    sq = np.empty(100_000)
    for b in range(sq.size):
        w = draw_weights("multinomial", n, rng)
        sq[b] = np.mean((w - 1) ** 2)
    # Var(W_1) = 1 - 1/n for multinomial counts
    assert abs(sq.mean() - (1 - 1 / n)) < 0.005


def test_replication_streams_are_reproducible_and_distinct():
    a = draw_weights("multinomial", 30, replication_rng(5, 3))
    b = draw_weights("multinomial", 30, replication_rng(5, 3))
    c = draw_weights("multinomial", 30, replication_rng(5, 4))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


# -- single draws ----------------------------------------------------------------


@pytest.mark.parametrize("seed", range(5))
def test_naive_unit_weights_fixed_point_all_kinds(seed):
    for kind, m in _all_kinds(seed).items():
        th = generalized_grenander(m)
        assert naive_draw(m, np.ones(m.n)) == th, kind


@pytest.mark.parametrize("seed", range(5))
def test_reshaped_unit_weights_fixed_point_continuous_kinds(seed):
    pert = build_perturbation({1: 1.3, 3: 0.4}, QMode.robust(3))
    for kind, m in _all_kinds(seed).items():
        if kind in ("isoreg", "current_status"):
            continue
        th = generalized_grenander(m)
        assert reshaped_draw(m, th, pert, np.ones(m.n)) == th, kind


def test_reshaped_unit_weights_step_kinds_without_drift():
    zero = build_perturbation({1: 0.0}, QMode.known(1))
    for kind in ("isoreg", "current_status"):
        m = _all_kinds(3)[kind]
        th = generalized_grenander(m)
        assert reshaped_draw(m, th, zero, np.ones(m.n)) == pytest.approx(th, abs=1e-12)
        assert reshaped_draw(m, th, None, np.ones(m.n)) == pytest.approx(th, abs=1e-12)


def test_reshaped_unit_weights_step_kinds_chord_deviation():
    # With unit weights and a drift M the cusum points are theta*P_k + M(X_k - x);
    # the left slope at the hull vertex P_j is the largest chord slope into it.
    x, y = _model1(60, 0)
    xs = np.sort(x)
    xe = float(xs[30])
    m = build_isoreg(x, y, xe, support=(0.0, 1.0))
    th = generalized_grenander(m)
    pert = build_perturbation({1: 1.0}, QMode.known(1))
    P = np.arange(0, 61) / 60
    X = np.concatenate([[0.0], xs])
    G = th * P + pert(X - xe)
    j = 31
    want = np.max((G[j] - G[:j]) / (P[j] - P[:j]))
    got = reshaped_draw(m, th, pert, np.ones(60))
    assert got == pytest.approx(want, rel=1e-12, abs=1e-12)
    assert got < th


def test_naive_draw_matches_pava_on_resample():
    x, y = _model1(40, 1)
    m = build_isoreg(x, y, 0.5, support=(0, 1))
    # weights follow the model's sorted observation order
    w = draw_weights("multinomial", 40, replication_rng(0, 0))
    xs, ys, ws = m.x, m.resp, w
    keep = ws > 0
    fit = pava(ys[keep], ws[keep])
    j = np.flatnonzero(xs[keep] <= 0.5)[-1]
    assert naive_draw(m, w) == pytest.approx(fit[j], rel=1e-10)


def test_naive_draw_degenerate_weights():
    x, y = _model1(30, 2)
    m = build_isoreg(x, y, 0.5)
    w = np.zeros(30)
    w[-1] = 30.0  # all mass above x: Phi*(x) = 0
    with pytest.raises(BoundaryEvaluation):
        naive_draw(m, w)
    w = np.zeros(30)
    w[0] = 30.0  # all mass below x: flat estimate
    assert naive_draw(m, w) == pytest.approx(y[int(np.argmin(x))])


def test_batched_and_single_draws_agree():
    x, y = _model1(100, 3)
    m = build_isoreg(x, y, 0.5, support=(0, 1))
    th = generalized_grenander(m)
    pert = build_perturbation({1: 1.0, 3: 0.2}, QMode.robust(3))
    W = np.stack([draw_weights("dirichlet", 100, replication_rng(9, b)) for b in range(20)])
    batch = bootstrap_slopes(m, W, th, pert, True)
    single = [reshaped_draw(m, th, pert, w) for w in W]
    np.testing.assert_array_equal(batch, single)


# -- percentile intervals ------------------------------------------------------


def test_percentile_ci_order_statistics():
    res = percentile_ci([-1, 0, 1], 5.0, 0.1)
    assert (res.lo, res.hi) == (4.0, 6.0)
    with pytest.raises(EmptyDraws):
        percentile_ci([], 0.0, 0.1)


def test_percentile_ci_matches_type1_oracle():
    d = np.random.default_rng(4).normal(size=37)
    res = percentile_ci(d, 0.0, 0.1)
    assert res.hi == -empirical_quantile_type1(d, 0.05)
    assert res.lo == -empirical_quantile_type1(d, 0.95)


def test_percentile_ci_symmetric_draws():
    d = np.linspace(-1, 1, 201)
    res = percentile_ci(d, 3.0, 0.1)
    gap = d[1] - d[0]
    assert abs((res.hi - 3.0) - (3.0 - res.lo)) <= gap + 1e-12


def test_percentile_ci_normal_quantiles():
    d = np.random.default_rng(5).normal(size=100_000)
    res = percentile_ci(d, 0.0, 0.05)
    z = stats.norm.ppf(0.975)
    assert abs(res.lo + z) < 0.02 and abs(res.hi - z) < 0.02


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(-100, 100), st.floats(0.01, 0.5))
def test_percentile_ci_shift_equivariance(seed, c, alpha):
    d = np.random.default_rng(seed).normal(size=50)
    a = percentile_ci(d, 1.0, alpha)
    b = percentile_ci(d, 1.0 + c, alpha)
    assert b.lo == pytest.approx(a.lo + c) and b.hi == pytest.approx(a.hi + c)
    assert a.lo <= a.hi


# -- m-out-of-n --------------------------------------------------------------------


def test_m_of_n_with_m_equal_n_is_naive():
    x, y = _model1(120, 6)
    build = lambda d: build_isoreg(d["x"], d["y"], 0.5, support=(0, 1))
    data = {"x": x, "y": y}
    a = m_of_n_ci(build, data, 120, 1, 0.1, 200, 11)
    b = ci_for_model(build(data), BootstrapPlan(B=200, mode="naive", alpha=0.1, seed=11))
    assert (a.lo, a.hi) == (b.lo, b.hi)


def test_m_of_n_degenerate_draws_collapse():
    x = np.random.default_rng(7).uniform(size=50)
    build = lambda d: build_isoreg(d["x"], d["y"], 0.5)
    res = m_of_n_ci(build, {"x": x, "y": np.full(50, 2.0)}, 8, 1, 0.05, 50, 0)
    assert res.lo == res.hi == pytest.approx(2.0)


def test_m_of_n_bad_subsample():
    x, y = _model1(20, 8)
    build = lambda d: build_isoreg(d["x"], d["y"], 0.5)
    with pytest.raises(BadSubsampleSize):
        m_of_n_ci(build, {"x": x, "y": y}, 21, 1, 0.05, 10, 0)


def test_plan_validation():
    with pytest.raises(ValueError):
        BootstrapPlan(mode="m_of_n", q_mode=QMode.robust(3))
    with pytest.raises(ValueError):
        BootstrapPlan(B=0)
    with pytest.raises(ValueError):
        BootstrapPlan(alpha=1.0)
    assert BootstrapPlan(q_mode=QMode.known(1)).rate(1000) == pytest.approx(10.0)


# -- pipeline -----------------------------------------------------------------------


def test_pipeline_deterministic():
    x, y = _model1(200, 9)
    plan = BootstrapPlan(B=50, seed=7)
    a = run_ci_pipeline({"x": x, "y": y}, "isoreg", 0.5, plan)
    b = run_ci_pipeline({"x": x, "y": y}, "isoreg", 0.5, plan)
    assert (a.lo, a.hi, a.theta_hat) == (b.lo, b.hi, b.theta_hat)
    assert a.d_estimates == b.d_estimates
    np.testing.assert_array_equal(a.draws, b.draws)


def test_pipeline_single_replication():
    x, y = _model1(200, 10)
    res = run_ci_pipeline({"x": x, "y": y}, "isoreg", 0.5, BootstrapPlan(B=1, seed=3))
    d = res.draws[0]
    assert res.lo == pytest.approx(res.theta_hat - d) and res.hi == pytest.approx(res.theta_hat - d)


def test_pipeline_model1_length_band():
    x, y = _model1(500, 11)
    res = run_ci_pipeline({"x": x, "y": y}, "isoreg", 0.5, BootstrapPlan(B=400, seed=1),
                          support=(0, 1))
    assert 0 < res.length < 3
    assert set(res.d_estimates) == {1, 3}


@pytest.mark.parametrize("kind", ["density", "censored_density", "hazard"])
def test_pipeline_continuous_kinds(kind):
    m = _all_kinds(12, n=150)[kind]
    res = ci_for_model(m, BootstrapPlan(B=20, seed=2, grid_points=512, step=0.05))
    assert res.lo <= res.hi
    assert math.isfinite(res.lo) and math.isfinite(res.hi)


def test_dirichlet_plan_runs():
    x, y = _model1(200, 13)
    res = run_ci_pipeline({"x": x, "y": y}, "isoreg", 0.5,
                          BootstrapPlan(B=30, scheme=WeightScheme("dirichlet"), seed=1))
    assert res.lo < res.hi
