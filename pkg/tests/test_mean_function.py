from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monoboot.errors import (
    IncompleteDEstimates,
    RotFitFailed,
    SingularCoefficientSystem,
    StepOutOfDomain,
    ZeroBiasConstant,
)
from monoboot.estimators import build_density, build_isoreg, generalized_grenander
from monoboot.mean_function import (
    NdSpec,
    QMode,
    StepSizeConstants,
    Upsilon,
    br_coefficients,
    build_perturbation,
    estimate_D,
    mse_optimal_step,
    rot_step_for_model,
    rot_step_size,
    select_step,
    upsilon_hat,
)
from oracles import poly_derivative_coefficient

C = (1.0, -1.0, 2.0, -2.0)


def test_br_coefficients_known_values():
    np.testing.assert_allclose(br_coefficients(1, 3, C), [2 / 3, 2 / 3, -1 / 24, -1 / 24], atol=1e-12)
    np.testing.assert_allclose(br_coefficients(3, 3, C), [-1 / 6, -1 / 6, 1 / 24, 1 / 24], atol=1e-12)
    np.testing.assert_allclose(br_coefficients(1, 1, (1, 2)), [-1, 0.5], atol=1e-12)


@pytest.mark.parametrize("j", [1, 2, 3])
def test_br_coefficients_residual(j):
    lam = br_coefficients(j, 3, C)
    for p in range(1, 5):
        assert abs(np.dot(lam, np.array(C) ** p) - (p == j + 1)) < 1e-10


def test_br_coefficients_singular():
    with pytest.raises(SingularCoefficientSystem):
        br_coefficients(1, 3, (1, 1, 2, -2))
    with pytest.raises(SingularCoefficientSystem):
        br_coefficients(1, 3, (0, 1, 2, -2))


def test_estimate_D_monomials():
    sq = lambda v: np.asarray(v, dtype=float) ** 2
    for eps in (0.05, 0.3, 1.0):
        for method in ("MA", "FD", "BR"):
            assert estimate_D(sq, NdSpec(method, 1, eps), 0.0) == pytest.approx(1.0, abs=1e-12)
    quart = lambda v: np.asarray(v, dtype=float) ** 4
    for eps in (0.05, 0.3, 1.0):
        assert estimate_D(quart, NdSpec("BR", 3, eps), 0.0) == pytest.approx(1.0, abs=1e-10)
        assert estimate_D(quart, NdSpec("FD", 3, eps), 0.0) == pytest.approx(1.0, abs=1e-10)
        assert estimate_D(quart, NdSpec("MA", 3, eps), 0.0) == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([0.05, 0.1, 0.2]), st.sampled_from([1, 2, 3]))
def test_estimate_D_br_annihilation(seed, eps, j):
    rng = np.random.default_rng(seed)
    coefs = rng.normal(size=5)
    x0 = float(rng.uniform(-1, 1))
    ups = lambda v: np.polynomial.polynomial.polyval(np.asarray(v, dtype=float), coefs)
    want = poly_derivative_coefficient(coefs, x0, j + 1)
    assert estimate_D(ups, NdSpec("BR", j, eps), x0) == pytest.approx(want, abs=1e-8)


def test_estimate_D_domain():
    ups = Upsilon(lambda v: v, lambda v: v, 0.0, (0.0, np.inf))
    with pytest.raises(StepOutOfDomain):
        estimate_D(ups, NdSpec("BR", 1, 0.3), 0.5)
    assert np.isfinite(estimate_D(ups, NdSpec("BR", 1, 0.2), 0.5))


def test_upsilon_hat_identities():
    x = np.random.default_rng(0).uniform(size=20)
    m = build_isoreg(x, np.full(20, 2.0), float(np.sort(x)[10]))
    ups = upsilon_hat(m, 2.0)
    np.testing.assert_allclose(ups(np.sort(x)), 0.0, atol=1e-14)
    d = build_density([0.2, 0.4, 0.9], 0.5)
    np.testing.assert_array_equal(upsilon_hat(d, 0.0)(np.array([0.1, 0.3, 0.5, 1.0])),
                                  d.gamma(np.array([0.1, 0.3, 0.5, 1.0])))


def test_upsilon_hat_direct_formula():
    rng = np.random.default_rng(1)
    x, y = rng.uniform(size=30), rng.normal(size=30)
    m = build_isoreg(x, y, 0.5)
    th = generalized_grenander(m)
    ups = upsilon_hat(m, th)
    for q in rng.uniform(-0.5, 1.5, 25):
        direct = np.sum(y * (x <= q)) / 30 - th * np.mean(x <= q)
        assert ups(q) == pytest.approx(direct, abs=1e-12)


def test_build_perturbation_known_and_robust():
    p = build_perturbation({1: 1.0}, QMode.known(1))
    assert p(2.0) == pytest.approx(4.0)
    p = build_perturbation({1: -0.2, 3: 0.5}, QMode.robust(3))
    assert p.coeffs == {2: 0.0, 4: 0.5}
    assert p(2.0) == pytest.approx(8.0)
    p = build_perturbation({1: 1.0, 3: 1.0}, QMode.robust(3))
    assert p(1.0) == pytest.approx(2.0)
    assert p.derivative(0.0) == 0.0
    assert p(0.0) == 0.0


def test_build_perturbation_floors_known_with_warning():
    with pytest.warns(RuntimeWarning):
        p = build_perturbation({1: -0.4}, QMode.known(1))
    assert p(3.0) == 0.0


def test_build_perturbation_missing():
    with pytest.raises(IncompleteDEstimates):
        build_perturbation({1: 1.0}, QMode.robust(3))
    with pytest.raises(IncompleteDEstimates):
        build_perturbation({1: 1.0}, QMode.known(3))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3), st.floats(-10, 10))
def test_perturbation_nonnegative_even(ds, v):
    p = build_perturbation({1: ds[0], 3: ds[1], 5: ds[2]}, QMode.robust(5))
    assert p(v) >= 0
    assert p(v) == pytest.approx(p(-v))
    if any(d > 0 for d in ds) and abs(v) > 0.1:
        assert p(v) > 0


def test_mse_optimal_step_closed_form():
    # follows the displayed formula: (3/6)^(1/9)
    assert mse_optimal_step(StepSizeConstants(1.0, 1.0), 1, 3, 1) == pytest.approx(0.5 ** (1 / 9))
    base = mse_optimal_step(StepSizeConstants(1.0, 1.0), 1, 3, 100)
    assert mse_optimal_step(StepSizeConstants(1.0, 2.0**9), 1, 3, 100) == pytest.approx(2 * base)
    eps = [mse_optimal_step(StepSizeConstants(0.3, 2.0), 1, 3, n) for n in (100, 1000, 10000)]
    assert np.all(np.diff(eps) < 0)
    assert eps[0] / eps[1] == pytest.approx(10 ** (1 / 9))
    with pytest.raises(ZeroBiasConstant):
        mse_optimal_step(StepSizeConstants(0.0, 1.0), 1, 3, 10)


def _model1(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=n)
    return x, 2 * np.exp(x - 0.5) + rng.normal(size=n)


def test_rot_polynomial_data_recovers_coefficients():
    rng = np.random.default_rng(2)
    x = rng.normal(0.5, 0.3, 5000)
    gam = np.array([1.0, 0.5, -0.3, 0.2, 0.1, -0.05])
    y = np.polynomial.polynomial.polyval(x - 0.5, gam)
    design = np.vander(x - 0.5, 6, increasing=True)
    fitted = np.linalg.lstsq(design, y, rcond=None)[0]
    np.testing.assert_allclose(fitted, gam, atol=1e-6)
    y_noisy = y + rng.normal(scale=0.1, size=x.size)
    assert rot_step_size(x, y_noisy, 0.5, 1) > 0


def test_rot_constant_response_falls_back():
    x = np.random.default_rng(3).uniform(size=200)
    with pytest.raises(RotFitFailed) as info:
        rot_step_size(x, np.full(200, 1.0), 0.5, 1)
    assert info.value.fallback == pytest.approx(200 ** (-1 / 11))
    with pytest.warns(RuntimeWarning):
        m = build_isoreg(x, np.full(200, 1.0), 0.5)
        assert select_step(m, 1.0, 1) == pytest.approx(200 ** (-1 / 11))


def test_rot_model1_envelope():
    eps = [rot_step_size(*_model1(1000, s), 0.5, 1) for s in range(100)]
    assert min(eps) > 0.01 and max(eps) < 0.9


def test_rot_rate_on_fixed_constants():
    # same reference constants, sample sizes n and 16n
    x, y = _model1(1000, 4)
    lam_ratio = rot_step_size(x, y, 0.5, 1)
    xx, yy = np.repeat(x, 16), np.repeat(y, 16)
    # replicating the data keeps the fitted constants (residual variance up to dof)
    dof = (x.size - 6) / (xx.size - 6) * 16
    ratio = lam_ratio / rot_step_size(xx, yy, 0.5, 1)
    assert ratio == pytest.approx(16 ** (1 / 11) * dof ** (-1 / 11), rel=1e-9)


def test_rot_for_density_kinds_positive():
    x = np.sqrt(np.random.default_rng(5).uniform(size=500))
    m = build_density(x, 0.5)
    th = generalized_grenander(m)
    for j in (1, 3):
        e = rot_step_for_model(m, th, j)
        assert 0 < e < 1


def test_qmode_validation():
    with pytest.raises(ValueError):
        QMode.known(2)
    with pytest.raises(ValueError):
        QMode.robust(1)
    assert QMode.robust(5).needed == (1, 3, 5)
    assert math.isfinite(QMode.known(3).value)
