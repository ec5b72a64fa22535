"""Mean-function ingredients for the reshaped bootstrap.

The drift of the limiting objective near ``xbar`` is a monomial
``D_q v^(q+1)`` whose coefficient is a scaled derivative of

    Upsilon(x) = Gamma(x) - theta(xbar) Phi(x).

This module estimates those coefficients by numerical differentiation of
the plug-in ``Upsilon``, assembles the polynomial ``M`` used to reshape the
bootstrap objective and chooses step sizes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from numpy.polynomial import hermite_e

from .errors import (
    IncompleteDEstimates,
    RotFitFailed,
    SingularCoefficientSystem,
    StepOutOfDomain,
    ZeroBiasConstant,
)
from .estimators import STEP_PHI_KINDS, MonotoneModel, kaplan_meier

DEFAULT_C = (1.0, -1.0, 2.0, -2.0)
DEFAULT_S_LOWER = 3


# ---------------------------------------------------------------------------
# Upsilon and numerical derivatives
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Upsilon:
    """Evaluable ``x -> Gamma(x) - theta * Phi(x)`` with its natural domain."""

    gamma: Callable
    phi: Callable
    theta: float
    domain: tuple[float, float] = (-np.inf, np.inf)

    def __call__(self, x):
        return np.asarray(self.gamma(x), dtype=float) - self.theta * np.asarray(self.phi(x), dtype=float)


def upsilon_hat(model: MonotoneModel, theta_hat: float) -> Upsilon:
    """Plug-in ``Upsilon`` of a fitted model.

    Outside the support of the data the primitives continue as they do on
    their natural domain (constant for step functions, linearly for
    ``Phi`` of the density-type kinds).
    """
    theta_hat = float(theta_hat)
    if not np.isfinite(theta_hat):
        raise ValueError("theta_hat must be finite")
    return Upsilon(model.gamma, model.phi, theta_hat, model.natural_domain)


def br_coefficients(j: int, s_lower: int, c: Sequence[float]) -> np.ndarray:
    """Solve ``sum_k lambda_k c_k^p = 1(p = j+1)`` for ``p = 1..s_lower+1``."""
    c = np.asarray(c, dtype=float)
    p = np.arange(1, s_lower + 2)
    if c.size != s_lower + 1:
        raise ValueError("need exactly s_lower + 1 offsets")
    if not 1 <= j <= s_lower:
        raise ValueError("need 1 <= j <= s_lower")
    a = c[None, :] ** p[:, None]
    rhs = (p == j + 1).astype(float)
    if np.unique(c).size < c.size or np.any(c == 0):
        raise SingularCoefficientSystem("offsets must be distinct and nonzero")
    try:
        lam = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularCoefficientSystem(str(exc)) from exc
    if np.max(np.abs(a @ lam - rhs)) > 1e-10:
        raise SingularCoefficientSystem("ill-conditioned offset system")
    return lam


@dataclass(frozen=True)
class NdSpec:
    """Numerical-derivative configuration.

    Attributes
    ----------
    method : {"MA", "FD", "BR"}
    j : int
        Target index; the estimand is ``d^(j+1) Upsilon(xbar) / (j+1)!``.
    eps : float
    s_lower : int
        Order of the bias-reduced scheme (BR only).
    c : tuple of float
        Offsets (BR only).
    """

    method: str
    j: int
    eps: float
    s_lower: int = DEFAULT_S_LOWER
    c: tuple[float, ...] = DEFAULT_C

    def __post_init__(self):
        if self.method not in ("MA", "FD", "BR"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.j < 1:
            raise ValueError("j must be at least 1")
        if not (self.eps > 0 and np.isfinite(self.eps)):
            raise ValueError("eps must be positive")

    def offsets_and_weights(self) -> tuple[np.ndarray, np.ndarray]:
        """Offsets (in units of ``eps``) and their weights."""
        j = self.j
        if self.method == "MA":
            return np.array([1.0]), np.array([1.0])
        if self.method == "FD":
            k = np.arange(1, j + 2)
            w = np.array([(-1.0) ** (kk + j + 1) * math.comb(j + 1, kk) for kk in k])
            return k.astype(float), w / math.factorial(j + 1)
        c = np.asarray(self.c, dtype=float)
        return c, br_coefficients(j, self.s_lower, c)


def estimate_D(ups: Callable, spec: NdSpec, x_eval: float) -> float:
    """Numerical-derivative estimate of ``D_j(xbar)``.

    ``ups`` may carry a ``domain`` attribute; offsets leaving it raise
    :class:`StepOutOfDomain`.
    """
    off, w = spec.offsets_and_weights()
    pts = x_eval + off * spec.eps
    lo, hi = getattr(ups, "domain", (-np.inf, np.inf))
    if np.any(pts < lo) or np.any(pts > hi):
        raise StepOutOfDomain(f"offsets {pts} leave the domain [{lo}, {hi}]")
    vals = np.asarray(ups(pts), dtype=float) - float(np.asarray(ups(x_eval)))
    return float(np.dot(w, vals) / spec.eps ** (spec.j + 1))


# ---------------------------------------------------------------------------
# perturbation polynomial
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QMode:
    """Either a known exponent ``q`` or a robust upper bound ``qbar``."""

    kind: str
    value: int

    @classmethod
    def known(cls, q: int) -> "QMode":
        return cls("known", int(q))

    @classmethod
    def robust(cls, qbar: int = 3) -> "QMode":
        return cls("robust", int(qbar))

    def __post_init__(self):
        if self.kind not in ("known", "robust"):
            raise ValueError(f"unknown q mode {self.kind!r}")
        if self.value < 1 or self.value % 2 == 0:
            raise ValueError("q must be a positive odd integer")
        if self.kind == "robust" and self.value < 3:
            raise ValueError("robust mode needs qbar >= 3")

    @property
    def needed(self) -> tuple[int, ...]:
        """Indices ``j`` whose estimates enter the polynomial."""
        if self.kind == "known":
            return (self.value,)
        return tuple(range(1, self.value + 1, 2))

    def __str__(self) -> str:
        return f"{self.kind}({self.value})"


@dataclass(frozen=True)
class PerturbationPoly:
    """Nonnegative even-power polynomial ``v -> sum_d coeffs[d] v^d``."""

    coeffs: Mapping[int, float]
    q_mode: QMode
    d_estimates: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        for deg, a in self.coeffs.items():
            if deg < 2 or deg % 2:
                raise ValueError("degrees must be even and at least 2")
            if a < 0:
                raise ValueError("coefficients must be nonnegative")

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(v)
        for deg, a in self.coeffs.items():
            out = out + a * v**deg
        return out

    def derivative(self, v):
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(v)
        for deg, a in self.coeffs.items():
            out = out + deg * a * v ** (deg - 1)
        return out


def build_perturbation(d_estimates: Mapping[int, float], mode: QMode) -> PerturbationPoly:
    """Assemble ``M`` from derivative estimates.

    Known ``q`` gives ``max(D_q, 0) v^(q+1)``; robust ``qbar`` gives
    ``sum_l max(D_(2l-1), 0) v^(2l)`` for ``l = 1..(qbar+1)/2``.
    """
    missing = [j for j in mode.needed if j not in d_estimates]
    if missing:
        raise IncompleteDEstimates(f"missing estimates for j = {missing}")
    coeffs = {}
    for j in mode.needed:
        d = float(d_estimates[j])
        if not np.isfinite(d):
            raise IncompleteDEstimates(f"non-finite estimate for j = {j}")
        if mode.kind == "known" and d < 0:
            warnings.warn(f"D_{j} estimate {d:.4g} is negative; floored at 0", RuntimeWarning,
                          stacklevel=2)
        coeffs[j + 1] = max(d, 0.0)
    return PerturbationPoly(coeffs, mode, dict(d_estimates))


# ---------------------------------------------------------------------------
# step sizes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepSizeConstants:
    """Bias and variance constants of the bias-reduced derivative estimator."""

    bias_const: float
    var_const: float
    kernel_eval: np.ndarray | None = None

    def __post_init__(self):
        if self.var_const < 0:
            raise ValueError("variance constant must be nonnegative")


def mse_optimal_step(consts: StepSizeConstants, j: int, s_lower: int, n: int) -> float:
    """Minimizer of ``eps^(2(s+1-j)) B^2 + V / (n eps^(1+2j))``."""
    if consts.bias_const == 0:
        raise ZeroBiasConstant("bias constant is zero")
    if not j < s_lower + 1:
        raise ValueError("need j < s_lower + 1")
    if consts.var_const <= 0:
        raise ValueError("variance constant must be positive")
    e = 3 + 2 * s_lower
    ratio = (1 + 2 * j) / (2 * (s_lower + 1 - j)) * consts.var_const / consts.bias_const**2
    return ratio ** (1.0 / e) * float(n) ** (-1.0 / e)


def symmetric_offsets(s_lower: int) -> tuple[float, ...]:
    """``(1, -1, 2, -2, ...)`` with ``s_lower + 1`` entries."""
    return tuple(float(s * (k // 2 + 1)) for k, s in zip(range(s_lower + 1), [1, -1] * s_lower))


def _signed_min_kernel(c: np.ndarray) -> np.ndarray:
    s, t = c[:, None], c[None, :]
    return np.minimum(np.abs(s), np.abs(t)) * (np.sign(s) == np.sign(t))


def _rot_from_constants(lam, c, dhigh, kappa, j, s_lower, n):
    # With symmetric offsets the order-(s+2) bias vanishes, so the bias is
    # carried by the next term and the scheme behaves as one of order s+1.
    c = np.asarray(c, dtype=float)
    fallback = float(n) ** (-1.0 / (5 + 2 * s_lower))
    deg = s_lower + 2
    if abs(np.dot(lam, c**deg)) > 1e-10 * max(1.0, np.sum(np.abs(lam * c**deg))):
        raise ValueError("rule of thumb assumes symmetric offsets")
    kern = _signed_min_kernel(c)
    bias = dhigh / math.factorial(s_lower + 3) * float(np.dot(lam, c ** (s_lower + 3)))
    var = float(kappa * lam @ kern @ lam)
    scale = max(abs(kappa), 1e-300)
    if not (np.isfinite(bias) and np.isfinite(var)) or var <= 1e-12 * scale or var <= 0:
        raise RotFitFailed("degenerate variance constant", fallback)
    if bias == 0 or abs(bias) < 1e-300:
        raise RotFitFailed("degenerate bias constant", fallback)
    consts = StepSizeConstants(bias, var, kappa * kern)
    return mse_optimal_step(consts, j, s_lower + 1, n)


def _normal_pdf_derivs(x: float, mu: float, sigma: float, order: int) -> np.ndarray:
    z = (x - mu) / sigma
    phi = math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    out = np.empty(order + 1)
    for m in range(order + 1):
        coef = np.zeros(m + 1)
        coef[m] = 1.0
        out[m] = (-1) ** m * hermite_e.hermeval(z, coef) * phi / sigma ** (m + 1)
    return out


def rot_step_size(x, y, x_eval: float, j: int, s_lower: int = DEFAULT_S_LOWER,
                  c: Sequence[float] | None = None) -> float:
    """Rule-of-thumb step for the bias-reduced estimator in isotonic regression.

    A polynomial mean of degree ``s_lower + 2`` in ``(X - xbar)`` is fitted by
    least squares and ``X`` is taken as normal with moment estimates.  The
    step balances the leading nonvanishing bias term against the variance,
    giving the rate ``n^(-1/(5 + 2 s_lower))``.

    Raises
    ------
    RotFitFailed
        When the reference fit is degenerate; ``exc.fallback`` holds the
        bare rate.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    c = np.asarray(symmetric_offsets(s_lower) if c is None else c, dtype=float)
    deg = s_lower + 2
    fallback = float(n) ** (-1.0 / (5 + 2 * s_lower))
    if n < deg + 3:
        raise RotFitFailed("too few observations for the reference fit", fallback)
    d = x - x_eval
    design = np.vander(d, deg + 1, increasing=True)
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < deg + 1:
        raise RotFitFailed("singular reference design", fallback)
    resid = y - design @ coef
    sigma2 = float(resid @ resid) / (n - deg - 1)
    yscale = float(np.mean(y * y))
    if sigma2 <= 1e-12 * yscale or sigma2 == 0:
        raise RotFitFailed("zero residual variance", fallback)
    if np.all(np.abs(coef[1:]) <= 1e-10 * math.sqrt(yscale)):
        raise RotFitFailed("flat reference mean", fallback)
    mu, sd = float(x.mean()), float(x.std())
    if sd <= 0:
        raise RotFitFailed("degenerate design spread", fallback)
    # d^(s+3) Upsilon = d^(s+2)[(m - m(xbar)) f] at xbar, with d^k m = k! coef_k.
    fd = _normal_pdf_derivs(x_eval, mu, sd, deg)
    dhigh = sum(math.comb(deg, k) * math.factorial(k) * coef[k] * fd[deg - k]
                for k in range(1, deg + 1))
    kappa = fd[0] * sigma2
    lam = br_coefficients(j, s_lower, c)
    return _rot_from_constants(lam, c, dhigh, kappa, j, s_lower, n)


def _censoring_survival(model: MonotoneModel) -> float:
    fit = kaplan_meier(model.x, 1.0 - model.resp)
    return float(fit.survival(model.x_eval))


def rot_step_for_model(model: MonotoneModel, theta_hat: float, j: int,
                       s_lower: int = DEFAULT_S_LOWER, c: Sequence[float] | None = None) -> float:
    """Rule-of-thumb step for any estimator kind.

    Step-``Phi`` kinds use :func:`rot_step_size`.  The density-type kinds fit
    a polynomial of degree ``s_lower + 3`` to ``Upsilon`` at the sample
    points for the bias constant and use the local variance scale of the
    kind (``f``, ``f / G`` or ``f / G`` written as ``theta S / G``).
    """
    if model.kind in STEP_PHI_KINDS:
        return rot_step_size(model.x, model.resp, model.x_eval, j, s_lower, c)
    c = np.asarray(symmetric_offsets(s_lower) if c is None else c, dtype=float)
    n = model.n
    fallback = float(n) ** (-1.0 / (5 + 2 * s_lower))
    deg = s_lower + 3
    ups = upsilon_hat(model, theta_hat)
    xs = model.x
    if np.unique(xs).size < deg + 2:
        raise RotFitFailed("too few distinct points for the reference fit", fallback)
    design = np.vander(xs - model.x_eval, deg + 1, increasing=True)
    coef, _, rank, _ = np.linalg.lstsq(design, ups(xs), rcond=None)
    if rank < deg + 1:
        raise RotFitFailed("singular reference design", fallback)
    dhigh = math.factorial(deg) * coef[deg]
    if model.kind == "density":
        kappa = theta_hat
    else:
        g = _censoring_survival(model)
        if g <= 0:
            raise RotFitFailed("censoring survival is zero at the evaluation point", fallback)
        kappa = theta_hat / g
        if model.kind == "hazard":
            kappa *= float(kaplan_meier(model.x, model.resp).survival(model.x_eval))
    lam = br_coefficients(j, s_lower, c)
    return _rot_from_constants(lam, c, dhigh, kappa, j, s_lower, n)


def select_step(model: MonotoneModel, theta_hat: float, j: int, step="rot",
                s_lower: int = DEFAULT_S_LOWER, c: Sequence[float] | None = None) -> float:
    """Resolve a step setting (``"rot"`` or a positive number) to a value."""
    if step == "rot":
        try:
            return rot_step_for_model(model, theta_hat, j, s_lower, c)
        except RotFitFailed as exc:
            warnings.warn(f"rule-of-thumb step failed ({exc}); using n^(-1/{5 + 2 * s_lower})",
                          RuntimeWarning, stacklevel=2)
            return exc.fallback
    eps = float(step)
    if not eps > 0:
        raise ValueError("fixed step must be positive")
    return eps


def estimate_d_values(model: MonotoneModel, theta_hat: float, js: Sequence[int], step="rot",
                      method: str = "BR", s_lower: int = DEFAULT_S_LOWER,
                      c: Sequence[float] | None = None) -> tuple[dict[int, float], dict[int, float]]:
    """``D_j`` estimates and the steps used, for each ``j`` in ``js``."""
    c = tuple(symmetric_offsets(s_lower) if c is None else c)
    ups = upsilon_hat(model, theta_hat)
    d, eps = {}, {}
    for j in js:
        e = select_step(model, theta_hat, j, step, s_lower, c)
        d[j] = estimate_D(ups, NdSpec(method, j, e, s_lower, c), model.x_eval)
        eps[j] = e
    return d, eps
