"""Exchangeable-weight bootstrap draws and percentile confidence intervals.

Three flavours are provided: the reshaped bootstrap (centred bootstrap
objective plus the estimated drift polynomial), the naive bootstrap and the
m-out-of-n bootstrap.  Every replication draws its weights from its own
random substream keyed by ``(seed, replication index)``, so results do not
depend on scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import BadSubsampleSize, BoundaryEvaluation, EmptyDraws
from .estimators import STEP_PHI_KINDS, MonotoneModel, build_model, generalized_grenander, isotonic_slopes, weighted_slope
from .gcm_core import DEFAULT_GRID_POINTS
from .mean_function import (
    DEFAULT_S_LOWER,
    PerturbationPoly,
    QMode,
    build_perturbation,
    estimate_d_values,
    symmetric_offsets,
)

MULTINOMIAL = "multinomial"
DIRICHLET = "dirichlet"
WEIGHT_SCHEMES = (MULTINOMIAL, DIRICHLET)
MODES = ("reshaped", "naive", "m_of_n")
REPORTED_J = (1, 3)


@dataclass(frozen=True)
class WeightScheme:
    """Exchangeable weights summing to ``n``."""

    kind: str = MULTINOMIAL

    def __post_init__(self):
        if self.kind not in WEIGHT_SCHEMES:
            raise ValueError(f"unknown weight scheme {self.kind!r}")


def replication_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for replication ``index`` under ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(index),))))


def draw_weights(scheme: WeightScheme | str, n: int, rng: np.random.Generator) -> np.ndarray:
    """One weight vector.

    Multinomial weights are the resampling counts of the nonparametric
    bootstrap; Dirichlet weights are ``n E_i / sum E`` with unit
    exponentials.
    """
    kind = scheme.kind if isinstance(scheme, WeightScheme) else str(scheme)
    if n < 1:
        raise ValueError("n must be positive")
    if kind == MULTINOMIAL:
        return np.bincount(rng.integers(0, n, n), minlength=n).astype(float)
    if kind == DIRICHLET:
        e = rng.standard_exponential(n)
        return n * e / e.sum()
    raise ValueError(f"unknown weight scheme {kind!r}")


def subsample_weights(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Weights ``(n/m) * counts`` of a size-``m`` resample with replacement."""
    counts = np.bincount(rng.integers(0, n, m), minlength=n).astype(float)
    return counts if m == n else counts * (n / m)


@dataclass(frozen=True)
class BootstrapPlan:
    """Everything that determines a bootstrap interval besides the data.

    Attributes
    ----------
    B : int
        Number of replications.
    scheme : WeightScheme
    mode : {"reshaped", "naive", "m_of_n"}
    q_mode : QMode
        Known exponent or robust bound; the m-out-of-n mode needs a known
        exponent for its rates.
    step : "rot" or float
        Numerical-derivative step.
    alpha : float
    seed : int
    grid_points : int
        Refinement grid of the continuous composites.
    m : int, optional
        Subsample size (m-out-of-n only); defaults to ``ceil(sqrt(n))``.
    d_override : mapping, optional
        Injected drift coefficients (skips estimation, for oracle runs).
    nd_method : {"BR", "FD", "MA"}
    s_lower : int
    c : tuple of float, optional
    """

    B: int = 2000
    scheme: WeightScheme = field(default_factory=WeightScheme)
    mode: str = "reshaped"
    q_mode: QMode = field(default_factory=lambda: QMode.robust(3))
    step: str | float = "rot"
    alpha: float = 0.05
    seed: int = 0
    grid_points: int = DEFAULT_GRID_POINTS
    m: int | None = None
    d_override: Mapping[int, float] | None = None
    nd_method: str = "BR"
    s_lower: int = DEFAULT_S_LOWER
    c: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.B < 1:
            raise ValueError("B must be at least 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "m_of_n" and self.q_mode.kind != "known":
            raise ValueError("the m-out-of-n bootstrap needs a known exponent q")
        if self.grid_points < 2:
            raise ValueError("grid_points must be at least 2")

    def rate(self, n: int) -> float:
        """``r_n = n^(q/(1+2q))`` (known ``q`` only)."""
        if self.q_mode.kind != "known":
            raise ValueError("rates need a known exponent q")
        q = self.q_mode.value
        return float(n) ** (q / (1 + 2 * q))


@dataclass(frozen=True, eq=False)
class CiResult:
    """Percentile interval and diagnostics.

    ``draws`` holds the centred draws the interval was computed from (on the
    scale of ``theta_hat``, after any rate rescaling).
    """

    lo: float
    hi: float
    theta_hat: float
    alpha: float
    draws_summary: dict = field(default_factory=dict)
    d_estimates: dict = field(default_factory=dict)
    steps: dict = field(default_factory=dict)
    draws: np.ndarray | None = field(default=None, repr=False)

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def covers(self, value: float) -> bool:
        return self.lo <= value <= self.hi


def _type1_quantile(sorted_draws: np.ndarray, a: float) -> float:
    k = max(1, math.ceil(a * sorted_draws.size - 1e-9))
    return float(sorted_draws[min(k, sorted_draws.size) - 1])


def percentile_ci(draws, theta_hat: float, alpha: float) -> CiResult:
    """``[theta - Q(1 - alpha/2), theta - Q(alpha/2)]`` with type-1 quantiles."""
    d = np.sort(np.asarray(draws, dtype=float).reshape(-1))
    if d.size == 0:
        raise EmptyDraws("no bootstrap draws")
    if not np.all(np.isfinite(d)):
        raise ValueError("draws must be finite")
    q_lo = _type1_quantile(d, alpha / 2)
    q_hi = _type1_quantile(d, 1 - alpha / 2)
    summary = {str(a): _type1_quantile(d, a) for a in (0.025, 0.05, 0.5, 0.95, 0.975)}
    return CiResult(theta_hat - q_hi, theta_hat - q_lo, float(theta_hat), float(alpha),
                    summary, draws=d)


# ---------------------------------------------------------------------------
# draws
# ---------------------------------------------------------------------------


def reshaped_draw(model: MonotoneModel, theta_hat: float, pert: PerturbationPoly | None,
                  weights, plan: BootstrapPlan | None = None) -> float:
    """One reshaped draw from the objective
    ``Gamma* - Gamma + theta_hat Phi + M(. - xbar)``."""
    grid = DEFAULT_GRID_POINTS if plan is None else plan.grid_points
    return weighted_slope(model, weights, theta_hat, pert, reshaped=True, grid_points=grid)


def naive_draw(model: MonotoneModel, weights, plan: BootstrapPlan | None = None) -> float:
    """The estimator recomputed on reweighted data."""
    grid = DEFAULT_GRID_POINTS if plan is None else plan.grid_points
    return weighted_slope(model, weights, grid_points=grid)


def _weight_matrix(n: int, B: int, seed: int, sampler: Callable) -> np.ndarray:
    w = np.empty((B, n))
    for b in range(B):
        w[b] = sampler(replication_rng(seed, b))
    return w


def bootstrap_slopes(model: MonotoneModel, weights: np.ndarray, theta_hat: float = 0.0,
                     pert=None, reshaped: bool = False,
                     grid_points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Slopes for each row of ``weights`` (batched for step-``Phi`` kinds)."""
    if model.kind in STEP_PHI_KINDS:
        if not model.x[0] <= model.x_eval <= model.x[-1]:
            raise BoundaryEvaluation("evaluation point outside the range of the design")
        out = isotonic_slopes(model, weights, theta_hat, pert, reshaped)
        if np.any(np.isnan(out)):
            raise BoundaryEvaluation("a bootstrap level Phi*(x) is zero")
        return out
    return np.array([weighted_slope(model, w, theta_hat, pert, reshaped, grid_points)
                     for w in weights])


def m_of_n_ci(model_builder: Callable, data, m: int, q: int, alpha: float, B: int,
              seed: int) -> CiResult:
    """m-out-of-n bootstrap interval with known rate exponent ``q``.

    Resamples of size ``m`` are drawn with replacement and represented as
    weights ``(n/m) * counts`` on the full sample.  The interval is
    ``[theta - Q(1 - alpha/2)/r_n, theta - Q(alpha/2)/r_n]`` with ``Q``
    the quantiles of ``r_m (theta*_m - theta)``.
    """
    model = model_builder(data)
    n = model.n
    if not 1 <= m <= n:
        raise BadSubsampleSize(f"need 1 <= m <= n, got m={m}, n={n}")
    plan = BootstrapPlan(B=B, mode="m_of_n", q_mode=QMode.known(q), alpha=alpha, seed=seed, m=m)
    return _m_of_n(model, generalized_grenander(model), plan)


def _m_of_n(model: MonotoneModel, theta_hat: float, plan: BootstrapPlan) -> CiResult:
    n = model.n
    m = plan.m if plan.m is not None else math.ceil(math.sqrt(n))
    if not 1 <= m <= n:
        raise BadSubsampleSize(f"need 1 <= m <= n, got m={m}, n={n}")
    w = _weight_matrix(n, plan.B, plan.seed, lambda r: subsample_weights(n, m, r))
    draws = bootstrap_slopes(model, w, grid_points=plan.grid_points) - theta_hat
    scale = 1.0 if m == n else (m / n) ** (plan.q_mode.value / (1 + 2 * plan.q_mode.value))
    return percentile_ci(draws * scale, theta_hat, plan.alpha)


def _drift(model: MonotoneModel, theta_hat: float, plan: BootstrapPlan):
    if plan.d_override is not None:
        d = {int(k): float(v) for k, v in plan.d_override.items()}
        return build_perturbation(d, plan.q_mode), d, {}
    c = tuple(plan.c) if plan.c is not None else symmetric_offsets(plan.s_lower)
    js = sorted(set(plan.q_mode.needed) | set(REPORTED_J))
    js = [j for j in js if j <= plan.s_lower]
    d, eps = estimate_d_values(model, theta_hat, js, plan.step, plan.nd_method, plan.s_lower, c)
    return build_perturbation(d, plan.q_mode), d, eps


def ci_for_model(model: MonotoneModel, plan: BootstrapPlan) -> CiResult:
    """Interval for an already built model (see :func:`run_ci_pipeline`)."""
    theta_hat = generalized_grenander(model, plan.grid_points)
    if plan.mode == "m_of_n":
        return _m_of_n(model, theta_hat, plan)
    n = model.n
    w = _weight_matrix(n, plan.B, plan.seed, lambda r: draw_weights(plan.scheme, n, r))
    if plan.mode == "naive":
        draws = bootstrap_slopes(model, w, grid_points=plan.grid_points) - theta_hat
        return percentile_ci(draws, theta_hat, plan.alpha)
    pert, d, eps = _drift(model, theta_hat, plan)
    draws = bootstrap_slopes(model, w, theta_hat, pert, True, plan.grid_points) - theta_hat
    res = percentile_ci(draws, theta_hat, plan.alpha)
    return CiResult(res.lo, res.hi, res.theta_hat, res.alpha, res.draws_summary, d, eps,
                    res.draws)


def run_ci_pipeline(data: Mapping, kind: str, x_eval: float, plan: BootstrapPlan,
                    **model_kwargs) -> CiResult:
    """Model, estimate, drift polynomial, draws and interval in one call.

    Deterministic given ``data`` and ``plan.seed``.
    """
    return ci_for_model(build_model(kind, data, x_eval, **model_kwargs), plan)
