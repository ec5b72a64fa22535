"""Generalized Grenander-type estimators for five monotone problems.

Every estimator has the form ``theta(xbar) = left slope at Phi(xbar) of the
greatest convex minorant of Gamma ∘ Phi^-`` on ``[0, u]``.  The builders
below produce the primitive estimates ``(Gamma, Phi, u)``; the same code
path, fed with exchangeable weights, produces their bootstrap analogues.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import BoundaryEvaluation, DuplicateAbscissae, EmptyData
from .gcm_core import (
    DEFAULT_GRID_POINTS,
    EvalFn,
    PiecewiseLinear,
    StepFn,
    composite_left_slope,
    identity,
)

KINDS = ("density", "isoreg", "censored_density", "hazard", "current_status")
STEP_PHI_KINDS = ("isoreg", "current_status")


@dataclass(frozen=True)
class SurvivalFit:
    """Product-limit fit.

    Attributes
    ----------
    times : ndarray
        Distinct observed times, ascending.
    survival : StepFn
        Survival estimate on ``[0, max time]``; equals 1 before the first
        time and keeps its last value after the last one.
    at_risk, events : ndarray
        (Weighted) risk-set sizes and event counts at each time.
    """

    times: np.ndarray
    survival: StepFn
    at_risk: np.ndarray
    events: np.ndarray


@dataclass(frozen=True, eq=False)
class MonotoneModel:
    """Primitive estimates ``(Gamma, Phi, u)`` together with the raw data.

    Attributes
    ----------
    kind : str
        One of :data:`KINDS`.
    gamma, phi : PiecewiseLinear
    u_hat : float
    x_eval : float
    n : int
    x : ndarray
        Design points or times, sorted ascending.
    resp : ndarray
        Responses, event flags or status indicators aligned with ``x``.
    support : tuple of float
        Domain ``(lo, hi)`` of the primitives.
    u_md : float
        Right end of the time domain (density-type kinds).
    group_end : ndarray of int
        Last index of each group of tied ``x`` (step-``Phi`` kinds).
    """

    kind: str
    gamma: PiecewiseLinear
    phi: PiecewiseLinear
    u_hat: float
    x_eval: float
    n: int
    x: np.ndarray = field(repr=False)
    resp: np.ndarray = field(repr=False)
    support: tuple[float, float] = (0.0, 1.0)
    u_md: float = 1.0
    group_end: np.ndarray | None = field(default=None, repr=False)

    @property
    def natural_domain(self) -> tuple[float, float]:
        """Where ``Gamma`` and ``Phi`` are meaningful as functions."""
        if self.kind in STEP_PHI_KINDS:
            return (-np.inf, np.inf)
        return (0.0, np.inf)

    def with_x_eval(self, x_eval: float) -> "MonotoneModel":
        """Same data, new evaluation point."""
        return _BUILDERS_FROM_MODEL[self.kind](self, float(x_eval))


# ---------------------------------------------------------------------------
# Kaplan-Meier
# ---------------------------------------------------------------------------


def kaplan_meier(times, is_event, weights=None) -> SurvivalFit:
    """Weighted product-limit estimator.

    Parameters
    ----------
    times : array_like
        Positive observed times.
    is_event : array_like of bool
        ``True`` for an observed event, ``False`` for censoring.
    weights : array_like, optional
        Nonnegative case weights; unit weights give the usual estimator.
    """
    t = np.asarray(times, dtype=float)
    d = np.asarray(is_event, dtype=float)
    if t.size == 0:
        raise EmptyData("no observations")
    if t.shape != d.shape:
        raise ValueError("times and flags must have equal length")
    if np.any(t <= 0) or not np.all(np.isfinite(t)):
        raise ValueError("times must be positive and finite")
    w = np.ones_like(t) if weights is None else np.asarray(weights, dtype=float)
    ut, inv = np.unique(t, return_inverse=True)
    w_tot = np.bincount(inv, weights=w, minlength=ut.size)
    ev = np.bincount(inv, weights=w * d, minlength=ut.size)
    at_risk = np.cumsum(w_tot[::-1])[::-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        haz = np.where(at_risk > 0, ev / at_risk, 0.0)
    surv = np.cumprod(1.0 - haz)
    hi = ut[-1] if ut[-1] > 0 else 1.0
    sf = StepFn(ut, surv, 0.0, hi, 1.0)
    return SurvivalFit(ut, sf, at_risk, ev)


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def _check_x_eval(x_eval: float) -> float:
    x_eval = float(x_eval)
    if not np.isfinite(x_eval):
        raise ValueError("evaluation point must be finite")
    return x_eval


def _ecdf_step(x_sorted: np.ndarray, w_sorted: np.ndarray, n: int, lo: float, hi: float) -> StepFn:
    ux, last = _group_ends(x_sorted)
    cw = np.cumsum(w_sorted)[last] / n
    return StepFn(ux, cw, lo, hi, 0.0)


def _group_ends(x_sorted: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ux, first = np.unique(x_sorted, return_index=True)
    last = np.append(first[1:] - 1, x_sorted.size - 1)
    return ux, last


def build_density(samples, x_eval: float) -> MonotoneModel:
    """Grenander-type estimator of a nondecreasing density.

    ``Gamma`` is the empirical distribution function, ``Phi`` the identity
    and ``u = max(max sample, x_eval)``.
    """
    x = np.sort(np.asarray(samples, dtype=float).reshape(-1))
    x_eval = _check_x_eval(x_eval)
    if x.size == 0:
        raise EmptyData("no observations")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ValueError("samples must be nonnegative and finite")
    if x_eval <= 0:
        raise BoundaryEvaluation("evaluation point must be positive")
    n = x.size
    u = max(float(x[-1]), x_eval)
    gamma = _ecdf_step(x, np.ones(n), n, 0.0, u)
    return MonotoneModel("density", gamma, identity(0.0, u), u, x_eval, n,
                         x, np.ones(n), (0.0, u), u)


def build_isoreg(x, y, x_eval: float, support: tuple[float, float] | None = None,
                 ties: str = "average") -> MonotoneModel:
    """Isotonic (Brunk) regression estimator.

    ``Gamma`` is the scaled cumulative sum of responses ordered by ``x``,
    ``Phi`` the empirical distribution of ``x`` and ``u = 1``.

    Parameters
    ----------
    support : (lo, hi), optional
        Domain of the design.  ``lo`` must lie strictly below the smallest
        design point; by default it sits one average spacing below it and
        ``hi`` is the largest design point.
    ties : {"average", "error"}
        Tied design points are pooled (their responses averaged with
        multiplicity weights), or rejected.
    """
    xa = np.asarray(x, dtype=float).reshape(-1)
    ya = np.asarray(y, dtype=float).reshape(-1)
    if xa.size == 0:
        raise EmptyData("no observations")
    if xa.shape != ya.shape:
        raise ValueError("x and y must have equal length")
    if not (np.all(np.isfinite(xa)) and np.all(np.isfinite(ya))):
        raise ValueError("data must be finite")
    order = np.argsort(xa, kind="mergesort")
    xs, ys = xa[order], ya[order]
    ux, last = _group_ends(xs)
    if ux.size < xs.size and ties == "error":
        raise DuplicateAbscissae("tied design points")
    return _isoreg_from_sorted("isoreg", xs, ys, ux, last, _check_x_eval(x_eval), support)


def _default_support(ux: np.ndarray) -> tuple[float, float]:
    span = float(ux[-1] - ux[0])
    gap = span / ux.size if span > 0 else max(1.0, abs(float(ux[0])))
    return float(ux[0]) - gap, float(ux[-1])


def _isoreg_from_sorted(kind, xs, ys, ux, last, x_eval, support) -> MonotoneModel:
    n = xs.size
    lo, hi = _default_support(ux) if support is None else (float(support[0]), float(support[1]))
    if not (lo < ux[0] and hi >= ux[-1]):
        raise ValueError("support must satisfy lo < min(x) and hi >= max(x)")
    gamma = StepFn(ux, np.cumsum(ys)[last] / n, lo, hi, 0.0)
    phi = StepFn(ux, (last + 1.0) / n, lo, hi, 0.0)
    return MonotoneModel(kind, gamma, phi, 1.0, x_eval, n, xs, ys, (lo, hi), hi,
                         last.astype(np.int64))


def build_current_status(check_times, indicators, x_eval: float,
                         support: tuple[float, float] | None = None) -> MonotoneModel:
    """Distribution function from current-status data.

    Structurally the isotonic regression of the indicators on the
    inspection times.
    """
    d = np.asarray(indicators, dtype=float).reshape(-1)
    if d.size and not np.all((d == 0) | (d == 1)):
        raise ValueError("indicators must be 0 or 1")
    m = build_isoreg(check_times, d, x_eval, support)
    return _relabel(m, "current_status")


def _relabel(m: MonotoneModel, kind: str) -> MonotoneModel:
    return MonotoneModel(kind, m.gamma, m.phi, m.u_hat, m.x_eval, m.n, m.x, m.resp,
                         m.support, m.u_md, m.group_end)


def _survival_inputs(times, is_event):
    t = np.asarray(times, dtype=float).reshape(-1)
    d = np.asarray(is_event).reshape(-1).astype(float)
    if t.size == 0:
        raise EmptyData("no observations")
    if t.shape != d.shape:
        raise ValueError("times and flags must have equal length")
    if not np.all((d == 0) | (d == 1)):
        raise ValueError("event flags must be 0 or 1")
    order = np.argsort(t, kind="mergesort")
    return t[order], d[order]


def _one_minus_km(fit: SurvivalFit, hi: float) -> StepFn:
    sf = fit.survival
    return StepFn(sf.knots, 1.0 - sf.values, 0.0, hi, 0.0)


def build_censored_density(times, is_event, x_eval: float) -> MonotoneModel:
    """Monotone density under independent right censoring.

    ``Gamma = 1 - S`` with ``S`` the Kaplan-Meier estimate, ``Phi`` the
    identity and ``u = max(max time, x_eval)``.
    """
    t, d = _survival_inputs(times, is_event)
    x_eval = _check_x_eval(x_eval)
    if x_eval <= 0:
        raise BoundaryEvaluation("evaluation point must be positive")
    u = max(float(t[-1]), x_eval)
    fit = kaplan_meier(t, d)
    gamma = _one_minus_km(fit, u)
    return MonotoneModel("censored_density", gamma, identity(0.0, u), u, x_eval, t.size,
                         t, d, (0.0, u), u)


def integrated_survival(fit: SurvivalFit, hi: float) -> PiecewiseLinear:
    """``x -> integral_0^x S(v) dv`` as an exact piecewise-linear function."""
    sf = fit.survival
    inner = sf.knots[(sf.knots > 0) & (sf.knots < hi)]
    breaks = np.concatenate([[0.0], inner, [hi]])
    slopes = np.asarray(sf(breaks[:-1]), dtype=float)
    starts = np.concatenate([[0.0], np.cumsum(slopes * np.diff(breaks))[:-1]])
    return PiecewiseLinear(breaks, starts, slopes)


def build_hazard(times, is_event, x_eval: float) -> MonotoneModel:
    """Monotone hazard estimator.

    ``Gamma = 1 - S``, ``Phi(x) = integral_0^x S`` and ``u = Phi(u_md)`` with
    ``u_md = max(max time, x_eval)``.
    """
    t, d = _survival_inputs(times, is_event)
    x_eval = _check_x_eval(x_eval)
    if x_eval <= 0:
        raise BoundaryEvaluation("evaluation point must be positive")
    u_md = max(float(t[-1]), x_eval)
    fit = kaplan_meier(t, d)
    gamma = _one_minus_km(fit, u_md)
    phi = integrated_survival(fit, u_md)
    return MonotoneModel("hazard", gamma, phi, float(phi(u_md)), x_eval, t.size,
                         t, d, (0.0, u_md), u_md)


_BUILDERS_FROM_MODEL = {
    "density": lambda m, xe: build_density(m.x, xe),
    "isoreg": lambda m, xe: build_isoreg(m.x, m.resp, xe, m.support),
    "current_status": lambda m, xe: build_current_status(m.x, m.resp, xe, m.support),
    "censored_density": lambda m, xe: build_censored_density(m.x, m.resp, xe),
    "hazard": lambda m, xe: build_hazard(m.x, m.resp, xe),
}


def build_model(kind: str, data: dict, x_eval: float, **kwargs) -> MonotoneModel:
    """Dispatch on ``kind`` with column-named data.

    ``data`` holds ``x`` (density), ``x, y`` (isoreg), ``time, status``
    (censored density and hazard) or ``c, delta`` (current status).
    """
    if kind == "density":
        return build_density(data["x"], x_eval)
    if kind == "isoreg":
        return build_isoreg(data["x"], data["y"], x_eval, **kwargs)
    if kind == "censored_density":
        return build_censored_density(data["time"], data["status"], x_eval)
    if kind == "hazard":
        return build_hazard(data["time"], data["status"], x_eval)
    if kind == "current_status":
        return build_current_status(data["c"], data["delta"], x_eval, **kwargs)
    raise ValueError(f"unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def _step_diff(a: StepFn, b: StepFn) -> StepFn:
    knots = np.union1d(a.knots, b.knots)
    return StepFn(knots, np.asarray(a(knots)) - np.asarray(b(knots)), a.domain_lo, a.domain_hi,
                  a.value_before_first - b.value_before_first)


def reweighted_primitives(model: MonotoneModel, weights=None):
    """Bootstrap analogues ``(Gamma*, Phi*, u*)`` for exchangeable weights.

    Unit (or absent) weights reproduce the original primitives through the
    same arithmetic.  ``u*`` equals ``u`` except for the hazard, where it is
    ``Phi*(u_md)``, and for step ``Phi`` where it is the attained top value
    of ``Phi*`` (1 up to rounding).
    """
    n = model.n
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise ValueError("one weight per observation is required")
    lo, hi = model.support
    if model.kind in STEP_PHI_KINDS:
        ux, last = model.x[model.group_end], model.group_end
        gamma = StepFn(ux, np.cumsum(w * model.resp)[last] / n, lo, hi, 0.0)
        phi = StepFn(ux, np.cumsum(w)[last] / n, lo, hi, 0.0)
        return gamma, phi, float(phi(hi))
    if model.kind == "density":
        return _ecdf_step(model.x, w, n, 0.0, model.u_hat), model.phi, model.u_hat
    fit = kaplan_meier(model.x, model.resp, w)
    gamma = _one_minus_km(fit, model.u_md)
    if model.kind == "censored_density":
        return gamma, model.phi, model.u_hat
    phi = integrated_survival(fit, model.u_md)
    return gamma, phi, float(phi(model.u_md))


def composite(model: MonotoneModel, weights=None, theta: float = 0.0, pert=None,
              reshaped: bool = False) -> tuple[EvalFn, float, float]:
    """Objective composite for the estimator or one bootstrap draw.

    Returns ``(h, u, y0)``: the composite on ``[0, u]`` and the level
    ``y0 = Phi*(x_eval)`` at which its minorant is differentiated.  With
    ``reshaped`` the composite is built from
    ``Gamma* - Gamma + theta * Phi + pert(. - x_eval)``.
    """
    gamma_s, phi_s, u = reweighted_primitives(model, weights)
    if reshaped:
        base = _step_diff(gamma_s, model.gamma)
        h = EvalFn(base, phi_s, theta, model.phi, pert, model.x_eval)
    else:
        h = EvalFn(gamma_s, phi_s)
    y0 = float(phi_s(model.x_eval))
    return h, u, y0


def _check_level(model: MonotoneModel, y0: float, u: float) -> None:
    if not (0.0 < y0 <= u):
        raise BoundaryEvaluation(
            f"Phi(x) = {y0!r} is not inside (0, {u!r}]; the estimator is undefined there")


def _check_design_range(model: MonotoneModel) -> None:
    if model.kind in STEP_PHI_KINDS:
        if not (model.x[0] <= model.x_eval <= model.x[-1]):
            raise BoundaryEvaluation("evaluation point outside the range of the design")


def weighted_slope(model: MonotoneModel, weights=None, theta: float = 0.0, pert=None,
                   reshaped: bool = False, grid_points: int = DEFAULT_GRID_POINTS) -> float:
    """Left slope of the minorant of one (possibly reweighted) composite.

    ``weights`` are aligned with the model's stored (sorted) observations.
    """
    _check_design_range(model)
    if model.kind in STEP_PHI_KINDS:
        w = np.ones((1, model.n)) if weights is None else np.asarray(weights, dtype=float)[None, :]
        out = isotonic_slopes(model, w, theta, pert, reshaped)[0]
        if np.isnan(out):
            raise BoundaryEvaluation("bootstrap level Phi*(x) is zero")
        return float(out)
    h, u, y0 = composite(model, weights, theta, pert, reshaped)
    _check_level(model, y0, u)
    return composite_left_slope(h, 0.0, u, y0, grid_points, model.x_eval).slope


def isotonic_slopes(model: MonotoneModel, weights: np.ndarray, theta: float = 0.0, pert=None,
                    reshaped: bool = False) -> np.ndarray:
    """Batched slopes for step-``Phi`` kinds (one row of ``weights`` per draw).

    NaN marks draws whose level ``Phi*(x_eval)`` is zero.
    """
    n = model.n
    last = model.group_end
    ux = model.x[last]
    gamma_hat = np.cumsum(model.resp)[last] / n
    phi_hat = (last + 1.0) / n
    if reshaped and pert is not None:
        pv = np.asarray(pert(ux - model.x_eval), dtype=float)
        p_lo = float(pert(model.support[0] - model.x_eval))
    else:
        pv = np.zeros(ux.size)
        p_lo = 0.0
    j = int(np.searchsorted(ux, model.x_eval, side="right")) - 1
    w = np.ascontiguousarray(weights, dtype=float)
    if w.ndim != 2 or w.shape[1] != n:
        raise ValueError("weights must have shape (B, n)")
    return _kernels.isotonic_draws(np.ascontiguousarray(model.resp, dtype=float), last,
                                   phi_hat, gamma_hat, pv, p_lo, float(theta) if reshaped else 0.0,
                                   w, j, bool(reshaped), _kernels.HULL_RTOL)


def generalized_grenander(model: MonotoneModel, grid_points: int = DEFAULT_GRID_POINTS,
                          method: str = "fast") -> float:
    """Estimate ``theta(x_eval)``.

    Parameters
    ----------
    method : {"fast", "composite"}
        For step-``Phi`` kinds, ``"fast"`` runs the compiled cumulative-sum
        diagram used by the bootstrap; ``"composite"`` goes through the
        generic composite, lsc and hull route.  Other kinds always use the
        generic route.
    """
    if method == "composite" or model.kind not in STEP_PHI_KINDS:
        _check_design_range(model)
        h, u, y0 = composite(model)
        _check_level(model, y0, u)
        return composite_left_slope(h, 0.0, u, y0, grid_points, model.x_eval).slope
    if method != "fast":
        raise ValueError(f"unknown method {method!r}")
    return weighted_slope(model)
