"""Greatest convex minorants of one-dimensional composites.

The module provides the small amount of function algebra needed by the
estimators: right-continuous piecewise-linear functions (step functions are
the special case with zero slopes), their generalized inverses, composites
of the form ``y -> Gamma(Phi^-(y))`` with optional affine and polynomial
terms, lower convex hulls of finite evaluation sets and left derivatives of
those hulls.  A brute-force checker of the switch relation between left
derivatives of a minorant and argmax locations is included as well.

Conventions
-----------
The minorant of a composite is always taken over the closed range set
``cl(Phi(I)) ∩ [lo, hi]``.  When ``Phi`` is continuous this is the whole
interval; when ``Phi`` is a step function it is the finite set of attained
values, so the evaluation set is the classical cumulative-sum diagram.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._kernels import HULL_RTOL, hull_indices
from .errors import (
    AboveRange,
    InsufficientPoints,
    InvalidSwitchInstance,
    OutOfDomain,
    UnsortedInput,
)

DEFAULT_GRID_POINTS = 2048
TIE_RTOL = 1e-12


# ---------------------------------------------------------------------------
# piecewise-linear functions
# ---------------------------------------------------------------------------


class PiecewiseLinear:
    """Right-continuous piecewise-linear function on ``[lo, hi]``.

    On ``[breaks[i], breaks[i+1])`` the function equals
    ``starts[i] + slopes[i] * (x - breaks[i])``; at ``hi`` it equals
    ``end_value``.  Outside the domain it is continued linearly using the
    first and last pieces (constant continuation for step functions).

    Parameters
    ----------
    breaks : array_like
        Strictly increasing, ``breaks[0] = lo`` and ``breaks[-1] = hi``.
    starts, slopes : array_like
        One entry per piece.
    end_value : float, optional
        Value at ``hi``; defaults to the continuation of the last piece.
    """

    def __init__(self, breaks, starts, slopes, end_value: float | None = None):
        b = np.asarray(breaks, dtype=float)
        s = np.asarray(starts, dtype=float)
        k = np.asarray(slopes, dtype=float)
        if b.ndim != 1 or b.size < 2:
            raise ValueError("need at least one piece")
        if np.any(np.diff(b) <= 0):
            raise UnsortedInput("breaks must be strictly increasing")
        if s.shape != (b.size - 1,) or k.shape != (b.size - 1,):
            raise ValueError("starts and slopes need one entry per piece")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(s)) and np.all(np.isfinite(k))):
            raise ValueError("non-finite piece description")
        self.breaks = b
        self.starts = s
        self.slopes = k
        self._ends = s + k * np.diff(b)
        self.end_value = float(self._ends[-1] if end_value is None else end_value)

    # -- basic properties -------------------------------------------------
    @property
    def lo(self) -> float:
        return float(self.breaks[0])

    @property
    def hi(self) -> float:
        return float(self.breaks[-1])

    @property
    def piece_ends(self) -> np.ndarray:
        """Left limits at the right end of every piece."""
        return self._ends

    def is_step(self) -> bool:
        return bool(np.all(self.slopes == 0.0))

    def is_nondecreasing(self) -> bool:
        if np.any(self.slopes < 0):
            return False
        seq = np.empty(2 * self.starts.size + 1)
        seq[0:-1:2] = self.starts
        seq[1:-1:2] = self._ends
        seq[-1] = self.end_value
        return bool(np.all(np.diff(seq) >= 0))

    def jump_points(self) -> np.ndarray:
        """Abscissae (interior breaks and ``hi``) where the function jumps."""
        left = self._ends
        right = np.append(self.starts[1:], self.end_value)
        return self.breaks[1:][left != right]

    def kink_points(self) -> np.ndarray:
        """Interior breaks where the slope changes."""
        return self.breaks[1:-1][np.diff(self.slopes) != 0]

    # -- evaluation -------------------------------------------------------
    def _piece(self, x: np.ndarray, side: str) -> np.ndarray:
        i = np.searchsorted(self.breaks, x, side=side) - 1
        return np.clip(i, 0, self.starts.size - 1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        i = self._piece(x, "right")
        out = self.starts[i] + self.slopes[i] * (x - self.breaks[i])
        at_hi = x == self.breaks[-1]
        above = x > self.breaks[-1]
        out = np.where(at_hi, self.end_value, out)
        out = np.where(above, self.end_value + self.slopes[-1] * (x - self.breaks[-1]), out)
        return out if out.ndim else float(out)

    def left_limit(self, x):
        """Limit from the left (equals the value at or below ``lo``)."""
        x = np.asarray(x, dtype=float)
        i = self._piece(x, "left")
        out = self.starts[i] + self.slopes[i] * (x - self.breaks[i])
        above = x > self.breaks[-1]
        out = np.where(above, self.end_value + self.slopes[-1] * (x - self.breaks[-1]), out)
        return out if out.ndim else float(out)

    def left_slope(self, x):
        """Slope of the piece immediately to the left of ``x``."""
        x = np.asarray(x, dtype=float)
        out = self.slopes[self._piece(x, "left")]
        return out if out.ndim else float(out)

    def sup(self) -> float:
        return float(max(np.max(self.starts), np.max(self._ends), self.end_value))

    def __repr__(self) -> str:
        return (f"{type(self).__name__}(breaks={self.breaks.tolist()}, "
                f"starts={self.starts.tolist()}, slopes={self.slopes.tolist()}, "
                f"end_value={self.end_value})")


class StepFn(PiecewiseLinear):
    """Right-continuous step function with explicit knots.

    Parameters
    ----------
    knots : array_like
        Strictly increasing jump abscissae inside ``[domain_lo, domain_hi]``.
    values : array_like
        ``values[i]`` is the value on ``[knots[i], knots[i+1])``.
    domain_lo, domain_hi : float
    value_before_first : float
        Value on ``[domain_lo, knots[0])``.
    """

    def __init__(self, knots, values, domain_lo: float, domain_hi: float,
                 value_before_first: float = 0.0):
        kn = np.asarray(knots, dtype=float)
        vals = np.asarray(values, dtype=float)
        if kn.shape != vals.shape or kn.ndim != 1:
            raise ValueError("knots and values must be 1-d arrays of equal length")
        if kn.size and np.any(np.diff(kn) <= 0):
            raise UnsortedInput("knots must be strictly increasing")
        if not domain_lo < domain_hi:
            raise ValueError("domain_lo must be smaller than domain_hi")
        if kn.size and (kn[0] < domain_lo or kn[-1] > domain_hi):
            raise ValueError("knots must lie inside the domain")
        self.knots = kn
        self.values = vals
        self.domain_lo = float(domain_lo)
        self.domain_hi = float(domain_hi)
        self.value_before_first = float(value_before_first)

        breaks = [self.domain_lo]
        starts = [self.value_before_first]
        end_value = None
        for k, v in zip(kn, vals):
            if k == self.domain_lo:
                starts[0] = v
            elif k == self.domain_hi:
                end_value = v
            else:
                breaks.append(k)
                starts.append(v)
        breaks.append(self.domain_hi)
        super().__init__(breaks, starts, np.zeros(len(starts)), end_value)

    def attained_values(self) -> np.ndarray:
        """Distinct values taken on the domain, ascending if monotone."""
        vals = np.append(self.starts, self.end_value)
        return np.unique(vals)


def identity(lo: float, hi: float) -> PiecewiseLinear:
    """The identity map on ``[lo, hi]``."""
    return PiecewiseLinear([lo, hi], [lo], [1.0])


# ---------------------------------------------------------------------------
# generalized inverse
# ---------------------------------------------------------------------------


def generalized_inverse(f: PiecewiseLinear, y):
    """Return ``inf{u in [lo, hi] : f(u) >= y}`` for a nondecreasing ``f``.

    Parameters
    ----------
    f : PiecewiseLinear
        Nondecreasing, right-continuous.
    y : float or array_like

    Raises
    ------
    AboveRange
        If some ``y`` exceeds ``sup f``.
    """
    y_arr = np.asarray(y, dtype=float)
    m = f.starts.size
    seq = np.empty(2 * m + 1)
    seq[0:-1:2] = f.starts
    seq[1:-1:2] = f.piece_ends
    seq[-1] = f.end_value
    seq = np.maximum.accumulate(seq)
    p = np.searchsorted(seq, y_arr, side="left")
    if np.any(p > 2 * m):
        raise AboveRange(f"level {np.max(y_arr)!r} exceeds sup f = {f.end_value!r}")
    piece = np.minimum(p // 2, m - 1)
    at_start = (p % 2 == 0) & (p < 2 * m)
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = f.breaks[piece] + (y_arr - f.starts[piece]) / f.slopes[piece]
    out = np.where(p == 2 * m, f.breaks[-1], np.where(at_start, f.breaks[piece], inner))
    return out if out.ndim else float(out)


def right_inverse(f: PiecewiseLinear, y):
    """Return ``inf{u in [lo, hi] : f(u) > y}`` (``hi`` when no such ``u``)."""
    y_arr = np.asarray(y, dtype=float)
    m = f.starts.size
    seq = np.empty(2 * m + 1)
    seq[0:-1:2] = f.starts
    seq[1:-1:2] = f.piece_ends
    seq[-1] = f.end_value
    seq = np.maximum.accumulate(seq)
    p = np.searchsorted(seq, y_arr, side="right")
    p = np.minimum(p, 2 * m)
    piece = np.minimum(p // 2, m - 1)
    at_start = (p % 2 == 0) & (p < 2 * m)
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = f.breaks[piece] + (y_arr - f.starts[piece]) / f.slopes[piece]
    out = np.where(p == 2 * m, f.breaks[-1], np.where(at_start, f.breaks[piece], inner))
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# hulls
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Hull:
    """Lower convex hull of a finite point set.

    Attributes
    ----------
    vertices : ndarray, shape (k, 2)
        ``(y, g)`` pairs with ``y`` ascending.
    indices : ndarray of int
        Position of every vertex in the input point list.
    """

    vertices: np.ndarray
    indices: np.ndarray = field(repr=False)

    @property
    def slopes(self) -> np.ndarray:
        v = self.vertices
        return np.diff(v[:, 1]) / np.diff(v[:, 0])

    def __call__(self, y):
        return np.interp(y, self.vertices[:, 0], self.vertices[:, 1])


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        pts = pts.reshape(-1, 2)
    return pts


def lower_hull(points) -> Hull:
    """Greatest convex minorant of a finite evaluation set.

    Parameters
    ----------
    points : array_like, shape (n, 2)
        ``(y, g)`` pairs with strictly increasing ``y``.

    Returns
    -------
    Hull
        Vertices are input points; collinear interior vertices are dropped.
    """
    pts = _as_points(points)
    if pts.shape[0] < 2:
        raise InsufficientPoints("a hull needs at least two points")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    y = np.ascontiguousarray(pts[:, 0])
    g = np.ascontiguousarray(pts[:, 1])
    if np.any(np.diff(y) <= 0):
        raise UnsortedInput("abscissae must be strictly increasing")
    idx = hull_indices(y, g, HULL_RTOL)
    return Hull(pts[idx].copy(), idx)


def left_derivative(hull: Hull, y: float) -> float:
    """Left derivative of the hull at ``y``.

    At or left of the first vertex the first slope is returned.
    """
    v = hull.vertices[:, 0]
    if y < v[0] or y > v[-1] or not np.isfinite(y):
        raise OutOfDomain(f"{y!r} outside [{v[0]!r}, {v[-1]!r}]")
    k = int(np.searchsorted(v, y, side="left"))
    k = max(k, 1)
    return float(hull.slopes[k - 1])


# ---------------------------------------------------------------------------
# composites
# ---------------------------------------------------------------------------


class EvalFn:
    """Composite ``y -> base(x) + a * affine(x) + poly(x - center)``, ``x = phi^-(y)``.

    Parameters
    ----------
    base : PiecewiseLinear
        Usually a step function (an estimated primitive or a difference of
        two of them).
    phi : PiecewiseLinear
        Nondecreasing map whose generalized inverse is composed in.
    affine_slope : float
        Coefficient ``a`` of the affine term.
    affine : PiecewiseLinear, optional
        Function multiplied by ``affine_slope``; omitted when ``None``.
    poly : callable, optional
        Convex perturbation with a ``derivative`` method.
    center : float
    """

    def __init__(self, base: PiecewiseLinear, phi: PiecewiseLinear,
                 affine_slope: float = 0.0, affine: PiecewiseLinear | None = None,
                 poly: Callable | None = None, center: float = 0.0):
        self.base = base
        self.phi = phi
        self.affine_slope = float(affine_slope)
        self.affine = affine
        self.poly = poly
        self.center = float(center)
        self.discrete = phi.is_step()

    def _smooth(self, x):
        out = np.zeros_like(np.asarray(x, dtype=float))
        if self.affine is not None and self.affine_slope != 0.0:
            out = out + self.affine_slope * self.affine(x)
        if self.poly is not None:
            out = out + self.poly(np.asarray(x, dtype=float) - self.center)
        return out

    def at_x(self, x):
        """Value of the un-composed function at abscissa ``x``."""
        return self.base(x) + self._smooth(x)

    def __call__(self, y):
        x = generalized_inverse(self.phi, y)
        out = self.at_x(x)
        return out if np.ndim(out) else float(out)

    def left_limit(self, y):
        y = np.asarray(y, dtype=float)
        x = np.asarray(generalized_inverse(self.phi, y))
        moves = np.asarray(self.phi.left_limit(x)) >= y
        val = np.where(moves, self.base.left_limit(x), self.base(x)) + self._smooth(x)
        return val if val.ndim else float(val)

    def right_limit(self, y):
        y = np.asarray(y, dtype=float)
        x = np.asarray(right_inverse(self.phi, y))
        val = self.at_x(x)
        return val if np.ndim(val) else float(val)

    def smooth_left_slope(self, y: float, x: float | None = None) -> float:
        """Left derivative in ``y`` of the non-step part at ``y``.

        ``x`` may supply a known abscissa with ``phi(x) = y``; it is used when
        ``phi`` increases just left of it, which makes it equal to
        ``phi^-(y)`` without the rounding of a numerical inversion.
        """
        if x is None or float(self.phi(x)) != y:
            x = float(generalized_inverse(self.phi, y))
        dphi = float(self.phi.left_slope(x))
        if dphi <= 0.0:
            return float("nan")
        # ratio first, so that affine == phi gives back affine_slope exactly
        out = 0.0
        if self.affine is not None and self.affine_slope != 0.0:
            out += self.affine_slope * (float(self.affine.left_slope(x)) / dphi)
        if self.poly is not None:
            out += float(self.poly.derivative(x - self.center)) / dphi
        return out

    def atoms(self, lo: float, hi: float) -> np.ndarray:
        """Attained values of ``phi`` inside ``[lo, hi]`` (step ``phi`` only)."""
        vals = np.unique(np.append(self.phi.starts, self.phi.end_value))
        return vals[(vals >= lo) & (vals <= hi)]

    def breakpoints(self, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
        """Images of jump and kink abscissae inside ``[lo, hi]``.

        Returns
        -------
        jumps, kinks : ndarray
            ``y`` locations where the composite may jump, and where only
            its slope may change.
        """
        jump_x = self.base.jump_points()
        kink_x = [self.phi.kink_points(), self.phi.jump_points(), self.base.kink_points()]
        if self.affine is not None:
            kink_x += [self.affine.kink_points(), self.affine.jump_points()]
        jumps = np.asarray(self.phi(jump_x), dtype=float).reshape(-1)
        kinks = np.asarray(self.phi(np.concatenate(kink_x)), dtype=float).reshape(-1)
        # flat stretches of phi make phi^- jump
        flat = self.phi.starts[(self.phi.slopes == 0.0)]
        jumps = np.concatenate([jumps, flat])
        keep = lambda a: np.unique(a[(a > lo) & (a < hi)])
        return keep(jumps), keep(kinks)


def lsc_breakpoint_values(h, breakpoints: Sequence[float], lo: float, hi: float) -> np.ndarray:
    """Evaluation set of the lower semicontinuous minorant of ``h``.

    Interior breakpoints receive ``min(h(b-), h(b), h(b+))`` and the
    endpoints keep their raw values.  For a composite through a step
    ``phi`` the range set is finite, every point is isolated and raw values
    are returned.

    Returns
    -------
    ndarray, shape (k, 2)
    """
    b = np.asarray(breakpoints, dtype=float)
    if b.size and (np.any(np.diff(b) < 0) or b[0] < lo or b[-1] > hi):
        raise UnsortedInput("breakpoints must be sorted inside [lo, hi]")
    b = np.unique(np.concatenate([[lo], b, [hi]]))
    vals = np.asarray(h(b), dtype=float).reshape(-1)
    if not (isinstance(h, EvalFn) and h.discrete):
        inner = slice(1, b.size - 1)
        left = np.asarray(h.left_limit(b[inner]), dtype=float).reshape(-1)
        if isinstance(h, EvalFn):
            right = np.asarray(h.right_limit(b[inner]), dtype=float).reshape(-1)
        else:
            right = vals[inner]
        vals[inner] = np.minimum(np.minimum(left, vals[inner]), right)
    return np.column_stack([b, vals])


@dataclass(frozen=True)
class SlopeResult:
    """Left slope of a minorant together with its evaluation set."""

    slope: float
    points: np.ndarray
    hull: Hull
    refined: bool


def composite_left_slope(h: EvalFn, lo: float, hi: float, y0: float,
                         grid_points: int = DEFAULT_GRID_POINTS,
                         x0: float | None = None) -> SlopeResult:
    """Left derivative at ``y0`` of the minorant of ``h`` over the range set.

    For a step ``phi`` the evaluation set is the attained values of ``phi``
    in ``[lo, hi]``.  Otherwise it is the union of breakpoints, a uniform
    grid of ``grid_points`` abscissae and ``y0``, each carrying its lower
    semicontinuous value.  When the hull segment ending at ``y0`` spans a
    stretch free of breakpoints, the chord slope is replaced by the exact
    left derivative of the smooth part, which is the limit of the chord as
    the grid is refined.  ``x0``, when given, is an abscissa with
    ``phi(x0) = y0`` used for that derivative.
    """
    if h.discrete:
        pts_y = h.atoms(lo, hi)
        if y0 not in pts_y:
            raise OutOfDomain("evaluation level is not an attained value of phi")
        pts = np.column_stack([pts_y, np.asarray(h(pts_y), dtype=float).reshape(-1)])
        hull = lower_hull(pts)
        return SlopeResult(left_derivative(hull, y0), pts, hull, False)

    jumps, kinks = h.breakpoints(lo, hi)
    grid = np.linspace(lo, hi, int(grid_points)) if grid_points and grid_points >= 2 else np.array([lo, hi])
    ys = np.unique(np.concatenate([grid, jumps, kinks, [y0]]))
    pts = lsc_breakpoint_values(h, ys[1:-1], lo, hi)
    hull = lower_hull(pts)
    slope = left_derivative(hull, y0)
    refined = False
    v = hull.vertices[:, 0]
    k = int(np.searchsorted(v, y0, side="left"))
    if 1 <= k < v.size + 1 and k < v.size and v[k] == y0:
        a = v[k - 1]
        clean = not np.any((jumps >= a) & (jumps <= y0)) and not np.any((kinks > a) & (kinks < y0))
        if clean:
            s = h.smooth_left_slope(y0, x0)
            if np.isfinite(s):
                slope, refined = s, True
    return SlopeResult(float(slope), pts, hull, refined)


# ---------------------------------------------------------------------------
# switch relation
# ---------------------------------------------------------------------------


def _attained(phi: PiecewiseLinear, v: float) -> bool:
    """Whether the level ``v`` is a value taken by ``phi``."""
    if v > phi.sup():
        return False
    x = float(generalized_inverse(phi, v))
    fx = float(phi(x))
    return abs(fx - v) <= TIE_RTOL * max(1.0, abs(v))


def _range_pieces(phi: PiecewiseLinear, lo: float, hi: float):
    """Closure of ``phi(I) ∩ [lo, hi]`` as intervals and points.

    Returns ``(pieces, closed)`` where ``pieces`` holds
    ``(y_start, y_end, x_start, slope)`` tuples (isolated points have
    ``slope == 0``) and ``closed`` tells whether the set was already closed.
    """
    pieces = []
    closed = True
    for i in range(phi.starts.size):
        s, e, k = phi.starts[i], phi.piece_ends[i], phi.slopes[i]
        if k == 0.0:
            if lo <= s <= hi:
                pieces.append((s, s, phi.breaks[i], 0.0))
            continue
        a, b = max(s, lo), min(e, hi)
        if a > b:
            continue
        if b == e and not _attained(phi, e):
            closed = False
        pieces.append((a, b, phi.breaks[i] + (a - s) / k, k))
    if lo <= phi.end_value <= hi:
        pieces.append((phi.end_value, phi.end_value, phi.breaks[-1], 0.0))
    return pieces, closed


def _closed_range_points(gamma: PiecewiseLinear, phi: PiecewiseLinear, lo: float, hi: float):
    """Breakpoints of ``gamma ∘ phi^-`` on the closed range set, with lsc values.

    Between consecutive returned levels the composite is linear on the range
    set, so the hull of these points is the exact minorant.
    """
    pieces, closed = _range_pieces(phi, lo, hi)
    ys = []
    for a, b, x0, k in pieces:
        ys += [a, b]
        if k > 0:
            xb = gamma.breaks[(gamma.breaks > x0) & (gamma.breaks < x0 + (b - a) / k)]
            ys += (a + k * (xb - x0)).tolist()
    ys = np.unique(np.asarray(ys, dtype=float))
    vals = np.empty(ys.size)
    for n_, y in enumerate(ys):
        cands = []
        for a, b, x0, k in pieces:
            if k > 0 and a <= y <= b:
                x = x0 + (y - a) / k
                if y > a:
                    cands.append(float(gamma.left_limit(x)))
                if y < b:
                    cands.append(float(gamma(x)))
        if _attained(phi, y):
            cands.append(float(gamma(generalized_inverse(phi, y))))
        vals[n_] = min(cands)
    return np.column_stack([ys, vals]), closed


def _sup_argmax(x: np.ndarray, obj: np.ndarray) -> float:
    top = np.max(obj)
    scale = max(1.0, float(np.max(np.abs(obj))))
    hits = x[obj >= top - TIE_RTOL * scale]
    return float(np.max(hits))


def _gsr_rhs(gamma: PiecewiseLinear, phi: PiecewiseLinear, lo: float, hi: float, t: float) -> float:
    """``sup argmax`` of ``t*phi - gamma`` over ``phi^-([lo, hi])``, no regularization.

    The candidate set is a union of points and intervals that may be open
    on the right, so the supremum of the objective need not be attained.
    An empty argmax yields ``-inf``.
    """
    levels = [lo, hi] + [v for v in np.append(phi.starts, phi.end_value) if lo <= v <= hi]
    pts = set(np.asarray(generalized_inverse(phi, np.asarray(levels)), dtype=float).tolist())
    limits = []  # (value, x, constant_piece)
    for i in range(phi.starts.size):
        s, e, k = phi.starts[i], phi.piece_ends[i], phi.slopes[i]
        if k == 0.0:
            continue
        a, b = max(s, lo), min(e, hi)
        if a >= b:
            continue
        x0 = phi.breaks[i]
        xa, xb = x0 + (a - s) / k, x0 + (b - s) / k
        right_open = b == e
        inner = gamma.breaks[(gamma.breaks > xa) & (gamma.breaks < xb)].tolist()
        grid = [xa] + inner + [xb]
        left_closed = float(generalized_inverse(phi, a)) == xa
        for left, right in zip(grid[:-1], grid[1:]):
            val_left = t * (s + k * (left - x0)) - float(gamma(left))
            if left != xa or left_closed:
                pts.add(left)
            else:
                limits.append((val_left, left, False))
            lim = t * (s + k * (right - x0)) - float(gamma.left_limit(right))
            limits.append((lim, right, abs(lim - val_left) <= TIE_RTOL * max(1.0, abs(lim))))
            if not (right_open and right == xb):
                pts.add(right)
    xs = np.asarray(sorted(pts))
    obj = t * np.asarray(phi(xs)) - np.asarray(gamma(xs))
    best = float(np.max(obj))
    sup_lim = max((v for v, _, _ in limits), default=-np.inf)
    scale = max(1.0, abs(best))
    if sup_lim > best + TIE_RTOL * scale:
        return -np.inf
    out = _sup_argmax(xs, obj)
    for v, xr, const in limits:
        if const and v >= best - TIE_RTOL * scale:
            out = max(out, xr)
    return out


def switch_check(gamma: PiecewiseLinear, phi: PiecewiseLinear, l: float, u: float,
                 x: float, t: float, variant: str = "lemma") -> tuple[bool, bool]:
    """Evaluate both sides of the switch relation at ``(x, t)``.

    The left side is ``slope(Phi(x)) > t`` where ``slope`` is the left
    derivative of the minorant of ``gamma ∘ phi^-`` over the closed range
    set of ``phi`` inside ``[l, u]``, computed with the hull machinery.

    Parameters
    ----------
    variant : {"lemma", "uncorrected", "regularized"}
        ``"lemma"`` enumerates ``sup argmax {t*phi - lsc(gamma)}`` over the
        finite set ``phi^-([l, u])`` and compares it with
        ``phi^-(phi(x))``; it requires step functions so that both range
        sets are closed.  ``"uncorrected"`` drops the lsc regularization and
        the closedness requirement (and may meet an empty argmax, whose
        supremum is taken as ``-inf``).  ``"regularized"`` works on the
        closure of the range set with the lsc composite and compares the
        maximizing level with ``phi(x)``.

    Returns
    -------
    (lhs, rhs) : tuple of bool
    """
    if not l < u:
        raise InvalidSwitchInstance("need l < u")
    if not phi.is_nondecreasing():
        raise InvalidSwitchInstance("phi must be nondecreasing")
    if not (_attained(phi, l) and _attained(phi, u)):
        raise InvalidSwitchInstance("l and u must be attained values of phi")
    y0 = float(phi(x))
    if not l < y0 < u:
        raise InvalidSwitchInstance("phi(x) must lie strictly inside (l, u)")

    pts, closed = _closed_range_points(gamma, phi, l, u)
    hull = lower_hull(pts)
    lhs = left_derivative(hull, y0) > t

    if variant == "lemma":
        if not (phi.is_step() and gamma.is_step()):
            raise InvalidSwitchInstance(
                "closedness of the range sets is only certified for step functions")
        attained = np.append(phi.starts, phi.end_value)
        levels = np.unique(attained[(attained >= l) & (attained <= u)])
        xs = np.unique(np.asarray(generalized_inverse(phi, levels), dtype=float))
        obj = t * np.asarray(phi(xs)) - np.asarray(gamma(xs))
        rhs = _sup_argmax(xs, obj) < float(generalized_inverse(phi, y0))
    elif variant == "uncorrected":
        rhs = _gsr_rhs(gamma, phi, l, u, t) < float(generalized_inverse(phi, y0))
    elif variant == "regularized":
        obj = t * pts[:, 0] - pts[:, 1]
        rhs = _sup_argmax(pts[:, 0], obj) < y0
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return bool(lhs), bool(rhs)
