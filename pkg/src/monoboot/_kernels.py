"""Compiled inner loops (lower hulls and batched isotonic bootstrap draws)."""

from __future__ import annotations

import numpy as np
from numba import njit

HULL_RTOL = 1e-12


@njit(cache=True, nogil=True)
def hull_indices(y, g, rtol):
    """Indices of the lower convex hull of points sorted by ``y``.

    Monotone-chain scan; a middle point is discarded when it lies on or
    above the chord of its neighbours, up to ``rtol`` relative slack, so
    collinear vertices never survive.
    """
    n = y.shape[0]
    idx = np.empty(n, np.int64)
    k = 0
    for i in range(n):
        while k >= 2:
            a = idx[k - 2]
            b = idx[k - 1]
            dy1 = y[b] - y[a]
            dg1 = g[b] - g[a]
            dy2 = y[i] - y[a]
            dg2 = g[i] - g[a]
            cross = dy1 * dg2 - dg1 * dy2
            scale = abs(dy1 * dg2) + abs(dg1 * dy2)
            if cross <= rtol * scale:
                k -= 1
            else:
                break
        idx[k] = i
        k += 1
    return idx[:k]


@njit(cache=True, nogil=True)
def _left_slope_at(y, g, pos, rtol, work):
    # Lower hull restricted to the first ``len(y)`` points, then the slope of
    # the segment whose right end is the first vertex at index >= pos.
    n = y.shape[0]
    k = 0
    for i in range(n):
        while k >= 2:
            a = work[k - 2]
            b = work[k - 1]
            dy1 = y[b] - y[a]
            dg1 = g[b] - g[a]
            dy2 = y[i] - y[a]
            dg2 = g[i] - g[a]
            cross = dy1 * dg2 - dg1 * dy2
            scale = abs(dy1 * dg2) + abs(dg1 * dy2)
            if cross <= rtol * scale:
                k -= 1
            else:
                break
        work[k] = i
        k += 1
    for v in range(1, k):
        if work[v] >= pos:
            a = work[v - 1]
            b = work[v]
            return (g[b] - g[a]) / (y[b] - y[a])
    return np.nan


@njit(cache=True, nogil=True)
def isotonic_draws(y, group_end, phi_hat, gamma_hat, pert, pert_lo, theta,
                   weights, j_group, reshaped, rtol):
    """Bootstrap slopes for the isotonic-regression composite.

    Parameters
    ----------
    y : (n,) responses sorted by design point.
    group_end : (G,) index of the last observation in each tied group.
    phi_hat, gamma_hat : (G,) original Phi and Gamma at each group.
    pert : (G,) perturbation values M(x_g - xbar); pert_lo is M(lo - xbar).
    theta : original slope estimate added as ``theta * phi_hat``.
    weights : (B, n) exchangeable weights.
    j_group : group index of the evaluation point (last x_g <= xbar).
    reshaped : add the centring and perturbation terms when true.

    Returns
    -------
    (B,) array; NaN marks a draw whose evaluation point hit the boundary.
    """
    B = weights.shape[0]
    n = y.shape[0]
    G = group_end.shape[0]
    out = np.empty(B)
    yy = np.empty(G + 1)
    gg = np.empty(G + 1)
    work = np.empty(G + 1, np.int64)
    for b in range(B):
        yy[0] = 0.0
        if reshaped:
            gg[0] = pert_lo
        else:
            gg[0] = 0.0
        cw = 0.0
        cwy = 0.0
        m = 1
        pos = -1
        start = 0
        for gi in range(G):
            wsum = 0.0
            for i in range(start, group_end[gi] + 1):
                cw += weights[b, i]
                cwy += weights[b, i] * y[i]
                wsum += weights[b, i]
            start = group_end[gi] + 1
            if wsum > 0.0:
                yy[m] = cw / n
                if reshaped:
                    gg[m] = cwy / n - gamma_hat[gi] + theta * phi_hat[gi] + pert[gi]
                else:
                    gg[m] = cwy / n
                m += 1
            if gi == j_group:
                pos = m - 1
        if pos <= 0:
            out[b] = np.nan
        else:
            out[b] = _left_slope_at(yy[:m], gg[:m], pos, rtol, work)
    return out
