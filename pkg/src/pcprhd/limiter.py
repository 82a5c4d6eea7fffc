"""Two-step positivity/causality limiter acting on reconstructed point values.

The limiter rescales a polynomial about its cell mean, so applying it to the
polynomial's values on the decision point set is equivalent to applying it to
the coefficients. Point arrays put the six edge Gauss points first; the
axisymmetric variant appends three interior quadrature points.

``pcp_limit_cell`` is the numpy reference; ``limit_batch`` the compiled kernel.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _kernels as K
from .physics import AdmissibilityError, g_fn, is_admissible

OMEGA_HAT = 1.0 / 6.0
NEDGE = 6
EPS_FLOOR = 1e-13


@dataclass
class LimiterStats:
    cells_limited: int
    theta_D_min: float
    theta_g_min: float
    ratio: float

    @classmethod
    def from_thetas(cls, theta):
        theta = np.asarray(theta)
        limited = int(np.count_nonzero((theta < 1.0).any(axis=1))) if len(theta) else 0
        return cls(limited, float(theta[:, 0].min(initial=1.0)), float(theta[:, 1].min(initial=1.0)),
                   limited / max(len(theta), 1))


def combination_state(mean, points):
    """(U - (2/3) w1 sum_jq w_q P_jq) / (1 - 2 w1) for the six edge Gauss values."""
    pts = np.asarray(points)[..., :NEDGE, :]
    return (np.asarray(mean) - (2.0 / 3.0) * OMEGA_HAT * 0.5 * pts.sum(axis=-2)) / (1.0 - 2.0 * OMEGA_HAT)


def _theta(bar, low, eps):
    if bar - low <= 0.0:
        return 1.0
    return min(abs((bar - eps) / (bar - low)), 1.0)


def pcp_limit_cell(mean, points, eps_zero=False, axisymmetric=False):
    """Limit one cell's point values. Returns (limited points, theta_D, theta_g)."""
    mean = np.asarray(mean, dtype=float)
    P = np.array(points, dtype=float)
    if not is_admissible(mean):
        raise AdmissibilityError("cell mean outside G_u")
    Dbar = mean[0]
    eps_D = 0.0 if eps_zero else min(EPS_FLOOR, Dbar)
    if axisymmetric:
        Dmin = P[:, 0].min()
    else:
        Dmin = min(combination_state(mean, P)[0], P[:NEDGE, 0].min())
    tD = _theta(Dbar, Dmin, eps_D)
    P[:, 0] = Dbar + tD * (P[:, 0] - Dbar)

    gbar = float(g_fn(mean))
    eps_g = 0.0 if eps_zero else min(EPS_FLOOR, gbar)
    if axisymmetric:
        gmin = g_fn(P).min()
    else:
        gmin = min(float(g_fn(combination_state(mean, P))), g_fn(P[:NEDGE]).min())
    tg = _theta(gbar, gmin, eps_g)
    P = mean + tg * (P - mean)
    return P, tD, tg


def pcp_limit_poly(mean, coef, psi_pts, eps_zero=False, axisymmetric=False):
    """Coefficient form: limit ``mean + coef . psi`` on the point set ``psi_pts``.

    Returns (limited coef (4, 5), theta_D, theta_g).
    """
    coef = np.array(coef, dtype=float)
    P = np.asarray(mean) + psi_pts @ coef.T
    _, tD, tg = pcp_limit_cell(mean, P, eps_zero, axisymmetric)
    coef[0] *= tD
    return coef * tg, tD, tg


@njit(cache=True)
def _limit_one(U, P, axisym, eps_on, comb):
    npts = P.shape[0]
    Dbar = U[0]
    eps_D = min(EPS_FLOOR, Dbar) if eps_on else 0.0
    scale = (2.0 / 3.0) * OMEGA_HAT * 0.5
    if axisym:
        Dmin = P[0, 0]
        for q in range(1, npts):
            Dmin = min(Dmin, P[q, 0])
    else:
        s = 0.0
        Dmin = P[0, 0]
        for q in range(NEDGE):
            s += P[q, 0]
            Dmin = min(Dmin, P[q, 0])
        Dmin = min(Dmin, (Dbar - scale * s) / (1.0 - 2.0 * OMEGA_HAT))
    tD = 1.0
    if Dbar - Dmin > 0.0:
        tD = min(abs((Dbar - eps_D) / (Dbar - Dmin)), 1.0)
    if tD < 1.0:
        for q in range(npts):
            P[q, 0] = Dbar + tD * (P[q, 0] - Dbar)

    gbar = K.g_of(U[0], U[1], U[2], U[3])
    eps_g = min(EPS_FLOOR, gbar) if eps_on else 0.0
    nchk = npts if axisym else NEDGE
    gmin = K.g_of(P[0, 0], P[0, 1], P[0, 2], P[0, 3])
    for q in range(1, nchk):
        gmin = min(gmin, K.g_of(P[q, 0], P[q, 1], P[q, 2], P[q, 3]))
    if not axisym:
        for k in range(4):
            s = 0.0
            for q in range(NEDGE):
                s += P[q, k]
            comb[k] = (U[k] - scale * s) / (1.0 - 2.0 * OMEGA_HAT)
        gmin = min(gmin, K.g_of(comb[0], comb[1], comb[2], comb[3]))
    tg = 1.0
    if gbar - gmin > 0.0:
        tg = min(abs((gbar - eps_g) / (gbar - gmin)), 1.0)
    if tg < 1.0:
        for q in range(npts):
            for k in range(4):
                P[q, k] = U[k] + tg * (P[q, k] - U[k])
    return tD, tg


@njit(cache=True)
def limit_batch(U, pts, axisym, eps_on, theta):
    """Limit every cell in place; theta (M, 2) receives (theta_D, theta_g).

    Values that the scaling leaves inadmissible only through rounding are
    collapsed onto the mean (theta set to 0). Returns the number of such cells.
    """
    M = pts.shape[0]
    comb = np.empty(4)
    collapsed = 0
    for c in range(M):
        tD, tg = _limit_one(U[c], pts[c], axisym, eps_on, comb)
        bad = False
        for q in range(pts.shape[1]):
            if not K.admissible(pts[c, q, 0], pts[c, q, 1], pts[c, q, 2], pts[c, q, 3]):
                bad = True
        if bad:
            for q in range(pts.shape[1]):
                for k in range(4):
                    pts[c, q, k] = U[c, k]
            tD = 0.0
            tg = 0.0
            collapsed += 1
        theta[c, 0] = tD
        theta[c, 1] = tg
    return collapsed


def limit(U, pts, eps_zero=False, axisymmetric=False):
    """Batch wrapper: limits ``pts`` in place and returns (theta (M, 2), collapsed count)."""
    theta = np.empty((len(pts), 2))
    n = limit_batch(np.ascontiguousarray(U[: len(pts)]), pts, axisymmetric, not eps_zero, theta)
    return theta, n
