"""Scalar numba kernels shared by the reconstruction, limiter and solver hot loops.

These mirror the vectorised functions in :mod:`pcprhd.physics`; the tests check
one against the other.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

# boundary condition kinds
BC_OUTFLOW = 0
BC_REFLECTIVE = 1
BC_INFLOW = 2
BC_MOVING_SHOCK = 3


@njit(cache=True)
def g_of(D, m1, m2, E):
    return E - math.sqrt(D * D + m1 * m1 + m2 * m2)


@njit(cache=True)
def admissible(D, m1, m2, E):
    return D > 0.0 and g_of(D, m1, m2, E) > 0.0


@njit(cache=True)
def prim_to_cons(rho, v1, v2, p, G, out):
    w2 = 1.0 / (1.0 - v1 * v1 - v2 * v2)
    rhoh = rho + G / (G - 1.0) * p
    out[0] = rho * math.sqrt(w2)
    out[1] = rhoh * w2 * v1
    out[2] = rhoh * w2 * v2
    out[3] = rhoh * w2 - p


@njit(cache=True)
def wave_speeds(rho, v1, v2, p, n1, n2, G):
    """Return (lambda1, lambda4, spectral radius) along n."""
    vn = v1 * n1 + v2 * n2
    vv = v1 * v1 + v2 * v2
    cs2 = G * p / (rho + G / (G - 1.0) * p)
    cs = math.sqrt(cs2)
    arg = 1.0 - vn * vn - (vv - vn * vn) * cs2
    root = cs * math.sqrt(1.0 - vv) * math.sqrt(max(arg, 0.0))
    den = 1.0 - vv * cs2
    l1 = (vn * (1.0 - cs2) - root) / den
    l4 = (vn * (1.0 - cs2) + root) / den
    sr = (abs(vn) * (1.0 - cs2) + root) / den
    return l1, l4, sr


@njit(cache=True)
def rotated_flux(U, W, n1, n2, out):
    vn = W[1] * n1 + W[2] * n2
    out[0] = U[0] * vn
    out[1] = U[1] * vn + W[3] * n1
    out[2] = U[2] * vn + W[3] * n2
    out[3] = U[1] * n1 + U[2] * n2


@njit(cache=True)
def hll_flux(UL, WL, UR, WR, n1, n2, G, FL, FR, out):
    """HLL flux; FL and FR are scratch buffers. Returns the larger spectral radius."""
    l1L, l4L, srL = wave_speeds(WL[0], WL[1], WL[2], WL[3], n1, n2, G)
    l1R, l4R, srR = wave_speeds(WR[0], WR[1], WR[2], WR[3], n1, n2, G)
    sl = min(l1L, l1R, 0.0)
    sr = max(l4L, l4R, 0.0)
    rotated_flux(UL, WL, n1, n2, FL)
    if sr - sl < 1e-14:
        for k in range(4):
            out[k] = FL[k]
    else:
        rotated_flux(UR, WR, n1, n2, FR)
        inv = 1.0 / (sr - sl)
        for k in range(4):
            out[k] = (sr * FL[k] - sl * FR[k] + sl * sr * (UR[k] - UL[k])) * inv
    return max(srL, srR)


@njit(cache=True)
def eigensystem(rho, v1, v2, p, n1, n2, G, R, L):
    """Fill R (right eigenvectors as columns) and L = R^-1 for direction n."""
    vn = v1 * n1 + v2 * n2
    vt = v2 * n1 - v1 * n2
    vv = v1 * v1 + v2 * v2
    g2 = 1.0 / (1.0 - vv)
    g = math.sqrt(g2)
    H = 1.0 + G / (G - 1.0) * p / rho
    cs2 = G * p / (rho * H)
    eta = 1.0 / ((G - 1.0) * rho)
    reta = 1.0 / (G - 1.0)
    one_vn2 = 1.0 - vn * vn
    den_fz = vn * vn + vt * vt * cs2 - 1.0
    root = math.sqrt(cs2) * math.sqrt(1.0 - vv) * math.sqrt(1.0 - vn * vn - (vv - vn * vn) * cs2)
    den = 1.0 - vv * cs2
    base = vn * cs2 / g2
    for col in (0, 3):
        sgn = -1.0 if col == 0 else 1.0
        lz = (vn * (1.0 - cs2) + sgn * root) / den
        R[0, col] = g * (vn * lz - 1.0)
        R[1, col] = H * g2 * (lz * (vn * v1 - n1) + vt * n2)
        R[2, col] = H * g2 * (lz * (vn * v2 - n2) - vt * n1)
        R[3, col] = H * g2 * (vn * vn - 1.0)
    R[0, 1] = 1.0
    R[1, 1] = g * v1
    R[2, 1] = g * v2
    R[3, 1] = g
    R[0, 2] = g * vt
    R[1, 2] = 2.0 * H * g2 * vt * v1 - H * n2
    R[2, 2] = 2.0 * H * g2 * vt * v2 + H * n1
    R[3, 2] = 2.0 * H * g2 * vt

    c1 = 1.0 + cs2 * reta
    a = (vv + reta) / c1
    b = (1.0 + reta) / c1
    for row in (0, 3):
        sgn = -1.0 if row == 0 else 1.0
        lz = (vn * (1.0 - cs2) + sgn * root) / den
        dz = (base - sgn * root) / den  # vn - lz without cancellation
        fz = c1 / (2.0 * reta * H * dz * dz * g2 * den_fz)
        L[row, 0] = fz * (vn * lz - 1.0) / (g * c1)
        L[row, 1] = fz * (lz * (a * n1 - vt * v2) - b * vn * n1 + vt * n2)
        L[row, 2] = fz * (lz * (a * n2 + vt * v1) - b * vn * n2 - vt * n1)
        L[row, 3] = fz * (vt * vt + 1.0 / (g2 * c1) + vn * dz * b)
    q = rho * H * cs2 * eta
    t = (1.0 + vt * vt * g2) / q
    L[1, 0] = 1.0 / (rho * cs2 * eta)
    L[1, 1] = vn * t / (one_vn2 * g) * n1 - vt * g / q * n2
    L[1, 2] = vn * t / (one_vn2 * g) * n2 + vt * g / q * n1
    L[1, 3] = -t / (one_vn2 * g)
    L[2, 0] = 0.0
    L[2, 1] = (-n2 + vn * v2) / (H * one_vn2)
    L[2, 2] = (n1 - vn * v1) / (H * one_vn2)
    L[2, 3] = -vt / (H * one_vn2)


@njit(cache=True)
def ghost_primitive(kind, Win, n1, n2, x, y, t, par, out):
    """Exterior primitive state for a boundary point.

    ``par`` holds the condition's parameters: for inflow the fixed W in par[0:4];
    for a moving shock par = (WL[4], WR[4], x0, y0, sx, sy), the front passing
    through (x0, y0) + t (sx, sy) and moving with velocity (sx, sy). Points behind
    the front get WL, points ahead get WR.
    """
    if kind == BC_OUTFLOW:
        for k in range(4):
            out[k] = Win[k]
    elif kind == BC_REFLECTIVE:
        vn = Win[1] * n1 + Win[2] * n2
        out[0] = Win[0]
        out[1] = Win[1] - 2.0 * vn * n1
        out[2] = Win[2] - 2.0 * vn * n2
        out[3] = Win[3]
    elif kind == BC_INFLOW:
        for k in range(4):
            out[k] = par[k]
    else:
        x0 = par[8] + par[10] * t
        y0 = par[9] + par[11] * t
        # signed distance along the propagation direction
        side = (x - x0) * par[10] + (y - y0) * par[11]
        off = 0 if side < 0.0 else 4
        for k in range(4):
            out[k] = par[off + k]
