"""Recovery of primitive variables from conserved ones.

All guaranteed methods solve the scalar pressure equation ``phi(p) = 0``,
which is strictly increasing on ``[0, inf)`` and has exactly one positive
root whenever ``U`` is admissible. Velocity and density follow from the
converged pressure only.

The per-state kernels are compiled with numba; the ``recover_*`` functions
wrap them for single states and :func:`recover_batch` drives whole arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .physics import AdmissibilityError, EosParams, is_admissible

ALGORITHMS = ("bisection", "fixed_point", "hybrid", "newton")
_CODES = {name: i for i, name in enumerate(ALGORITHMS)}
_EPS = 2.0**-52
_SAFETY_CAP = 100_000


@dataclass
class RecoveryReport:
    W: np.ndarray
    iterations: int
    residual: float
    algorithm: str
    converged: bool = True
    history: np.ndarray = field(default_factory=lambda: np.empty(0))


# ---------------------------------------------------------------- kernels


@njit(cache=True)
def _two_prod(a, b):
    # Dekker's error-free product: a*b == hi + lo exactly
    hi = a * b
    c = 134217729.0 * a
    ah = c - (c - a)
    al = a - ah
    c = 134217729.0 * b
    bh = c - (c - b)
    bl = b - bh
    lo = ((ah * bh - hi) + ah * bl + al * bh) + al * bl
    return hi, lo


@njit(cache=True)
def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@njit(cache=True)
def _gap0(D, m1, m2, E):
    """E^2 - |m|^2 - D^2 with compensated arithmetic (it is a small difference of large squares)."""
    s, err = _two_prod(E, E)
    for a in (m1, m2, D):
        h, l = _two_prod(a, a)
        s, e = _two_sum(s, -h)
        err += e - l
    return s + err


@njit(cache=True)
def _phi(D, mm, E, gap0, p, G):
    # p/(G-1) - E + |m|^2/s + D sqrt(1 - |m|^2/s^2) with s = E + p, rewritten in
    # terms of gap = s^2 - |m|^2 - D^2 so that no O(E) terms cancel
    s = E + p
    gap = gap0 + p * (2.0 * E + p)
    q = math.sqrt(gap + D * D)
    return G * p / (G - 1.0) - q * gap / ((q + D) * s)


@njit(cache=True)
def _dphi(D, mm, E, gap0, p, G):
    s = E + p
    q = math.sqrt(gap0 + p * (2.0 * E + p) + D * D)
    return 1.0 / (G - 1.0) - mm / (s * s) * (1.0 - D / q)


@njit(cache=True)
def _upper(D, mm, E, gap0, G):
    # (G-1)(E - D sqrt(1 - |m|^2/E^2)) with the subtraction carried out symbolically
    q0 = math.sqrt(gap0 + D * D)
    return (G - 1.0) * (E * E * (gap0 + mm) + D * D * mm) / (E * (E * E + D * q0))


@njit(cache=True)
def _lower(D, mm, E, gap0, G):
    # image of p = 0 under the monotone fixed-point map, a lower bound of the root
    q0 = math.sqrt(gap0 + D * D)
    return (G - 1.0) * q0 * gap0 / ((q0 + D) * E)


@njit(cache=True)
def _cap(r, pR, plo):
    if r <= 0.0:
        return 1
    floor = _EPS * min(pR, plo) if plo > 0.0 else _EPS * pR * 1e-300
    n = math.log(floor / (0.5 * pR)) / math.log(r)
    if n > _SAFETY_CAP:
        return _SAFETY_CAP
    return max(1, int(math.ceil(n)) + 1)


@njit(cache=True)
def _iterate(D, mm, E, gap0, G, mode, tol, hist):
    """Shared loop. mode 0 bisection, 1 fixed point, 2 hybrid.

    Returns (p, iterations, |phi| at exit, converged).
    """
    delta = (G - 1.0) * mm / (E * E)
    if mode == 0:
        r = 0.5
    elif mode == 1:
        r = delta
    else:
        r = min(0.5, delta)
    use_fp = (mode == 1) or (mode == 2 and r < 0.5)
    pL = 0.0
    pR = _upper(D, mm, E, gap0, G)
    p = 0.5 * pR
    N = _cap(r, pR, _lower(D, mm, E, gap0, G))
    nh = hist.shape[0]
    if nh > 0:
        hist[0] = p
    n = 0
    res = tol + 1.0
    converged = False
    while n < N:
        f = _phi(D, mm, E, gap0, p, G)
        res = abs(f)
        if res <= tol * p:
            converged = True
            break
        if use_fp:
            pn = p - (G - 1.0) * f
            step = abs(pn - p)
        else:
            if f < 0.0:
                pL = p
            else:
                pR = p
            pn = 0.5 * (pL + pR)
            step = pR - pL
        p = pn
        n += 1
        if n < nh:
            hist[n] = p
        if step <= 4.0 * _EPS * p:
            converged = True
            break
    if not converged:
        res = abs(_phi(D, mm, E, gap0, p, G))
        converged = res <= tol * p
    return p, n, res, converged


@njit(cache=True)
def _newton(D, mm, E, gap0, G, p0, tol, hist):
    nh = hist.shape[0]
    p = p0
    n = 0
    restarted = False
    if nh > 0:
        hist[0] = p
    while n < 200:
        f = _phi(D, mm, E, gap0, p, G)
        if abs(f) <= tol * p:
            return p, n, abs(f), True
        pn = p - f / _dphi(D, mm, E, gap0, p, G)
        n += 1
        if not (pn >= 0.0) or pn != pn:
            if restarted:
                return p, n, abs(f), False
            restarted = True
            pn = 0.0
        step = abs(pn - p)
        p = pn
        if n < nh:
            hist[n] = p
        if step <= 4.0 * _EPS * p and p > 0.0:
            return p, n, abs(_phi(D, mm, E, gap0, p, G)), True
    return p, n, abs(_phi(D, mm, E, gap0, p, G)), False


@njit(cache=True)
def _finish(D, m1, m2, E, gap0, p, out):
    s = E + p
    out[0] = D * math.sqrt(gap0 + p * (2.0 * E + p) + D * D) / s
    out[1] = m1 / s
    out[2] = m2 / s
    out[3] = p


@njit(cache=True)
def _solve_one(D, m1, m2, E, G, code, p0, hist, out):
    mm = m1 * m1 + m2 * m2
    gap0 = _gap0(D, m1, m2, E)
    tol = 1e-15 * G / (G - 1.0)
    if code == 3:
        if not (p0 > 0.0):
            p0 = 0.5 * _upper(D, mm, E, gap0, G)
        p, n, res, ok = _newton(D, mm, E, gap0, G, p0, tol, hist)
        if not ok:
            p, n2, res, ok = _iterate(D, mm, E, gap0, G, 2, tol, hist[:0])
            n += n2
    else:
        p, n, res, ok = _iterate(D, mm, E, gap0, G, code, tol, hist)
    _finish(D, m1, m2, E, gap0, p, out)
    return n, res, ok


@njit(cache=True)
def _batch(U, G, code, p0, W, iters, ok):
    empty = np.empty(0)
    for i in range(U.shape[0]):
        n, res, good = _solve_one(U[i, 0], U[i, 1], U[i, 2], U[i, 3], G, code, p0[i], empty, W[i])
        iters[i] = n
        ok[i] = good


# ------------------------------------------------------------- public API


def phi(U, p, eos: EosParams):
    """Pressure residual; vectorised over the leading axes of ``U`` and ``p``."""
    U = np.asarray(U, dtype=float)
    p = np.asarray(p, dtype=float)
    D, E = U[..., 0], U[..., 3]
    mm = U[..., 1] ** 2 + U[..., 2] ** 2
    s = E + p
    arg = 1.0 - mm / s**2
    if np.any(p < 0) or np.any(arg < 0):
        raise ValueError("phi evaluated outside its domain (negative pressure or |m| > E+p)")
    G = eos.Gamma
    return p / (G - 1.0) - E + mm / s + D * np.sqrt(arg)


def dphi(U, p, eos: EosParams):
    U = np.asarray(U, dtype=float)
    D, E = U[..., 0], U[..., 3]
    mm = U[..., 1] ** 2 + U[..., 2] ** 2
    s = E + np.asarray(p, dtype=float)
    return 1.0 / (eos.Gamma - 1.0) - mm / s**2 * (1.0 - D / np.sqrt(s**2 - mm))


def _check(U):
    U = np.asarray(U, dtype=float)
    if not np.all(is_admissible(U)):
        raise AdmissibilityError("conserved state outside G_u")
    return U


@njit(cache=True)
def _upper_batch(U, G, out):
    for i in range(U.shape[0]):
        D, m1, m2, E = U[i, 0], U[i, 1], U[i, 2], U[i, 3]
        out[i] = _upper(D, m1 * m1 + m2 * m2, E, _gap0(D, m1, m2, E), G)


def pressure_upper_bound(U, eos: EosParams):
    """``(Gamma-1)(E - D sqrt(1 - |m|^2/E^2))``, an upper bound of the pressure root."""
    U = _check(U)
    flat = np.ascontiguousarray(U.reshape(-1, 4))
    out = np.empty(flat.shape[0])
    _upper_batch(flat, float(eos.Gamma), out)
    return out.reshape(U.shape[:-1]) if U.ndim > 1 else float(out[0])


def contraction_factor(U, eos: EosParams):
    U = np.asarray(U, dtype=float)
    return (eos.Gamma - 1.0) * (U[..., 1] ** 2 + U[..., 2] ** 2) / U[..., 3] ** 2


def _single(U, eos, algorithm, p0=0.0, history=0):
    U = _check(U)
    if U.shape != (4,):
        raise ValueError("expected a single state of shape (4,)")
    hist = np.full(history, np.nan)
    out = np.empty(4)
    n, res, ok = _solve_one(U[0], U[1], U[2], U[3], eos.Gamma, _CODES[algorithm], p0, hist, out)
    return RecoveryReport(out, int(n), float(res), algorithm, bool(ok), hist[: min(history, n + 1)])


def recover_bisection(U, eos: EosParams, history: int = 0) -> RecoveryReport:
    """Bisection on ``(0, p_R0)``; ``history`` > 0 records the first midpoints."""
    return _single(U, eos, "bisection", history=history)


def recover_fixed_point(U, eos: EosParams, history: int = 0) -> RecoveryReport:
    return _single(U, eos, "fixed_point", history=history)


def recover_hybrid(U, eos: EosParams, history: int = 0) -> RecoveryReport:
    """Fixed point when the contraction factor is below 1/2, bisection otherwise."""
    return _single(U, eos, "hybrid", history=history)


def recover_newton(U, eos: EosParams, p0: float | None = None, history: int = 0) -> RecoveryReport:
    """Newton baseline with restart from zero; falls back to hybrid if it still fails."""
    return _single(U, eos, "newton", p0=0.0 if p0 is None else float(p0), history=history)


def recover(U, eos: EosParams, algorithm: str = "hybrid") -> np.ndarray:
    return recover_batch(U, eos, algorithm)[0]


def recover_batch(U, eos: EosParams, algorithm: str = "hybrid", p0=None, check: bool = True):
    """Recover every state in ``U`` (shape ``(..., 4)``).

    Returns ``(W, iterations, converged)`` with matching leading shapes.
    """
    if algorithm not in _CODES:
        raise ValueError(f"unknown recovery algorithm {algorithm!r}")
    U = np.asarray(U, dtype=float)
    if check:
        U = _check(U)
    flat = np.ascontiguousarray(U.reshape(-1, 4))
    m = flat.shape[0]
    guess = np.zeros(m) if p0 is None else np.ascontiguousarray(np.broadcast_to(p0, U.shape[:-1]).reshape(-1), dtype=float)
    W = np.empty_like(flat)
    iters = np.empty(m, dtype=np.int64)
    ok = np.empty(m, dtype=np.bool_)
    _batch(flat, float(eos.Gamma), _CODES[algorithm], guess, W, iters, ok)
    lead = U.shape[:-1]
    return W.reshape(U.shape), iters.reshape(lead), ok.reshape(lead)
