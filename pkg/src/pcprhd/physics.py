"""Ideal-gas state algebra for 2D special relativistic hydrodynamics.

Conserved vectors are stored with the last axis ordered ``(D, m1, m2, E)`` and
primitive vectors as ``(rho, v1, v2, p)``. Every function broadcasts over the
leading axes, so a single state and a ``(ncell, npoint, 4)`` block go through
the same code.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class AdmissibilityError(ValueError):
    """A state left the physically admissible set."""


@dataclass(frozen=True)
class EosParams:
    Gamma: float = 5.0 / 3.0

    def __post_init__(self):
        if not (1.0 < self.Gamma <= 2.0):
            raise ValueError(f"Gamma must lie in (1, 2], got {self.Gamma}")


def _split(a):
    a = np.asarray(a, dtype=float)
    return a[..., 0], a[..., 1], a[..., 2], a[..., 3]


def in_primitive_set(W):
    rho, v1, v2, p = _split(W)
    return (rho > 0) & (p > 0) & (v1 * v1 + v2 * v2 < 1.0)


def enthalpy(W, eos: EosParams):
    rho, _, _, p = _split(W)
    return 1.0 + eos.Gamma / (eos.Gamma - 1.0) * p / rho


def lorentz_factor(W):
    _, v1, v2, _ = _split(W)
    return 1.0 / np.sqrt(1.0 - v1 * v1 - v2 * v2)


def prim_to_cons(W, eos: EosParams, check: bool = True):
    """Map ``(rho, v, p)`` to ``(D, m, E)``."""
    W = np.asarray(W, dtype=float)
    if check and not np.all(in_primitive_set(W)):
        raise AdmissibilityError("primitive state outside G_w")
    rho, v1, v2, p = _split(W)
    w2 = 1.0 / (1.0 - v1 * v1 - v2 * v2)
    rhoh = rho + eos.Gamma / (eos.Gamma - 1.0) * p
    U = np.empty_like(W)
    U[..., 0] = rho * np.sqrt(w2)
    U[..., 1] = rhoh * w2 * v1
    U[..., 2] = rhoh * w2 * v2
    U[..., 3] = rhoh * w2 - p
    return U


def flux(U, W, direction: int):
    """Physical flux F_1 (direction=1) or F_2 (direction=2) of a matched (U, W) pair."""
    if direction not in (1, 2):
        raise ValueError("direction must be 1 or 2")
    return rotated_flux(U, W, (1.0, 0.0) if direction == 1 else (0.0, 1.0))


def rotated_flux(U, W, n):
    """``n1 F1 + n2 F2``; ``n`` may be a pair or an array broadcasting to ``(..., 2)``."""
    U = np.asarray(U, dtype=float)
    W = np.asarray(W, dtype=float)
    n = np.asarray(n, dtype=float)
    n1, n2 = n[..., 0], n[..., 1]
    vn = W[..., 1] * n1 + W[..., 2] * n2
    p = W[..., 3]
    F = np.empty(np.broadcast_shapes(U.shape, W.shape, n.shape[:-1] + (4,)))
    F[..., 0] = U[..., 0] * vn
    F[..., 1] = U[..., 1] * vn + p * n1
    F[..., 2] = U[..., 2] * vn + p * n2
    F[..., 3] = U[..., 1] * n1 + U[..., 2] * n2
    return F


def g_fn(U):
    """Concave admissibility functional E - sqrt(D^2 + |m|^2)."""
    D, m1, m2, E = _split(U)
    return E - np.sqrt(D * D + m1 * m1 + m2 * m2)


def is_admissible(U):
    D, _, _, _ = _split(U)
    return (D > 0) & (g_fn(U) > 0)


def sound_speed(W, eos: EosParams):
    rho, _, _, p = _split(W)
    return np.sqrt(eos.Gamma * p / (rho + eos.Gamma / (eos.Gamma - 1.0) * p))


def _wave_parts(W, n, eos):
    W = np.asarray(W, dtype=float)
    n = np.asarray(n, dtype=float)
    _, v1, v2, _ = _split(W)
    n1, n2 = n[..., 0], n[..., 1]
    vn = v1 * n1 + v2 * n2
    vv = v1 * v1 + v2 * v2
    cs = sound_speed(W, eos)
    cs2 = cs * cs
    root = cs * np.sqrt(1.0 - vv) * np.sqrt(1.0 - vn * vn - (vv - vn * vn) * cs2)
    den = 1.0 - vv * cs2
    return vn, vv, cs, root, den


def eigenvalues(W, n, eos: EosParams):
    """The four characteristic speeds along unit normal ``n``, last axis ordered."""
    vn, vv, cs, root, den = _wave_parts(W, n, eos)
    lam = np.empty(np.shape(vn) + (4,))
    lam[..., 0] = (vn * (1.0 - cs * cs) - root) / den
    lam[..., 1] = vn
    lam[..., 2] = vn
    lam[..., 3] = (vn * (1.0 - cs * cs) + root) / den
    return lam


def spectral_radius(W, n, eos: EosParams):
    vn, vv, cs, root, den = _wave_parts(W, n, eos)
    return (np.abs(vn) * (1.0 - cs * cs) + root) / den


@dataclass
class EigenSystem:
    lambdas: np.ndarray
    R: np.ndarray
    Rinv: np.ndarray


def eigensystem(W, n, eos: EosParams) -> EigenSystem:
    """Right eigenvectors (columns of ``R``) and their inverse for the rotated Jacobian.

    Closed forms in terms of primitive variables; the arrays carry two trailing
    4x4 axes.
    """
    W = np.asarray(W, dtype=float)
    n = np.asarray(n, dtype=float)
    rho, v1, v2, p = _split(W)
    n1, n2 = n[..., 0], n[..., 1]
    lam = eigenvalues(W, n, eos)
    G = eos.Gamma
    vn = v1 * n1 + v2 * n2
    vt = v2 * n1 - v1 * n2
    vv = v1 * v1 + v2 * v2
    g = 1.0 / np.sqrt(1.0 - vv)
    g2 = g * g
    H = enthalpy(W, eos)
    cs2 = G * p / (rho * H)
    eta = 1.0 / ((G - 1.0) * rho)
    reta = rho * eta  # = 1/(Gamma-1)
    one_vn2 = 1.0 - vn * vn
    den_fz = vn * vn + vt * vt * cs2 - 1.0
    if np.any(np.abs(one_vn2) < 1e-14) or np.any(np.abs(den_fz) < 1e-14):
        raise AdmissibilityError("degenerate eigen-decomposition")
    if np.any(lam[..., 3] - lam[..., 0] < 1e-12):
        raise AdmissibilityError("acoustic eigenvalues coalesce")

    shape = np.shape(vn)
    R = np.empty(shape + (4, 4))
    for col, z in ((0, 0), (3, 3)):
        lz = lam[..., z]
        R[..., 0, col] = g * (vn * lz - 1.0)
        R[..., 1, col] = H * g2 * (lz * (vn * v1 - n1) + vt * n2)
        R[..., 2, col] = H * g2 * (lz * (vn * v2 - n2) - vt * n1)
        R[..., 3, col] = H * g2 * (vn * vn - 1.0)
    R[..., 0, 1] = 1.0
    R[..., 1, 1] = g * v1
    R[..., 2, 1] = g * v2
    R[..., 3, 1] = g
    R[..., 0, 2] = g * vt
    R[..., 1, 2] = 2.0 * H * g2 * vt * v1 - H * n2
    R[..., 2, 2] = 2.0 * H * g2 * vt * v2 + H * n1
    R[..., 3, 2] = 2.0 * H * g2 * vt

    L = np.empty(shape + (4, 4))
    c1 = 1.0 + cs2 * reta
    # vn - lambda written without the cancellation between nearby speeds
    _, _, _, root, den = _wave_parts(W, n, eos)
    base = vn * cs2 / g2
    for row, z, dz in ((0, 0, (base + root) / den), (3, 3, (base - root) / den)):
        lz = lam[..., z]
        fz = c1 / (2.0 * reta * H * dz * dz * g2 * den_fz)
        a = (vv + reta) / c1
        b = (1.0 + reta) / c1
        L[..., row, 0] = fz * (vn * lz - 1.0) / (g * c1)
        L[..., row, 1] = fz * (lz * (a * n1 - vt * v2) - b * vn * n1 + vt * n2)
        L[..., row, 2] = fz * (lz * (a * n2 + vt * v1) - b * vn * n2 - vt * n1)
        L[..., row, 3] = fz * (vt * vt + 1.0 / (g2 * c1) + vn * dz * b)
    q = rho * H * cs2 * eta
    t = (1.0 + vt * vt * g2) / q
    L[..., 1, 0] = 1.0 / (rho * cs2 * eta)
    L[..., 1, 1] = vn * t / (one_vn2 * g) * n1 - vt * g / q * n2
    L[..., 1, 2] = vn * t / (one_vn2 * g) * n2 + vt * g / q * n1
    L[..., 1, 3] = -t / (one_vn2 * g)
    L[..., 2, 0] = 0.0
    L[..., 2, 1] = (-n2 + vn * v2) / (H * one_vn2)
    L[..., 2, 2] = (n1 - vn * v1) / (H * one_vn2)
    L[..., 2, 3] = -vt / (H * one_vn2)
    return EigenSystem(lam, R, L)
