"""Third-order WENO reconstruction on triangles.

Two routes compute the same thing. The per-cell functions (``fit_quadratic``,
``weno_scalar``, ``weno_characteristic`` ...) are plain numpy and serve as the
readable reference; :func:`reconstruct_batch` is the compiled kernel the solver
calls every stage. Both read the geometry precomputed in :class:`WenoGeometry`.

Polynomials are stored as coefficients on the zero-mean basis
``psi = ((x-x0)/s, (y-y0)/s, (x-x0)(y-y0)/A - mxy, (x-x0)^2/A - mxx, (y-y0)^2/A - myy)``
with ``A = |K0|`` and ``s = sqrt(A)``; the cell mean is carried separately.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _kernels as K
from .mesh import Mesh, interior_point_quadrature, interior_quadrature
from .physics import EosParams, eigensystem

GAMMA_LINEAR = np.array([0.96, 0.01, 0.01, 0.01, 0.01])
RANK_TOL = 1e-10

WEIGHTS = {"invariant": 0, "original": 1}

MODE_WENO, MODE_LINEAR, MODE_CONSTANT = 0, 1, 2


@dataclass
class ZeroMeanBasis:
    x0: float
    y0: float
    area: float
    mxy: float
    mxx: float
    myy: float

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return _psi(x, y, self.x0, self.y0, self.area, self.mxy, self.mxx, self.myy)


def _psi(x, y, x0, y0, A, mxy, mxx, myy):
    dx = x - x0
    dy = y - y0
    s = np.sqrt(A)
    return np.stack(
        [dx / s, dy / s, dx * dy / A - mxy, dx * dx / A - mxx, dy * dy / A - myy], axis=-1
    )


@dataclass
class QuadPoly:
    mean: float
    a: np.ndarray


@dataclass
class LinPoly:
    mean: float
    b: np.ndarray


@dataclass
class WenoWeights:
    gamma: np.ndarray
    beta: np.ndarray
    tau: float
    epsilon: float
    varpi: np.ndarray


class WenoGeometry:
    """Per-cell constants of the reconstruction, built once per mesh.

    ``extra_points`` appends three interior quadrature points to the evaluation
    point set (needed by the axisymmetric source and limiter).
    """

    def __init__(self, mesh: Mesh, extra_points: bool = False):
        self.mesh = mesh
        M = mesh.ncells
        st = mesh.stencils
        self.big = st.big
        self.nbig = st.nbig
        self.area = mesh.area.copy()
        self.x0 = mesh.centroid[:, 0].copy()
        self.y0 = mesh.centroid[:, 1].copy()

        mids, _ = interior_quadrature(mesh.ext_vertices)  # (Mext, 3, 2)
        own = mids[:M]
        dx = own[..., 0] - self.x0[:, None]
        dy = own[..., 1] - self.y0[:, None]
        A = self.area
        self.mom = np.stack([(dx * dy).mean(1) / A, (dx * dx).mean(1) / A, (dy * dy).mean(1) / A], axis=1)

        # average of each psi of cell c over every member of its big stencil
        members = np.where(st.big >= 0, st.big, 0)
        pm = mids[members]  # (M, 10, 3, 2)
        psi = self._psi_cells(pm[..., 0], pm[..., 1])  # (M, 10, 3, 5)
        avg = psi.mean(axis=2)
        avg[st.big < 0] = 0.0
        self.psi_avg = avg

        self.mode = np.full(M, MODE_WENO, dtype=np.int64)
        rows = avg[:, 1:, :]  # drop the target itself; padded rows are zero
        u, s, vt = np.linalg.svd(rows, full_matrices=False)
        okq = (st.nbig >= 6) & (s[:, -1] > RANK_TOL * s[:, 0])
        sinv = np.where(s > RANK_TOL * s[:, :1], 1.0 / np.where(s > 0, s, 1.0), 0.0)
        self.qpinv = np.ascontiguousarray(np.einsum("mji,mj,mkj->mik", vt, sinv, u))  # (M, 5, 9)

        # linear candidates: positions of their members inside the big stencil
        self.lin_pos = np.zeros((M, 4, 3), dtype=np.int64)
        self.lin_ok = st.sector_ok.copy()
        for c in range(M):
            where = {int(k): i for i, k in enumerate(st.big[c, : st.nbig[c]])}
            for l in range(4):
                if self.lin_ok[c, l]:
                    self.lin_pos[c, l] = [where[int(k)] for k in st.sector[c, l]]
        lin_rows = np.take_along_axis(avg[:, None, :, :2], self.lin_pos[..., None], axis=2)  # (M,4,3,2)
        u2, s2, vt2 = np.linalg.svd(lin_rows, full_matrices=False)
        self.lin_ok &= s2[..., -1] > RANK_TOL * s2[..., 0]
        sinv2 = np.where(s2 > RANK_TOL * s2[..., :1], 1.0 / np.where(s2 > 0, s2, 1.0), 0.0)
        self.lin_pinv = np.ascontiguousarray(np.einsum("mlji,mlj,mlkj->mlik", vt2, sinv2, u2))  # (M, 4, 2, 3)

        self.mode[~okq] = MODE_LINEAR
        self.mode[(~okq) & (~self.lin_ok[:, 0])] = MODE_CONSTANT
        gamma = np.where(self.lin_ok, GAMMA_LINEAR[None, 1:], 0.0)
        self.gamma = np.concatenate([np.full((M, 1), GAMMA_LINEAR[0]), gamma], axis=1)
        self.gamma /= self.gamma.sum(axis=1, keepdims=True)

        self.bmat = self._indicator_matrices(own)

        pts = mesh.gauss.reshape(M, 6, 2)
        if extra_points:
            inner, _ = interior_point_quadrature(mesh.nodes[mesh.tris])
            pts = np.concatenate([pts, inner], axis=1)
        self.points = pts
        self.psi_pts = self._psi_cells(pts[..., 0], pts[..., 1])  # (M, npts, 5)
        self.dir_weight = mesh.ext_area[mesh.ext_nbr[:M]]
        self.normals = mesh.normal

    @property
    def npoints(self):
        return self.points.shape[1]

    def _psi_cells(self, x, y):
        extra = (slice(None),) + (None,) * (x.ndim - 1)
        return _psi(x, y, self.x0[extra], self.y0[extra], self.area[extra],
                    self.mom[:, 0][extra], self.mom[:, 1][extra], self.mom[:, 2][extra])

    def _indicator_matrices(self, own):
        A = self.area[:, None]
        s = np.sqrt(A)
        dx = own[..., 0] - self.x0[:, None]
        dy = own[..., 1] - self.y0[:, None]
        z = np.zeros_like(dx)
        one = np.ones_like(dx)
        gx = np.stack([one / s, z, dy / A, 2 * dx / A, z], axis=-1)  # (M, 3, 5)
        gy = np.stack([z, one / s, dx / A, z, 2 * dy / A], axis=-1)
        first = (np.einsum("mqi,mqj->mij", gx, gx) + np.einsum("mqi,mqj->mij", gy, gy)) / 3.0
        M = len(self.area)
        hxx = np.zeros((M, 5)); hxx[:, 3] = 2.0
        hxy = np.zeros((M, 5)); hxy[:, 2] = 1.0
        hyy = np.zeros((M, 5)); hyy[:, 4] = 2.0
        second = sum(np.einsum("mi,mj->mij", h, h) for h in (hxx, hxy, hyy)) / A[:, :, None]
        # integrals over K: multiply by |K|; second derivatives carry an extra |K|
        return A[:, :, None] * first + A[:, :, None] ** 2 * second

    def basis(self, c) -> ZeroMeanBasis:
        return ZeroMeanBasis(self.x0[c], self.y0[c], self.area[c], *self.mom[c])

    def members(self, c):
        return self.big[c, : self.nbig[c]]


# ---------------------------------------------------------------- reference route

def fit_quadratic(geo: WenoGeometry, c, ubar) -> QuadPoly:
    """Least-squares quadratic on the big stencil; ``ubar`` indexed by extended cell."""
    if geo.mode[c] != MODE_WENO:
        raise np.linalg.LinAlgError("big stencil of cell %d is rank deficient" % c)
    mem = geo.members(c)
    rows = geo.psi_avg[c, 1: len(mem)]
    rhs = ubar[mem[1:]] - ubar[c]
    a = np.linalg.lstsq(rows, rhs, rcond=None)[0]
    return QuadPoly(float(ubar[c]), a)


def fit_linear(geo: WenoGeometry, c, ubar, l) -> LinPoly:
    """Linear candidate ``l`` (0 central, 1..3 sectorial)."""
    if not geo.lin_ok[c, l]:
        raise np.linalg.LinAlgError("linear stencil %d of cell %d unusable" % (l, c))
    mem = geo.members(c)
    pos = geo.lin_pos[c, l]
    rows = geo.psi_avg[c, pos, :2]
    b = np.linalg.lstsq(rows, ubar[mem[pos]] - ubar[c], rcond=None)[0]
    return LinPoly(float(ubar[c]), b)


def smoothness_indicators(geo: WenoGeometry, c, quad: QuadPoly, linears):
    """beta_0 from the quadratic, beta_l = |K|-scaled gradient energy of each linear."""
    beta = np.zeros(5)
    beta[0] = quad.a @ geo.bmat[c] @ quad.a
    for l, lin in enumerate(linears):
        if lin is not None:
            beta[l + 1] = lin.b @ lin.b
    return beta


def nonlinear_weights(geo: WenoGeometry, c, beta, ubar, variant="invariant") -> WenoWeights:
    gamma = geo.gamma[c]
    alive = gamma > 0
    alive[0] = False
    tau = np.abs(beta[0] - beta[alive]).mean() if alive.any() else 0.0
    eps = geo.area[c] * np.max(ubar[geo.members(c)] ** 2)
    if eps == 0.0:
        return WenoWeights(gamma.copy(), beta, tau, eps, gamma.copy())
    if variant == "invariant":
        delta = gamma * (1.0 + (tau / (beta + eps)) ** 2)
    elif variant == "original":
        delta = gamma * (1.0 + tau / (beta + eps) * tau)
    else:
        raise ValueError(f"unknown weight variant {variant!r}")
    return WenoWeights(gamma.copy(), beta, tau, eps, delta / delta.sum())


def weno_scalar(geo: WenoGeometry, c, ubar, variant="invariant", return_weights=False):
    mode = geo.mode[c]
    if mode == MODE_CONSTANT:
        out = QuadPoly(float(ubar[c]), np.zeros(5))
        return (out, None) if return_weights else out
    if mode == MODE_LINEAR:
        lin = fit_linear(geo, c, ubar, 0)
        out = QuadPoly(lin.mean, np.r_[lin.b, 0.0, 0.0, 0.0])
        return (out, None) if return_weights else out
    quad = fit_quadratic(geo, c, ubar)
    lins = [fit_linear(geo, c, ubar, l) if geo.lin_ok[c, l] else None for l in range(4)]
    beta = smoothness_indicators(geo, c, quad, lins)
    w = nonlinear_weights(geo, c, beta, ubar, variant)
    g0 = w.gamma[0]
    a = w.varpi[0] / g0 * quad.a
    for l, lin in enumerate(lins):
        if lin is not None:
            a[:2] += (w.varpi[l + 1] - w.varpi[0] * w.gamma[l + 1] / g0) * lin.b
    out = QuadPoly(float(ubar[c]), a)
    return (out, w) if return_weights else out


def weno_characteristic(geo: WenoGeometry, c, Ubar, Wc, eos: EosParams, variant="invariant"):
    """Characteristic-wise reconstruction of the four conserved components of cell ``c``.

    ``Ubar`` holds the extended averages (cells then ghosts), ``Wc`` the primitive
    state of cell ``c``. Returns the (4, 5) coefficient array.
    """
    total = np.zeros((4, 5))
    wsum = 0.0
    for j in range(3):
        es = eigensystem(Wc, geo.normals[c, j], eos)
        Z = Ubar @ es.Rinv.T
        coef = np.stack([weno_scalar(geo, c, Z[:, k], variant).a for k in range(4)])
        w = geo.dir_weight[c, j]
        total += w * (es.R @ coef)
        wsum += w
    return total / wsum


def evaluate(geo: WenoGeometry, c, mean, coef, x, y):
    """Point values of ``mean + coef . psi`` at (x, y); ``coef`` is (5,) or (4, 5)."""
    psi = geo.basis(c)(x, y)
    coef = np.asarray(coef)
    if coef.ndim == 1:
        return mean + psi @ coef
    return np.asarray(mean) + psi @ coef.T


# ---------------------------------------------------------------- compiled route

@njit(cache=True)
def _scalar_weights(c, nb, dz, zmax2, big_pos_lin, lin_ok, lin_pinv, qpinv, bmat, gamma, area,
                    variant, acoef, bcoef, beta, wts):
    """WENO blend of one scalar field on cell c; writes 5 coefficients into acoef.

    dz[s] = zbar(member s+1) - zbar(target). Returns tau.
    """
    for i in range(5):
        acc = 0.0
        for s in range(nb - 1):
            acc += qpinv[c, i, s] * dz[s]
        acoef[i] = acc
    b0 = 0.0
    for i in range(5):
        row = 0.0
        for k in range(5):
            row += bmat[c, i, k] * acoef[k]
        b0 += acoef[i] * row
    beta[0] = b0
    tau = 0.0
    nalive = 0
    for l in range(4):
        bcoef[l, 0] = 0.0
        bcoef[l, 1] = 0.0
        beta[l + 1] = 0.0
        if not lin_ok[c, l]:
            continue
        for i in range(2):
            acc = 0.0
            for r in range(3):
                acc += lin_pinv[c, l, i, r] * dz[big_pos_lin[c, l, r] - 1]
            bcoef[l, i] = acc
        beta[l + 1] = bcoef[l, 0] ** 2 + bcoef[l, 1] ** 2
        tau += abs(b0 - beta[l + 1])
        nalive += 1
    if nalive > 0:
        tau /= nalive
    eps = area[c] * zmax2
    if eps == 0.0:
        for l in range(5):
            wts[l] = gamma[c, l]
    else:
        tot = 0.0
        for l in range(5):
            if gamma[c, l] == 0.0:
                wts[l] = 0.0
                continue
            d = beta[l] + eps
            # form tau / d first: squaring d underflows for tiny fields
            r = tau / d if d > 0.0 else 0.0
            if variant == 0:
                wts[l] = gamma[c, l] * (1.0 + r * r)
            else:
                wts[l] = gamma[c, l] * (1.0 + r * tau)
            tot += wts[l]
        for l in range(5):
            wts[l] /= tot
    g0 = gamma[c, 0]
    for i in range(5):
        acoef[i] *= wts[0] / g0
    for l in range(4):
        if lin_ok[c, l]:
            f = wts[l + 1] - wts[0] * gamma[c, l + 1] / g0
            acoef[0] += f * bcoef[l, 0]
            acoef[1] += f * bcoef[l, 1]
    return tau


@njit(cache=True)
def reconstruct_batch(Uext, Wc, big, nbig, mode, qpinv, lin_pos, lin_ok, lin_pinv, bmat, gamma,
                      area, normals, dir_weight, G, variant, coef, dump):
    """Characteristic WENO for every cell; fills coef (M, 4, 5).

    ``dump`` (M, 11) receives beta0..4, tau, varpi0..4 of the characteristic
    field with the smallest varpi0 (the most nonlinear one).
    """
    M = coef.shape[0]
    R = np.empty((4, 4))
    L = np.empty((4, 4))
    Z = np.empty((10, 4))
    dz = np.empty(9)
    a = np.empty(5)
    bl = np.empty((4, 2))
    beta = np.empty(5)
    wts = np.empty(5)
    cz = np.empty((4, 5))
    for c in range(M):
        for k in range(4):
            for i in range(5):
                coef[c, k, i] = 0.0
        for i in range(11):
            dump[c, i] = 0.0
        m = mode[c]
        nb = nbig[c]
        if m == MODE_CONSTANT:
            continue
        if m == MODE_LINEAR:
            # linear fits commute with the characteristic projection
            for k in range(4):
                for i in range(2):
                    acc = 0.0
                    for r in range(3):
                        s = big[c, lin_pos[c, 0, r]]
                        acc += lin_pinv[c, 0, i, r] * (Uext[s, k] - Uext[c, k])
                    coef[c, k, i] = acc
            continue
        best = 2.0
        wsum = 0.0
        for j in range(3):
            K.eigensystem(Wc[c, 0], Wc[c, 1], Wc[c, 2], Wc[c, 3], normals[c, j, 0], normals[c, j, 1], G, R, L)
            for s in range(nb):
                cell = big[c, s]
                for k in range(4):
                    acc = 0.0
                    for q in range(4):
                        acc += L[k, q] * Uext[cell, q]
                    Z[s, k] = acc
            for k in range(4):
                zmax2 = 0.0
                for s in range(nb):
                    zmax2 = max(zmax2, Z[s, k] * Z[s, k])
                for s in range(1, nb):
                    dz[s - 1] = Z[s, k] - Z[0, k]
                tau = _scalar_weights(c, nb, dz, zmax2, lin_pos, lin_ok, lin_pinv, qpinv, bmat,
                                      gamma, area, variant, a, bl, beta, wts)
                for i in range(5):
                    cz[k, i] = a[i]
                if wts[0] < best:
                    best = wts[0]
                    for i in range(5):
                        dump[c, i] = beta[i]
                        dump[c, 6 + i] = wts[i]
                    dump[c, 5] = tau
            w = dir_weight[c, j]
            wsum += w
            for k in range(4):
                for i in range(5):
                    acc = 0.0
                    for q in range(4):
                        acc += R[k, q] * cz[q, i]
                    coef[c, k, i] += w * acc
        for k in range(4):
            for i in range(5):
                coef[c, k, i] /= wsum


@njit(cache=True)
def evaluate_points(U, coef, psi_pts, out):
    """out[c, q, k] = U[c, k] + sum_i coef[c, k, i] psi_pts[c, q, i]."""
    M, npts = psi_pts.shape[0], psi_pts.shape[1]
    for c in range(M):
        for q in range(npts):
            for k in range(4):
                acc = U[c, k]
                for i in range(5):
                    acc += coef[c, k, i] * psi_pts[c, q, i]
                out[c, q, k] = acc


def reconstruct(geo: WenoGeometry, Uext, Wc, eos: EosParams, variant="invariant", dump=None):
    """Batch reconstruction; returns (coef (M,4,5), point values (M,npts,4))."""
    M = geo.mesh.ncells
    coef = np.empty((M, 4, 5))
    if dump is None:
        dump = np.empty((M, 11))
    reconstruct_batch(np.ascontiguousarray(Uext), np.ascontiguousarray(Wc), geo.big, geo.nbig, geo.mode,
                      geo.qpinv, geo.lin_pos, geo.lin_ok, geo.lin_pinv, geo.bmat, geo.gamma, geo.area,
                      geo.normals, geo.dir_weight, eos.Gamma, WEIGHTS[variant], coef, dump)
    pts = np.empty((M, geo.npoints, 4))
    evaluate_points(np.ascontiguousarray(Uext[:M]), coef, geo.psi_pts, pts)
    return coef, pts
