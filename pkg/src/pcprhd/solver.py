"""Semi-discrete residual, time step control and SSP-RK3 stepping.

One stage of the operator runs as a pipeline of compiled phases: recover the
cell means, fill the ghost means from the boundary conditions, reconstruct in
characteristic fields, limit the point values, recover them, then sweep the
edges once with the HLL flux.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import _kernels as K
from .limiter import limit
from .mesh import Mesh
from .physics import AdmissibilityError, EosParams, in_primitive_set, is_admissible
from .reconstruction import WEIGHTS, WenoGeometry, reconstruct
from .recovery import ALGORITHMS, recover_batch

BC_KINDS = {
    "outflow": K.BC_OUTFLOW,
    "reflective": K.BC_REFLECTIVE,
    "inflow": K.BC_INFLOW,
    "moving_shock": K.BC_MOVING_SHOCK,
}

OMEGA_HAT = 1.0 / 6.0


@dataclass(frozen=True)
class BoundaryCondition:
    """One boundary treatment.

    ``state`` is the fixed primitive state of an inflow boundary. A moving shock
    uses ``left`` behind the front and ``right`` ahead of it; the front passes
    through ``origin + t * speed`` and moves with velocity ``speed``.
    """

    kind: str
    state: tuple | None = None
    left: tuple | None = None
    right: tuple | None = None
    origin: tuple = (0.0, 0.0)
    speed: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in BC_KINDS:
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        states = {"inflow": [self.state], "moving_shock": [self.left, self.right]}.get(self.kind, [])
        for s in states:
            if s is None or not in_primitive_set(np.asarray(s, dtype=float)):
                raise ValueError(f"{self.kind} boundary needs admissible primitive states")

    def params(self):
        par = np.zeros(12)
        if self.kind == "inflow":
            par[:4] = self.state
        elif self.kind == "moving_shock":
            par[:4] = self.left
            par[4:8] = self.right
            par[8:10] = self.origin
            par[10:12] = self.speed
        return par


OUTFLOW = BoundaryCondition("outflow")
REFLECTIVE = BoundaryCondition("reflective")


def ghost_state(W, bc: BoundaryCondition, n, x=0.0, y=0.0, t=0.0, eos: EosParams | None = None):
    """Exterior primitive state seen by a boundary point with outward normal ``n``."""
    out = np.empty(4)
    K.ghost_primitive(BC_KINDS[bc.kind], np.asarray(W, dtype=float), float(n[0]), float(n[1]),
                      float(x), float(y), float(t), bc.params(), out)
    return out


def hll_flux(UL, WL, UR, WR, n, eos: EosParams):
    out = np.empty(4)
    K.hll_flux(np.asarray(UL, float), np.asarray(WL, float), np.asarray(UR, float), np.asarray(WR, float),
               float(n[0]), float(n[1]), eos.Gamma, np.empty(4), np.empty(4), out)
    return out


@dataclass
class SolverConfig:
    eos: EosParams = field(default_factory=EosParams)
    cfl: float = 0.5
    weights: str = "invariant"
    recovery: str = "hybrid"
    limiter: bool = True
    eps_zero: bool = False
    axisymmetric: bool = False
    max_halvings: int = 5

    def __post_init__(self):
        if not (0.0 < self.cfl <= 1.0):
            raise ValueError("cfl must lie in (0, 1]")
        if self.weights not in WEIGHTS:
            raise ValueError(f"unknown weights {self.weights!r}")
        if self.recovery not in ALGORITHMS:
            raise ValueError(f"unknown recovery algorithm {self.recovery!r}")


class SolverAbort(AdmissibilityError):
    """Admissibility failure that stops a run; carries the state for the dump."""

    def __init__(self, msg, U, cell, t):
        super().__init__(msg)
        self.U = U
        self.cell = cell
        self.t = t


@dataclass
class StepRecord:
    step: int
    t: float
    dt: float
    theta_ratio: float
    theta_D_min: float
    theta_g_min: float
    retries: int
    totals: np.ndarray


@dataclass
class StageData:
    residual: np.ndarray
    sigma: np.ndarray
    theta: np.ndarray
    points: np.ndarray
    wpoints: np.ndarray
    wmean: np.ndarray
    coef: np.ndarray
    dump: np.ndarray


# ---------------------------------------------------------------- compiled phases

@njit(cache=True)
def _fill_ghosts(U, W, owner, gnormal, gmid, kinds, par, t, G, Uext):
    M = U.shape[0]
    Wg = np.empty(4)
    for c in range(M):
        for k in range(4):
            Uext[c, k] = U[c, k]
    for b in range(owner.shape[0]):
        K.ghost_primitive(kinds[b], W[owner[b]], gnormal[b, 0], gnormal[b, 1], gmid[b, 0], gmid[b, 1],
                          t, par[b], Wg)
        K.prim_to_cons(Wg[0], Wg[1], Wg[2], Wg[3], G, Uext[M + b])


@njit(cache=True)
def _edge_sweep(Up, Wp, edge_cells, edge_local, edge_ghost, normal, elen, gauss, area, kinds, par, t, G,
                res, sig):
    M = res.shape[0]
    for c in range(M):
        for k in range(4):
            res[c, k] = 0.0
    FL = np.empty(4)
    FR = np.empty(4)
    F = np.empty(4)
    acc = np.empty(4)
    We = np.empty(4)
    Ue = np.empty(4)
    for e in range(edge_cells.shape[0]):
        c1 = edge_cells[e, 0]
        j1 = edge_local[e, 0]
        c2 = edge_cells[e, 1]
        j2 = edge_local[e, 1]
        n1 = normal[c1, j1, 0]
        n2 = normal[c1, j1, 1]
        for k in range(4):
            acc[k] = 0.0
        smax = 0.0
        for q in range(2):
            iL = 2 * j1 + q
            if c2 >= 0:
                iR = 2 * j2 + 1 - q
                s = K.hll_flux(Up[c1, iL], Wp[c1, iL], Up[c2, iR], Wp[c2, iR], n1, n2, G, FL, FR, F)
            else:
                b = edge_ghost[e]
                K.ghost_primitive(kinds[b], Wp[c1, iL], n1, n2, gauss[c1, j1, q, 0], gauss[c1, j1, q, 1],
                                  t, par[b], We)
                K.prim_to_cons(We[0], We[1], We[2], We[3], G, Ue)
                s = K.hll_flux(Up[c1, iL], Wp[c1, iL], Ue, We, n1, n2, G, FL, FR, F)
            smax = max(smax, s)
            for k in range(4):
                acc[k] += 0.5 * F[k]
        L = elen[c1, j1]
        for k in range(4):
            res[c1, k] -= L * acc[k] / area[c1]
        sig[c1, j1] = smax
        if c2 >= 0:
            for k in range(4):
                res[c2, k] += L * acc[k] / area[c2]
            sig[c2, j2] = smax


@njit(cache=True)
def _axisym_source(Up, Wp, points, res):
    """Add the interior-rule average of -(1/r)(D v1, m1 v1, m2 v1, m1)."""
    for c in range(res.shape[0]):
        for q in range(6, 9):
            r = points[c, q, 0]
            v1 = Wp[c, q, 1]
            res[c, 0] -= Up[c, q, 0] * v1 / r / 3.0
            res[c, 1] -= Up[c, q, 1] * v1 / r / 3.0
            res[c, 2] -= Up[c, q, 2] * v1 / r / 3.0
            res[c, 3] -= Up[c, q, 1] / r / 3.0


@njit(cache=True)
def _source_bound(Up, Wp, points):
    # only the source quadrature points enter the source update; edge points may sit on r = 0
    best = np.inf
    for c in range(Up.shape[0]):
        for q in range(6, 9):
            v1 = Wp[c, q, 1]
            if v1 > 0.0:
                g = K.g_of(Up[c, q, 0], Up[c, q, 1], Up[c, q, 2], Up[c, q, 3])
                best = min(best, points[c, q, 0] * g / ((Wp[c, q, 3] + g) * abs(v1)))
    return best


# ---------------------------------------------------------------- solver

def assign_boundaries(mesh: Mesh, rule):
    """Per-ghost kind codes and parameters from ``rule(x, y, n) -> BoundaryCondition``.

    The rule sees the boundary edge midpoint and its outward normal.
    """
    c, j, _ = mesh.boundary_edges()
    mid = mesh.gauss[c, j].mean(axis=1)
    nrm = mesh.normal[c, j]
    kinds = np.empty(len(c), dtype=np.int64)
    par = np.zeros((len(c), 12))
    for b in range(len(c)):
        bc = rule(mid[b, 0], mid[b, 1], nrm[b]) if callable(rule) else rule
        kinds[b] = BC_KINDS[bc.kind]
        par[b] = bc.params()
    return kinds, par


class Solver:
    def __init__(self, mesh: Mesh, boundary=OUTFLOW, config: SolverConfig | None = None):
        self.mesh = mesh
        self.config = config or SolverConfig()
        cfg = self.config
        self.G = cfg.eos.Gamma
        self.geo = WenoGeometry(mesh, extra_points=cfg.axisymmetric)
        if cfg.axisymmetric and np.any(self.geo.points[:, 6:, 0] <= 0.0):
            raise ValueError("axisymmetric meshes must lie in r >= 0 with no degenerate axis cells")
        self.bc_kind, self.bc_par = assign_boundaries(mesh, boundary)
        c, j, _ = mesh.boundary_edges()
        self.g_owner = c
        self.g_normal = np.ascontiguousarray(mesh.normal[c, j])
        self.g_mid = np.ascontiguousarray(mesh.gauss[c, j].mean(axis=1))
        self.edge_ghost = -np.ones(len(mesh.edges), dtype=np.int64)
        self.edge_ghost[mesh.bedges] = np.arange(len(mesh.bedges))
        M = mesh.ncells
        # Newton's initial guess: each cell's pressure at the start of the current step
        self._p_last = np.zeros(M)
        self.recovery_time = 0.0
        self.stage_time = 0.0
        self.collapsed = 0
        self.stage_hook = None  # called as hook(stage, t) after every operator evaluation

    # -- helpers
    def totals(self, U):
        return (self.mesh.area[:, None] * U).sum(axis=0)

    def _recover(self, U, p0):
        t0 = time.perf_counter()
        W, _, _ = recover_batch(U, self.config.eos, self.config.recovery,
                                p0=p0 if self.config.recovery == "newton" else None, check=False)
        self.recovery_time += time.perf_counter() - t0
        return W

    def ghost_means(self, U, W, t):
        M = self.mesh.ncells
        Uext = np.empty((M + self.mesh.nghosts, 4))
        _fill_ghosts(U, W, self.g_owner, self.g_normal, self.g_mid, self.bc_kind, self.bc_par, t, self.G, Uext)
        return Uext

    def operator(self, U, t, new_step=False) -> StageData:
        """L(U) (plus the source in axisymmetric mode) and the per-edge wave speeds.

        ``new_step`` marks the first stage of a time step, whose recovered cell
        pressures seed Newton recovery for the rest of the step.
        """
        t0 = time.perf_counter()
        cfg = self.config
        U = np.ascontiguousarray(U)
        ok = is_admissible(U)
        if not ok.all():
            bad = int(np.flatnonzero(~ok)[0])
            raise SolverAbort(f"cell mean {bad} inadmissible", U, bad, t)
        W = self._recover(U, self._p_last)
        if new_step:
            self._p_last = W[:, 3].copy()
        Uext = self.ghost_means(U, W, t)
        dump = np.empty((len(U), 11))
        coef, pts = reconstruct(self.geo, Uext, W, cfg.eos, cfg.weights, dump)
        if cfg.limiter:
            theta, n = limit(U, pts, eps_zero=cfg.eps_zero, axisymmetric=cfg.axisymmetric)
            self.collapsed += n
        else:
            theta = np.ones((len(U), 2))
            ok = is_admissible(pts)
            if not ok.all():
                bad = int(np.flatnonzero(~ok.all(axis=1))[0])
                raise SolverAbort(f"reconstructed point value in cell {bad} inadmissible (limiter off)", U, bad, t)
        Wp = self._recover(pts, self._p_last[:, None])
        res = np.empty_like(U)
        sig = np.zeros((len(U), 3))
        m = self.mesh
        _edge_sweep(pts, Wp, m.edge_cells, m.edge_local, self.edge_ghost, m.normal, m.edge_len, m.gauss, m.area,
                    self.bc_kind, self.bc_par, t, self.G, res, sig)
        if cfg.axisymmetric:
            _axisym_source(pts, Wp, self.geo.points, res)
        self.stage_time += time.perf_counter() - t0
        stage = StageData(res, sig, theta, pts, Wp, W, coef, dump)
        if self.stage_hook is not None:
            self.stage_hook(stage, t)
        return stage

    def residual(self, U, t=0.0):
        return self.operator(U, t).residual

    def planar_bound(self, sigma):
        m = self.mesh
        with np.errstate(divide="ignore"):
            a = (2.0 / 3.0) * OMEGA_HAT * m.area[:, None] / (sigma * m.edge_len)
        return float(a.min())

    def compute_dt(self, stage: StageData):
        A_l = self.planar_bound(stage.sigma)
        if not self.config.axisymmetric:
            return self.config.cfl * A_l
        A_s = _source_bound(stage.points, stage.wpoints, self.geo.points)
        if not math.isfinite(A_s):
            return self.config.cfl * A_l
        beta = A_l / (A_s + A_l)
        return self.config.cfl * min((1.0 - beta) * A_l, beta * A_s)

    def euler_step(self, U, dt, t=0.0):
        st = self.operator(U, t)
        return U + dt * st.residual

    def _check(self, U, t):
        ok = is_admissible(U)
        if ok.all():
            return None
        return int(np.flatnonzero(~ok)[0])

    def step(self, U, t, dt_max=np.inf):
        """One SSP-RK3 step. Returns (U_new, dt, retries, stage thetas)."""
        s0 = self.operator(U, t, new_step=True)
        dt = min(self.compute_dt(s0), dt_max)
        retries = 0
        while True:
            thetas = [s0.theta]
            U1 = U + dt * s0.residual
            bad = self._check(U1, t + dt)
            if bad is None:
                s1 = self.operator(U1, t + dt)
                thetas.append(s1.theta)
                U2 = 0.75 * U + 0.25 * (U1 + dt * s1.residual)
                bad = self._check(U2, t + 0.5 * dt)
                if bad is None:
                    s2 = self.operator(U2, t + 0.5 * dt)
                    thetas.append(s2.theta)
                    U3 = U / 3.0 + 2.0 / 3.0 * (U2 + dt * s2.residual)
                    bad = self._check(U3, t + dt)
                    if bad is None:
                        return U3, dt, retries, thetas
            if retries >= self.config.max_halvings:
                raise SolverAbort(f"cell mean {bad} inadmissible after {retries} time-step halvings", U, bad, t)
            retries += 1
            dt *= 0.5

    def advance(self, U, t, t_end, on_step=None, max_steps=None):
        """March to ``t_end``; returns (U, t, list of StepRecord)."""
        log = []
        n = 0
        while t < t_end * (1.0 - 1e-14):
            U, dt, retries, thetas = self.step(U, t, dt_max=t_end - t)
            t = t + dt
            n += 1
            th = np.stack(thetas)
            ratio = float(((th < 1.0).any(axis=2)).mean(axis=1).max())
            rec = StepRecord(n, t, dt, ratio, float(th[..., 0].min()), float(th[..., 1].min()), retries,
                             self.totals(U))
            log.append(rec)
            if on_step is not None:
                on_step(rec, U)
            if max_steps is not None and n >= max_steps:
                break
        return U, t, log
