"""Run orchestration: configuration, initial projection, time loop and outputs."""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import io
from .mesh import Mesh, interior_quadrature, load_mesh
from .meshgen import nested_family
from .physics import AdmissibilityError, EosParams, is_admissible, prim_to_cons
from .problems import ProblemSpec, get_problem, problem_library
from .recovery import ALGORITHMS, recover_batch
from .solver import Solver, SolverAbort, SolverConfig

FORMATS = ("csv", "vtk")
_WEIGHT_NAMES = {"invariant": "invariant", "scaling_invariant": "invariant", "original": "original"}
_RECOVERY_NAMES = {"fixedpoint": "fixed_point", **{a: a for a in ALGORITHMS}}
_BOOL = {"on": True, "true": True, "yes": True, "1": True, "off": False, "false": False, "no": False, "0": False}


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass
class RunConfig:
    problem: str = "vortex"
    mesh: str | None = None  # mesh file; the problem's generated mesh when unset
    h: float | None = None  # spacing of the generated mesh; problem default when unset
    tmax: float | None = None  # end time; problem default when unset
    cfl: float = 0.5
    weights: str = "invariant"
    recovery: str = "hybrid"
    limiter: bool = True
    eps_zero: bool = False
    out: str = "out"
    snapshot_every: int = 0  # steps between snapshots; 0 writes the initial and final states only
    formats: tuple = FORMATS
    max_steps: int | None = None
    monitor: bool = False  # negativity-proximity monitor on reconstructed edge densities
    weno_dump: bool = False  # per-cell smoothness indicators and weights of the final state

    def validate(self):
        if self.problem not in problem_library():
            raise ConfigError(f"unknown problem {self.problem!r}")
        if self.weights not in _WEIGHT_NAMES:
            raise ConfigError(f"weights must be invariant or original, got {self.weights!r}")
        self.weights = _WEIGHT_NAMES[self.weights]
        if self.recovery not in _RECOVERY_NAMES:
            raise ConfigError(f"unknown recovery algorithm {self.recovery!r}")
        self.recovery = _RECOVERY_NAMES[self.recovery]
        if not (0.0 < self.cfl <= 1.0):
            raise ConfigError("cfl must lie in (0, 1]")
        if self.h is not None and not self.h > 0.0:
            raise ConfigError("h must be positive")
        if self.tmax is not None and not self.tmax >= 0.0:
            raise ConfigError("tmax must be non-negative")
        if self.snapshot_every < 0:
            raise ConfigError("snapshot_every must be >= 0")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        bad = set(self.formats) - set(FORMATS)
        if bad:
            raise ConfigError(f"unknown output formats {sorted(bad)}")
        return self


def _convert(name, raw):
    raw = raw.strip()
    if name in ("limiter", "eps_zero", "monitor", "weno_dump"):
        if raw.lower() not in _BOOL:
            raise ConfigError(f"{name}: expected on/off, got {raw!r}")
        return _BOOL[raw.lower()]
    if name in ("mesh", "h", "tmax", "max_steps") and raw.lower() in ("", "none", "default"):
        return None
    try:
        if name in ("h", "tmax", "cfl"):
            return float(raw)
        if name in ("snapshot_every", "max_steps"):
            return int(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from None
    if name == "formats":
        return tuple(f.strip() for f in raw.split(",") if f.strip())
    return raw


def parse_config(text) -> RunConfig:
    """Parse flat ``key = value`` lines; ``#`` starts a comment. Unknown keys are errors."""
    known = {f.name for f in fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected key = value")
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, val)
    return RunConfig(**values).validate()


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def format_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, bool):
            v = "on" if v else "off"
        elif isinstance(v, tuple):
            v = ",".join(v)
        elif v is None:
            v = "none"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- projection and norms

def cell_means(mesh: Mesh, W_fn, eos: EosParams):
    """Cell means of prim_to_cons(W_fn(x, y)) by the degree-2 edge-midpoint rule."""
    q, w = interior_quadrature(mesh.nodes[mesh.tris])
    W = W_fn(q[..., 0], q[..., 1])
    return np.einsum("q,mqk->mk", w, prim_to_cons(W, eos))


def project_initial(problem: ProblemSpec, mesh: Mesh):
    U = cell_means(mesh, problem.initial, problem.eos)
    ok = is_admissible(U)
    if not ok.all():
        bad = int(np.flatnonzero(~ok)[0])
        raise AdmissibilityError(f"projected initial mean of cell {bad} is inadmissible")
    return U


def error_norms(U, exact_U, mesh: Mesh, eos: EosParams):
    """Area-weighted l1 and l2 errors of rho recovered from the numerical and exact means."""
    rho = recover_batch(U, eos)[0][:, 0]
    rho_ex = recover_batch(exact_U, eos)[0][:, 0]
    d = rho - rho_ex
    A = mesh.area
    return {"l1": float((A * np.abs(d)).sum() / A.sum()), "l2": float(math.sqrt((A * d * d).sum() / A.sum()))}


def convergence_table(problem: ProblemSpec, levels=3, h=None, config: SolverConfig | None = None):
    """Errors and observed orders of ``problem`` (needs an exact solution) on a nested family."""
    if problem.exact is None:
        raise ValueError(f"{problem.name} has no exact solution")
    cfg = config or SolverConfig(eos=problem.eos)
    rows = []
    for mesh in nested_family(problem.mesh(h), levels):
        solver = Solver(mesh, problem.boundary, cfg)
        U, t, log = solver.advance(project_initial(problem, mesh), 0.0, problem.t_end)
        exact = cell_means(mesh, lambda x, y: problem.exact(x, y, t), problem.eos)
        row = {"cells": mesh.ncells, "steps": len(log), **error_norms(U, exact, mesh, problem.eos)}
        if rows:
            for k in ("l1", "l2"):
                row[f"order_{k}"] = math.log(rows[-1][k] / row[k]) / math.log(2.0)
        rows.append(row)
    return rows


# ---------------------------------------------------------------- monitors

class NegativityMonitor:
    """Flags reconstructed edge densities below half the local plateau minimum.

    The plateau reference of a cell is the smallest recovered mean density over
    its reconstruction stencil (ghosts take their owner's value).
    """

    def __init__(self, solver: Solver, fraction=0.5):
        self.fraction = fraction
        m = solver.mesh
        M = m.ncells
        owner = np.concatenate([np.arange(M), solver.g_owner])
        big = solver.geo.big
        self.members = np.where(big >= 0, owner[np.where(big >= 0, big, 0)], np.arange(M)[:, None])
        self.flags = 0
        self.events = []
        self.worst = np.inf

    def __call__(self, stage, t):
        rho_mean = stage.wmean[:, 0]
        ref = rho_mean[self.members].min(axis=1)
        rho_pts = stage.wpoints[:, :6, 0]
        ratio = (rho_pts.min(axis=1) / ref)
        self.worst = min(self.worst, float(ratio.min()))
        hit = np.flatnonzero(ratio < self.fraction)
        if len(hit):
            self.flags += len(hit)
            self.events.append((float(t), int(hit[0]), float(ratio[hit[0]])))

    @property
    def silent(self):
        return self.flags == 0


# ---------------------------------------------------------------- run

@dataclass
class RunResult:
    U: np.ndarray
    W: np.ndarray
    t: float
    log: list
    summary: dict
    mesh: Mesh
    files: list = field(default_factory=list)


def build(cfg: RunConfig):
    """Problem, mesh and solver for a validated config."""
    problem = get_problem(cfg.problem)
    mesh = load_mesh(cfg.mesh) if cfg.mesh else problem.mesh(cfg.h)
    scfg = SolverConfig(eos=problem.eos, cfl=cfg.cfl, weights=cfg.weights, recovery=cfg.recovery,
                        limiter=cfg.limiter, eps_zero=cfg.eps_zero, axisymmetric=problem.axisymmetric)
    return problem, mesh, Solver(mesh, problem.boundary, scfg)


def _recover_where_admissible(U, eos):
    W = np.full_like(U, np.nan)
    ok = is_admissible(U)
    if ok.any():
        W[ok] = recover_batch(U[ok], eos)[0]
    return W


def run(cfg: RunConfig, echo=None) -> RunResult:
    """Time loop to the end time with snapshots, run log and a JSON summary in ``cfg.out``.

    Solver aborts write ``abort.csv`` and the partial run log, then propagate.
    """
    cfg.validate()
    problem, mesh, solver = build(cfg)
    eos = problem.eos
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t_end = problem.t_end if cfg.tmax is None else cfg.tmax
    monitor = None
    if cfg.monitor:
        monitor = NegativityMonitor(solver)
        solver.stage_hook = monitor
    files = []
    log = []

    def snapshot(tag, U, t):
        W = recover_batch(U, eos)[0]
        if "csv" in cfg.formats:
            files.append(io.write_snapshot_csv(out / f"snapshot_{tag}.csv", mesh, U, W, header={"t": repr(t)}))
        if "vtk" in cfg.formats:
            files.append(io.write_vtk(out / f"snapshot_{tag}.vtk", mesh, W, title=f"{problem.name} t={t!r}"))
        return W

    def on_step(rec, U):
        log.append(rec)
        if cfg.snapshot_every and rec.step % cfg.snapshot_every == 0:
            snapshot(f"{rec.step:06d}", U, rec.t)
        if echo is not None and (rec.step % 100 == 0):
            echo(f"step {rec.step:6d}  t = {rec.t:.6g}  dt = {rec.dt:.3e}  theta = {rec.theta_ratio:.4f}")

    U = project_initial(problem, mesh)
    snapshot("initial", U, 0.0)
    wall = time.perf_counter()
    try:
        U, t, _ = solver.advance(U, 0.0, t_end, on_step=on_step, max_steps=cfg.max_steps)
    except SolverAbort as exc:
        files.append(io.write_abort_dump(out / "abort.csv", mesh, exc.U, exc.cell, exc.t,
                                         W=_recover_where_admissible(exc.U, eos), reason=str(exc)))
        files.append(io.write_run_log(out / "run_log.csv", log))
        raise
    wall = time.perf_counter() - wall
    W = snapshot("final", U, t)
    files.append(io.write_run_log(out / "run_log.csv", log))
    if cfg.weno_dump:
        files.append(io.write_weno_dump(out / "weno_dump.csv", solver.operator(U, t).dump))
    thetas = [r.theta_ratio for r in log]
    summary = {
        "problem": problem.name,
        "cells": mesh.ncells,
        "steps": len(log),
        "t": t,
        "wall_time": wall,
        "recovery_time": solver.recovery_time,
        "recovery_share": solver.recovery_time / wall if wall > 0 else 0.0,
        "theta_max": max(thetas, default=0.0),
        "theta_mean": float(np.mean(thetas)) if thetas else 0.0,
        "retries": sum(r.retries for r in log),
        "collapsed_cells": solver.collapsed,
        "rho_min": float(W[:, 0].min()),
        "p_min": float(W[:, 3].min()),
        "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(cfg).items()},
    }
    if monitor is not None:
        summary["monitor_flags"] = monitor.flags
        summary["monitor_worst_ratio"] = monitor.worst
    if problem.exact is not None:
        exact = cell_means(mesh, lambda x, y: problem.exact(x, y, t), eos)
        summary["errors"] = error_norms(U, exact, mesh, eos)
    path = out / "summary.json"
    path.write_text(json.dumps(summary, indent=2) + "\n")
    files.append(path)
    return RunResult(U, W, t, log, summary, mesh, files)
