"""Snapshot, grid and log writers.

CSV snapshots store floats with 17 significant digits, so reading one back
reproduces the cell means bitwise. Grid files use the legacy VTK ASCII
unstructured-grid format with per-cell scalars.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .mesh import Mesh

SNAPSHOT_COLUMNS = ["cell", "x", "y", "D", "m1", "m2", "E", "rho", "v1", "v2", "p"]
LOG_COLUMNS = ["step", "t", "dt", "theta", "theta_D_min", "theta_g_min", "retries",
               "total_D", "total_m1", "total_m2", "total_E"]
DUMP_COLUMNS = ["cell", "beta0", "beta1", "beta2", "beta3", "beta4", "tau",
                "w0", "w1", "w2", "w3", "w4"]


def _fmt(x):
    return repr(float(x))


def write_snapshot_csv(path, mesh: Mesh, U, W, header=None):
    """One row per cell: id, barycenter, conserved means, recovered primitives.

    ``header`` lines are written first as ``# key=value`` comments.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        for key, val in (header or {}).items():
            fh.write(f"# {key}={val}\n")
        w = csv.writer(fh)
        w.writerow(SNAPSHOT_COLUMNS)
        for c in range(mesh.ncells):
            w.writerow([c, *map(_fmt, mesh.centroid[c]), *map(_fmt, U[c]), *map(_fmt, W[c])])
    return path


def read_snapshot_csv(path):
    """Returns (header dict, cell ids, barycenters (M, 2), U (M, 4), W (M, 4))."""
    header = {}
    rows = []
    with Path(path).open(newline="") as fh:
        lines = []
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                header[key] = val
            else:
                lines.append(line)
    reader = csv.reader(lines)
    cols = next(reader)
    if cols != SNAPSHOT_COLUMNS:
        raise ValueError(f"{path}: unexpected columns {cols}")
    for row in reader:
        rows.append(row)
    ids = np.array([int(r[0]) for r in rows], dtype=np.int64)
    vals = np.array([[float(v) for v in r[1:]] for r in rows]).reshape(len(rows), 10)
    return header, ids, vals[:, :2], vals[:, 2:6], vals[:, 6:10]


def write_vtk(path, mesh: Mesh, W, title="pcprhd snapshot"):
    """Legacy ASCII unstructured grid with cell scalars rho, p, |v| and ln rho."""
    path = Path(path)
    W = np.asarray(W)
    rho = W[:, 0]
    speed = np.hypot(W[:, 1], W[:, 2])
    fields = {"rho": rho, "p": W[:, 3], "speed": speed, "ln_rho": np.log(rho)}
    M = mesh.ncells
    out = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID",
           f"POINTS {len(mesh.nodes)} double"]
    out += [f"{x!r} {y!r} 0.0" for x, y in mesh.nodes.tolist()]
    out.append(f"CELLS {M} {4 * M}")
    out += [f"3 {a} {b} {c}" for a, b, c in mesh.tris.tolist()]
    out.append(f"CELL_TYPES {M}")
    out += ["5"] * M
    out.append(f"CELL_DATA {M}")
    for name, val in fields.items():
        out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        out += [repr(v) for v in val.tolist()]
    path.write_text("\n".join(out) + "\n")
    return path


def read_vtk_cell_count(path):
    for line in Path(path).read_text().splitlines():
        if line.startswith("CELLS "):
            return int(line.split()[1])
    raise ValueError(f"{path}: no CELLS section")


def write_run_log(path, records):
    """Per-step CSV: step, t, dt, limited-cell ratio, minimum thetas, retries, totals."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LOG_COLUMNS)
        for r in records:
            w.writerow([r.step, _fmt(r.t), _fmt(r.dt), _fmt(r.theta_ratio), _fmt(r.theta_D_min),
                        _fmt(r.theta_g_min), r.retries, *map(_fmt, r.totals)])
    return path


def read_run_log(path):
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        return [{k: float(v) for k, v in row.items()} for row in reader]


def write_abort_dump(path, mesh: Mesh, U, cell, t, W=None, reason=""):
    """Full cell-mean snapshot of the state that failed, tagged with the offending cell.

    Primitive columns hold NaN where no recovered state is supplied.
    """
    if W is None:
        W = np.full_like(np.asarray(U, dtype=float), np.nan)
    return write_snapshot_csv(path, mesh, U, W, header={"offending_cell": cell, "t": _fmt(t),
                                                       "reason": reason.replace("\n", " ")})


def write_weno_dump(path, dump):
    """Per-cell smoothness indicators, tau and nonlinear weights of the most nonlinear field."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DUMP_COLUMNS)
        for c, row in enumerate(np.asarray(dump)):
            w.writerow([c, *map(_fmt, row)])
    return path
