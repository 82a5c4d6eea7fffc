"""Small triangular mesh generators for the shipped problems and the tests.

Meshes come from split quadrilateral grids (uniform or alternating diagonals,
optional seeded jitter of interior nodes, masking for re-entrant domains) or from
a Delaunay triangulation of a staggered lattice, which gives near-equilateral
cells. ``refine`` performs uniform 4-way refinement for nested families.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial import Delaunay

from .mesh import Mesh


def _split_quads(nx, ny, keep, alternate=False):
    """Triangles over the (nx+1) x (ny+1) lattice for quads where keep[i, j].

    Uniform diagonals give every interior node six triangles, so interior
    stencils have ten distinct cells; ``alternate`` flips them checkerwise.
    """
    def nid(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(ny):
        for i in range(nx):
            if not keep[i, j]:
                continue
            a, b, c, d = nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)
            if not alternate or (i + j) % 2 == 0:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    return np.array(tris, dtype=np.int64)


def _compact(nodes, tris):
    used = np.unique(tris)
    remap = -np.ones(len(nodes), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return nodes[used], remap[tris]


def _boundary_nodes(nnodes, tris):
    a = tris.ravel()
    b = np.roll(tris, -1, axis=1).ravel()
    key = np.minimum(a, b) * nnodes + np.maximum(a, b)
    uniq, count = np.unique(key, return_counts=True)
    single = uniq[count == 1]
    flag = np.zeros(nnodes, dtype=bool)
    flag[single // nnodes] = True
    flag[single % nnodes] = True
    return flag


def _finish(nodes, tris, jitter, spacing, seed):
    nodes, tris = _compact(nodes, tris)
    bnd = _boundary_nodes(len(nodes), tris)
    if jitter > 0.0:
        rng = np.random.default_rng(seed)
        shift = rng.uniform(-jitter, jitter, size=nodes.shape) * np.asarray(spacing)
        nodes = nodes + np.where(bnd[:, None], 0.0, shift)
    return Mesh(nodes, tris, bnd.astype(np.int64))


def rectangle(x0, x1, y0, y1, nx, ny, jitter=0.0, seed=0, keep=None, alternate=False):
    """Split-quad mesh of a rectangle.

    ``keep(xc, yc)`` optionally masks quads by their centres (re-entrant domains
    such as steps). ``jitter`` moves interior nodes by up to that fraction of the
    grid spacing.
    """
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.stack([X.ravel(), Y.ravel()], axis=1)
    if keep is None:
        mask = np.ones((nx, ny), dtype=bool)
    else:
        xc = 0.5 * (xs[:-1] + xs[1:])
        yc = 0.5 * (ys[:-1] + ys[1:])
        mask = np.asarray(keep(xc[:, None], yc[None, :]), dtype=bool)
        mask = np.broadcast_to(mask, (nx, ny))
    tris = _split_quads(nx, ny, mask, alternate)
    return _finish(nodes, tris, jitter, ((x1 - x0) / nx, (y1 - y0) / ny), seed)


def mapped(nx, ny, mapping, jitter=0.0, seed=0):
    """Split-quad mesh of the image of the unit square under ``mapping(xi, eta)``."""
    xi, eta = np.meshgrid(np.linspace(0, 1, nx + 1), np.linspace(0, 1, ny + 1))
    x, y = mapping(xi.ravel(), eta.ravel())
    nodes = np.stack([x, y], axis=1)
    tris = _split_quads(nx, ny, np.ones((nx, ny), dtype=bool))
    if jitter > 0.0:
        # jitter in the reference square keeps nodes inside curved-free domains
        rng = np.random.default_rng(seed)
        bnd = _boundary_nodes(len(nodes), tris)
        d = rng.uniform(-jitter, jitter, size=(len(nodes), 2)) / np.array([nx, ny])
        d[bnd] = 0.0
        x, y = mapping(xi.ravel() + d[:, 0], eta.ravel() + d[:, 1])
        nodes = np.stack([x, y], axis=1)
    return _finish(nodes, tris, 0.0, (1.0, 1.0), seed)


def lattice(x0, x1, y0, y1, h):
    """Delaunay mesh of a rectangle over a staggered (hexagonal) point lattice.

    Rows are ``h * sqrt(3) / 2`` apart and every other row is shifted by half a
    spacing; the sides keep their own nodes so the boundary is resolved exactly.
    """
    nx = max(1, int(round((x1 - x0) / h)))
    ny = max(1, int(round((y1 - y0) / (h * np.sqrt(3.0) / 2.0))))
    hx = (x1 - x0) / nx
    rows = []
    for j in range(ny + 1):
        if j in (0, ny) or j % 2 == 0:
            xs = np.linspace(x0, x1, nx + 1)
        else:
            xs = np.concatenate([[x0], x0 + hx * (np.arange(nx) + 0.5), [x1]])
        rows.append(np.stack([xs, np.full_like(xs, y0 + (y1 - y0) * j / ny)], axis=1))
    nodes = np.concatenate(rows)
    tris = Delaunay(nodes).simplices.astype(np.int64)
    return Mesh(nodes, tris, _boundary_nodes(len(nodes), tris).astype(np.int64))


def refine(mesh: Mesh) -> Mesh:
    """Uniform 4-way split through edge midpoints."""
    nn = len(mesh.nodes)
    mid = nn + np.arange(len(mesh.edges))
    key = np.minimum(mesh.edges[:, 0], mesh.edges[:, 1]) * nn + np.maximum(mesh.edges[:, 0], mesh.edges[:, 1])
    lookup = dict(zip(key.tolist(), mid.tolist()))
    t = mesh.tris
    m = np.empty_like(t)
    for j in range(3):
        a, b = t[:, j], t[:, (j + 1) % 3]
        k = np.minimum(a, b) * nn + np.maximum(a, b)
        m[:, j] = [lookup[v] for v in k.tolist()]
    nodes = np.concatenate([mesh.nodes, 0.5 * (mesh.nodes[mesh.edges[:, 0]] + mesh.nodes[mesh.edges[:, 1]])])
    tris = np.concatenate([
        np.stack([t[:, 0], m[:, 0], m[:, 2]], axis=1),
        np.stack([m[:, 0], t[:, 1], m[:, 1]], axis=1),
        np.stack([m[:, 2], m[:, 1], t[:, 2]], axis=1),
        np.stack([m[:, 0], m[:, 1], m[:, 2]], axis=1),
    ])
    bnd = _boundary_nodes(len(nodes), tris)
    return Mesh(nodes, tris, bnd.astype(np.int64))


def nested_family(base: Mesh, levels: int):
    meshes = [base]
    for _ in range(levels - 1):
        meshes.append(refine(meshes[-1]))
    return meshes
