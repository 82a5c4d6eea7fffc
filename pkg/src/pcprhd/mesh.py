"""Triangular meshes: I/O, topology, per-cell geometry, quadrature and WENO stencils.

Local edge ``j`` of a triangle joins its vertices ``j`` and ``j+1`` (mod 3). Each
boundary edge owns one ghost cell, the mirror image of its interior cell across
the edge; ghost ``b`` has extended index ``ncells + b``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

GAUSS_PARAMS = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
GAUSS_WEIGHTS = np.array([0.5, 0.5])


class MeshError(ValueError):
    """Malformed mesh input."""


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float
    boundary_marker: int


@dataclass(frozen=True)
class EdgeRecord:
    length: float
    normal: tuple
    gauss_points: np.ndarray


@dataclass(frozen=True)
class Triangle:
    id: int
    nodes: tuple
    neighbors: tuple
    area: float
    barycenter: tuple
    edges: tuple


@dataclass
class Stencils:
    """Stencils of every cell in extended (cell or ghost) indices.

    ``big[c, :nbig[c]]`` is N0 with the target first. ``sector[c, l]`` lists the
    three non-target members of candidate ``l`` (0 is the central stencil, 1..3
    the sectorial ones); ``sector_ok[c, l]`` is False when the candidate was
    dropped.
    """

    big: np.ndarray
    nbig: np.ndarray
    sector: np.ndarray
    sector_ok: np.ndarray

    def central(self, c):
        return [c] + list(self.sector[c, 0])

    def sectorial(self, c):
        return [[c] + list(self.sector[c, l]) if self.sector_ok[c, l] else None for l in (1, 2, 3)]


@dataclass
class Mesh:
    nodes: np.ndarray
    tris: np.ndarray
    markers: np.ndarray
    area: np.ndarray = field(init=False)
    centroid: np.ndarray = field(init=False)
    nbr: np.ndarray = field(init=False)
    edge_len: np.ndarray = field(init=False)
    normal: np.ndarray = field(init=False)
    gauss: np.ndarray = field(init=False)
    edges: np.ndarray = field(init=False)
    edge_cells: np.ndarray = field(init=False)
    edge_local: np.ndarray = field(init=False)
    bedges: np.ndarray = field(init=False)
    cell_ghost: np.ndarray = field(init=False)
    ext_vertices: np.ndarray = field(init=False)
    ext_area: np.ndarray = field(init=False)
    ext_centroid: np.ndarray = field(init=False)
    ext_nbr: np.ndarray = field(init=False)
    stencils: Stencils = field(init=False)

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=float)
        self.tris = np.ascontiguousarray(self.tris, dtype=np.int64)
        self.markers = np.asarray(self.markers, dtype=np.int64)
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 2 or not np.all(np.isfinite(self.nodes)):
            raise MeshError("nodes must be a finite (N, 2) array")
        if self.tris.ndim != 2 or self.tris.shape[1] != 3 or len(self.tris) == 0:
            raise MeshError("triangles must be a non-empty (M, 3) array")
        if self.tris.min() < 0 or self.tris.max() >= len(self.nodes):
            raise MeshError("triangle references a missing node")
        self._orient()
        self._geometry()
        self._topology()
        self._ghosts()
        self.stencils = build_stencils(self)

    @property
    def ncells(self):
        return len(self.tris)

    @property
    def nghosts(self):
        return len(self.bedges)

    def _orient(self):
        p = self.nodes[self.tris]
        cross = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
            p[:, 1, 1] - p[:, 0, 1]
        ) * (p[:, 2, 0] - p[:, 0, 0])
        flip = cross < 0
        self.tris[flip] = self.tris[flip][:, [0, 2, 1]]
        area = 0.5 * np.abs(cross)
        tiny = (area <= 1e-14 * area.mean()) | (area == 0.0)
        if np.any(tiny):
            raise MeshError(f"degenerate triangle {int(np.flatnonzero(tiny)[0])}")
        self.area = area

    def _geometry(self):
        p = self.nodes[self.tris]
        self.centroid = p.mean(axis=1)
        a = p
        b = np.roll(p, -1, axis=1)
        d = b - a
        self.edge_len = np.hypot(d[..., 0], d[..., 1])
        self.normal = np.stack([d[..., 1], -d[..., 0]], axis=-1) / self.edge_len[..., None]
        t = GAUSS_PARAMS[None, None, :, None]
        self.gauss = a[:, :, None, :] + t * d[:, :, None, :]

    def _topology(self):
        M = self.ncells
        a = self.tris
        b = np.roll(self.tris, -1, axis=1)
        lo = np.minimum(a, b).ravel()
        hi = np.maximum(a, b).ravel()
        key = lo * len(self.nodes) + hi
        order = np.argsort(key, kind="stable")
        uniq, start, count = np.unique(key[order], return_index=True, return_counts=True)
        if np.any(count > 2):
            raise MeshError("non-manifold edge shared by more than two triangles")
        first = order[start]
        second = np.where(count == 2, order[np.minimum(start + 1, len(order) - 1)], -1)
        self.edges = np.stack([uniq // len(self.nodes), uniq % len(self.nodes)], axis=1)
        self.edge_cells = np.stack([first // 3, np.where(second >= 0, second // 3, -1)], axis=1)
        self.edge_local = np.stack([first % 3, np.where(second >= 0, second % 3, -1)], axis=1)
        nbr = -np.ones((M, 3), dtype=np.int64)
        inner = second >= 0
        c1, j1 = first[inner] // 3, first[inner] % 3
        c2, j2 = second[inner] // 3, second[inner] % 3
        if np.any(c1 == c2):
            raise MeshError("triangle repeats a node")
        nbr[c1, j1] = c2
        nbr[c2, j2] = c1
        self.nbr = nbr
        self.bedges = np.flatnonzero(~inner)

    def _ghosts(self):
        M = self.ncells
        nb = len(self.bedges)
        self.cell_ghost = -np.ones((M, 3), dtype=np.int64)
        c = self.edge_cells[self.bedges, 0]
        j = self.edge_local[self.bedges, 0]
        self.cell_ghost[c, j] = M + np.arange(nb)
        verts = self.nodes[self.tris]
        gv = np.empty((nb, 3, 2))
        for k in range(3):
            # ghost vertex k mirrors vertex (j + k) of the owner
            src = verts[c, (j + k) % 3]
            if k < 2:
                gv[:, k] = src
            else:
                n = self.normal[c, j]
                d = ((src - verts[c, j]) * n).sum(axis=1)
                gv[:, k] = src - 2.0 * d[:, None] * n
        self.ext_vertices = np.concatenate([verts, gv], axis=0)
        self.ext_area = np.concatenate([self.area, self.area[c]])
        self.ext_centroid = self.ext_vertices.mean(axis=1)
        ext_nbr = -np.ones((M + nb, 3), dtype=np.int64)
        ext_nbr[:M] = np.where(self.nbr >= 0, self.nbr, self.cell_ghost)
        ext_nbr[M:, 0] = c
        self.ext_nbr = ext_nbr

    def boundary_edges(self):
        """(owner cell, local edge, endpoint markers) for each boundary edge / ghost."""
        c = self.edge_cells[self.bedges, 0]
        j = self.edge_local[self.bedges, 0]
        ends = self.edges[self.bedges]
        return c, j, self.markers[ends]

    def triangle(self, i) -> Triangle:
        recs = tuple(
            EdgeRecord(float(self.edge_len[i, j]), tuple(self.normal[i, j]), self.gauss[i, j].copy())
            for j in range(3)
        )
        nb = tuple(int(k) if k >= 0 else None for k in self.nbr[i])
        return Triangle(i, tuple(int(k) for k in self.tris[i]), nb, float(self.area[i]),
                        tuple(self.centroid[i]), recs)

    def node(self, i) -> Node:
        return Node(i, float(self.nodes[i, 0]), float(self.nodes[i, 1]), int(self.markers[i]))

    def edge_gauss_points(self, cell, edge_index):
        return self.gauss[cell, edge_index].copy(), GAUSS_WEIGHTS.copy()

    def interior_quadrature(self, cell):
        return interior_quadrature(self.nodes[self.tris[cell]])


def edge_gauss_points(a, b):
    """Two-point Gauss rule on segment a-b: points and weights (summing to 1)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a + GAUSS_PARAMS[:, None] * (b - a), GAUSS_WEIGHTS.copy()


def interior_quadrature(vertices):
    """Edge-midpoint rule, exact for quadratics; weights are fractions of the area.

    ``vertices`` has shape (..., 3, 2); returns points (..., 3, 2) and weights (3,).
    """
    v = np.asarray(vertices, dtype=float)
    return 0.5 * (v + np.roll(v, -1, axis=-2)), np.full(3, 1.0 / 3.0)


def interior_point_quadrature(vertices):
    """Three-point rule at barycentric (2/3, 1/6, 1/6), exact for quadratics.

    All points are strictly inside the triangle, so integrands singular on an
    edge (the 1/r source next to a symmetry axis) stay finite.
    """
    v = np.asarray(vertices, dtype=float)
    pts = (2.0 / 3.0) * v + (1.0 / 6.0) * (np.roll(v, -1, axis=-2) + np.roll(v, 1, axis=-2))
    return pts, np.full(3, 1.0 / 3.0)


def build_stencils(mesh: Mesh) -> Stencils:
    M = mesh.ncells
    en = mesh.ext_nbr
    big = -np.ones((M, 10), dtype=np.int64)
    nbig = np.zeros(M, dtype=np.int64)
    sector = -np.ones((M, 4, 3), dtype=np.int64)
    ok = np.zeros((M, 4), dtype=bool)
    for c in range(M):
        members = [c]
        sector[c, 0] = en[c]
        ok[c, 0] = True
        members.extend(int(k) for k in en[c])
        for i in range(3):
            ki = en[c, i]
            if ki >= M:
                continue
            others = [int(k) for k in en[ki] if k != c]
            if len(others) != 2:
                continue
            sector[c, i + 1] = [ki] + others
            ok[c, i + 1] = True
            members.extend(others)
        seen = list(dict.fromkeys(members))
        nbig[c] = len(seen)
        big[c, : len(seen)] = seen
    return Stencils(big, nbig, sector, ok)


def load_mesh(path) -> Mesh:
    try:
        tokens = Path(path).read_text(encoding="utf-8").split()
    except OSError as exc:
        raise MeshError(f"cannot read mesh {path}: {exc}") from exc
    try:
        pos = 0
        nn = int(tokens[pos]); pos += 1
        rows = np.array(tokens[pos: pos + 4 * nn], dtype=float).reshape(nn, 4); pos += 4 * nn
        nt = int(tokens[pos]); pos += 1
        trows = np.array(tokens[pos: pos + 4 * nt], dtype=np.int64).reshape(nt, 4); pos += 4 * nt
    except (IndexError, ValueError) as exc:
        raise MeshError(f"cannot parse mesh {path}: {exc}") from exc
    if pos != len(tokens):
        raise MeshError(f"trailing data in mesh {path}")
    ids = rows[:, 0].astype(np.int64)
    if not np.array_equal(np.sort(ids), np.arange(nn)):
        raise MeshError("node ids must be dense 0..N-1")
    nodes = np.empty((nn, 2))
    markers = np.empty(nn, dtype=np.int64)
    nodes[ids] = rows[:, 1:3]
    markers[ids] = rows[:, 3].astype(np.int64)
    tris = np.empty((nt, 3), dtype=np.int64)
    tids = trows[:, 0]
    if not np.array_equal(np.sort(tids), np.arange(nt)):
        raise MeshError("triangle ids must be dense 0..M-1")
    tris[tids] = trows[:, 1:]
    return Mesh(nodes, tris, markers)


def save_mesh(mesh: Mesh, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(mesh.nodes)}\n")
        for i, (x, y) in enumerate(mesh.nodes.tolist()):
            fh.write(f"{i} {x!r} {y!r} {int(mesh.markers[i])}\n")
        fh.write(f"{mesh.ncells}\n")
        for i, (a, b, c) in enumerate(mesh.tris):
            fh.write(f"{i} {a} {b} {c}\n")
