"""Structured triangulations of the unit square and the L-shaped domain.

Both domains are meshed by an n x n grid of squares of side 1/n, each square
split into two triangles along its lower-left to upper-right diagonal.  The
L-shaped domain is the unit square with the closed upper-right quadrant
[1/2, 1] x [1/2, 1] removed, so n must be even for the re-entrant corner to
be a grid point.
"""

import json

import numpy as np

UNIT_SQUARE = "square"
L_SHAPE = "lshape"

DOMAINS = (UNIT_SQUARE, L_SHAPE)
DOMAIN_AREA = {UNIT_SQUARE: 1.0, L_SHAPE: 0.75}


class Mesh:
    """Conforming triangle mesh with edge adjacency and per-entity geometry.

    Attributes
    ----------
    vertices : (V, 2) float array
        Vertex coordinates.
    cells : (C, 3) int array
        Vertex triples, counter-clockwise.
    edges : (E, 2) int array
        Vertex pairs in canonical (ascending-index) orientation; the edge
        parameter t in [0, 1] runs from the lower to the higher vertex index.
    cell_edges : (C, 3) int array
        Edge index of local edge l, which runs CCW from local vertex l to
        local vertex (l + 1) % 3.
    cell_edge_signs : (C, 3) int array
        +1 when the canonical edge direction agrees with the CCW traversal,
        -1 when it is reversed.
    edge_cells : (E, 2) int array
        Incident cell indices, second entry -1 for boundary edges.
    boundary_edge : (E,) bool array
    area, diameter : (C,) float arrays
        Cell area and cell diameter (longest side).
    length : (E,) float array
    normals : (C, 3, 2) float array
        Unit outward normal per (cell, local edge).
    domain, n
        Structured-grid provenance; used for point location and reporting.
    """

    def __init__(self, vertices, cells, domain=None, n=None):
        self.vertices = np.asarray(vertices, dtype=float)
        self.cells = np.asarray(cells, dtype=np.int64)
        self.domain = domain
        self.n = n
        self._build_edges()
        self._build_geometry()

    def _build_edges(self):
        edge_index = {}
        cell_edges = np.empty_like(self.cells)
        cell_edge_signs = np.empty_like(self.cells)
        for ci, tri in enumerate(self.cells):
            for l in range(3):
                p, q = int(tri[l]), int(tri[(l + 1) % 3])
                key = (p, q) if p < q else (q, p)
                ei = edge_index.setdefault(key, len(edge_index))
                cell_edges[ci, l] = ei
                cell_edge_signs[ci, l] = 1 if p < q else -1
        self.edges = np.array(sorted(edge_index, key=edge_index.get), dtype=np.int64)
        self.cell_edges = cell_edges
        self.cell_edge_signs = cell_edge_signs
        edge_cells = np.full((len(self.edges), 2), -1, dtype=np.int64)
        for ci in range(len(self.cells)):
            for ei in self.cell_edges[ci]:
                if edge_cells[ei, 0] < 0:
                    edge_cells[ei, 0] = ci
                elif edge_cells[ei, 1] < 0:
                    edge_cells[ei, 1] = ci
                else:
                    raise ValueError(f"edge {ei} has more than two incident cells")
        self.edge_cells = edge_cells
        self.boundary_edge = edge_cells[:, 1] < 0

    def _build_geometry(self):
        v = self.vertices[self.cells]
        e0 = v[:, 1] - v[:, 0]
        e1 = v[:, 2] - v[:, 1]
        e2 = v[:, 0] - v[:, 2]
        cross = e0[:, 0] * (-e2[:, 1]) - e0[:, 1] * (-e2[:, 0])
        if np.any(cross <= 0):
            raise ValueError("cells must be counter-clockwise with positive area")
        self.area = 0.5 * cross
        side_len = np.stack(
            [np.linalg.norm(e0, axis=1), np.linalg.norm(e1, axis=1), np.linalg.norm(e2, axis=1)],
            axis=1,
        )
        self.diameter = side_len.max(axis=1)
        dv = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        self.length = np.linalg.norm(dv, axis=1)
        tangents = np.stack([e0, e1, e2], axis=1)
        normals = np.stack([tangents[:, :, 1], -tangents[:, :, 0]], axis=2)
        self.normals = normals / np.linalg.norm(normals, axis=2, keepdims=True)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def h_max(self):
        return float(self.diameter.max())

    def edge_endpoints(self, ei):
        """Canonical endpoints (p_lo, p_hi) of an edge."""
        lo, hi = self.edges[ei]
        return self.vertices[lo], self.vertices[hi]

    def boundary_normal(self, ei):
        """Outward normal of a boundary edge (from its unique incident cell)."""
        if not self.boundary_edge[ei]:
            raise ValueError(f"edge {ei} is not a boundary edge")
        ci = int(self.edge_cells[ei, 0])
        l = int(np.where(self.cell_edges[ci] == ei)[0][0])
        return self.normals[ci, l]


def build_structured_mesh(domain, n):
    """Build the structured triangulation of a supported domain.

    Parameters
    ----------
    domain : str
        Either "square" (the unit square) or "lshape".
    n : int
        Number of grid cells per unit side; must be >= 1, and even for the
        L-shaped domain.
    """
    n = int(n)
    if domain not in DOMAINS:
        raise ValueError(f"unknown domain {domain!r}, expected one of {DOMAINS}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if domain == L_SHAPE and n % 2 != 0:
        raise ValueError(f"L-shaped domain requires even n, got {n}")

    removed_vertex = lambda i, j: domain == L_SHAPE and i > n // 2 and j > n // 2
    removed_square = lambda i, j: domain == L_SHAPE and i >= n // 2 and j >= n // 2

    index = {}
    vertices = []
    for j in range(n + 1):
        for i in range(n + 1):
            if removed_vertex(i, j):
                continue
            index[(i, j)] = len(vertices)
            vertices.append((i / n, j / n))

    cells = []
    for j in range(n):
        for i in range(n):
            if removed_square(i, j):
                continue
            a = index[(i, j)]
            b = index[(i + 1, j)]
            c = index[(i + 1, j + 1)]
            d = index[(i, j + 1)]
            cells.append((a, b, c))
            cells.append((a, c, d))

    return Mesh(np.array(vertices), np.array(cells), domain=domain, n=n)


def mesh_stats(mesh):
    """Summary counts and geometry totals for a mesh."""
    return {
        "h_max": mesh.h_max,
        "n_cells": mesh.n_cells,
        "n_edges": mesh.n_edges,
        "n_vertices": mesh.n_vertices,
        "n_boundary_edges": int(mesh.boundary_edge.sum()),
        "total_area": float(mesh.area.sum()),
    }


def outward_normal(mesh, cell, local_edge):
    """Unit outward normal of a cell's local edge."""
    if not 0 <= cell < mesh.n_cells:
        raise IndexError(f"cell index {cell} out of range")
    if not 0 <= local_edge < 3:
        raise IndexError(f"local edge index {local_edge} out of range")
    return mesh.normals[cell, local_edge].copy()


def locate_cell(mesh, x, y):
    """Cell index containing a point of a structured mesh, or -1 if outside.

    Points on internal cell interfaces are assigned deterministically; the
    lower triangle of a grid square owns its diagonal.
    """
    if mesh.domain not in DOMAINS or mesh.n is None:
        raise ValueError("point location requires a structured mesh")
    n = mesh.n
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        return -1
    if mesh.domain == L_SHAPE and x > 0.5 and y > 0.5:
        return -1
    i = min(int(x * n), n - 1)
    j = min(int(y * n), n - 1)
    if mesh.domain == L_SHAPE:
        # points on the notch boundary belong to the adjacent interior square
        if i >= n // 2 and j >= n // 2:
            if x <= 0.5:
                i = n // 2 - 1
            else:
                j = n // 2 - 1
        squares_per_row = [n if jj < n // 2 else n // 2 for jj in range(n)]
        if i >= squares_per_row[j]:
            return -1
        base = 2 * (sum(squares_per_row[:j]) + i)
    else:
        base = 2 * (j * n + i)
    fx = x * n - i
    fy = y * n - j
    return base if fy <= fx else base + 1


def mesh_to_json(mesh):
    """JSON dump of the mesh (schema documented in the README)."""
    payload = {
        "domain": mesh.domain,
        "n": mesh.n,
        "vertices": mesh.vertices.tolist(),
        "cells": mesh.cells.tolist(),
        "edges": mesh.edges.tolist(),
        "boundary_edge": mesh.boundary_edge.astype(int).tolist(),
    }
    return json.dumps(payload, indent=2)
