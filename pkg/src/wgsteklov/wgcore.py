"""Local weak Galerkin machinery on a single cell.

A discrete unknown on a cell is the block vector (v0, vb1, vb2, vb3): the
interior polynomial of degree <= k followed by one polynomial of degree <= k
per edge, each expressed in the orthonormal bases of :mod:`polyquad`.  This
module provides the L2 projections, the discrete weak gradient, the two
trace-penalty stabilizers, and the local contributions to the global forms.
"""

import numpy as np

from .polyquad import (
    CellBasis,
    EdgeBasis,
    VectorBasis,
    dim_pk,
    edge_quadrature,
    map_to_edge,
    map_to_triangle,
    triangle_quadrature,
)

# Quadrature exactness margins over the 2k needed for mass matrices: POLY for
# piecewise-polynomial integrands, ANALYTIC for smooth non-polynomial ones.
POLY_MARGIN = 3
ANALYTIC_MARGIN = 6


def n_local(k):
    """Length of the local DOF block: dim P_k(T) + 3 (k + 1)."""
    return dim_pk(k) + 3 * (k + 1)


class LocalCell:
    """Geometry and bases of one triangle, ready for local WG operators.

    Local edge l runs counter-clockwise from vertex l to vertex (l + 1) % 3.
    ``flips[l]`` is True when the canonical edge parameterization (used for
    the shared edge DOFs) runs opposite to that traversal; the canonical
    start/end points are exposed via :meth:`edge_canonical`.
    """

    def __init__(self, vertices, k, flips=(False, False, False)):
        self.vertices = np.asarray(vertices, dtype=float)
        self.k = int(k)
        if self.k < 1:
            raise ValueError(f"polynomial degree k must be >= 1, got {k}")
        self.flips = tuple(bool(f) for f in flips)
        self.basis = CellBasis(self.vertices, self.k)
        self._vector_basis = None
        self.edge_basis = EdgeBasis(self.k)
        self.area = self.basis.area
        self.diameter = self.basis.diameter
        tangents = self.vertices[[1, 2, 0]] - self.vertices
        self.edge_lengths = np.linalg.norm(tangents, axis=1)
        self.perimeter = float(self.edge_lengths.sum())
        normals = np.stack([tangents[:, 1], -tangents[:, 0]], axis=1)
        self.normals = normals / self.edge_lengths[:, None]
        self.n_interior = self.basis.dim
        self.n_edge = self.k + 1
        self.n_loc = self.n_interior + 3 * self.n_edge

    @property
    def vector_basis(self):
        if self._vector_basis is None:
            self._vector_basis = VectorBasis(self.vertices, self.k)
        return self._vector_basis

    @classmethod
    def from_mesh(cls, mesh, ci, k):
        flips = tuple(mesh.cell_edge_signs[ci] < 0)
        return cls(mesh.vertices[mesh.cells[ci]], k, flips)

    def edge_slice(self, l):
        start = self.n_interior + l * self.n_edge
        return slice(start, start + self.n_edge)

    def edge_canonical(self, l):
        """Canonical (t=0, t=1) endpoints of local edge l."""
        p = self.vertices[l]
        q = self.vertices[(l + 1) % 3]
        return (q, p) if self.flips[l] else (p, q)

    def geometry_key(self):
        """Translation-invariant cache key for local operator matrices."""
        rel = np.round(self.vertices - self.vertices[0], 12)
        return (self.k, rel.tobytes(), self.flips)


def project_cell(cell, f, quad_degree=None):
    """Coefficients of the L2(T) projection of f onto P_k(T).

    `f` maps an (n, 2) point array to n values.  The default quadrature is
    exact for polynomial f of degree <= k + POLY_MARGIN; pass an elevated
    `quad_degree` for analytic integrands.
    """
    deg = quad_degree if quad_degree is not None else 2 * cell.k + POLY_MARGIN
    pts, w = map_to_triangle(triangle_quadrature(deg), cell.vertices)
    phi = cell.basis.eval(pts)
    return (phi * w[:, None]).T @ np.asarray(f(pts), dtype=float)


def project_edge(k, p_lo, p_hi, f, quad_degree=None):
    """Coefficients of the L2(e) projection of f onto P_k(e).

    The edge runs from `p_lo` (t=0) to `p_hi` (t=1) in its canonical
    parameterization; `f` maps an (n, 2) point array to n values.
    """
    deg = quad_degree if quad_degree is not None else 2 * k + POLY_MARGIN
    rule = edge_quadrature(deg)
    pts, _ = map_to_edge(rule, p_lo, p_hi)
    phi = EdgeBasis(k).eval(rule.points)
    return (phi * rule.weights[:, None]).T @ np.asarray(f(pts), dtype=float)


def project_vector(cell, f, quad_degree=None):
    """Coefficients of the componentwise L2 projection onto [P_{k-1}(T)]^2.

    `f` maps an (n, 2) point array to an (n, 2) array of vector values.
    """
    deg = quad_degree if quad_degree is not None else 2 * cell.k + POLY_MARGIN
    pts, w = map_to_triangle(triangle_quadrature(deg), cell.vertices)
    values = np.asarray(f(pts), dtype=float)
    phi = cell.vector_basis.scalar.eval(pts)
    cx = (phi * w[:, None]).T @ values[:, 0]
    cy = (phi * w[:, None]).T @ values[:, 1]
    return np.concatenate([cx, cy])


def weak_gradient_map(cell):
    """Matrix mapping local DOFs to weak-gradient coefficients.

    Row i, column j holds (grad_w of local basis DOF j, w_i)_T for the i-th
    orthonormal vector basis member w_i, i.e. the weak gradient of a local
    DOF vector v is G @ v in vector-basis coefficients.
    """
    k = cell.k
    deg = 2 * k + POLY_MARGIN
    pts, w = map_to_triangle(triangle_quadrature(deg), cell.vertices)
    phi = cell.basis.eval(pts)
    div = cell.vector_basis.divergence(pts)
    G = np.zeros((cell.vector_basis.dim, cell.n_loc))
    G[:, : cell.n_interior] = -(div * w[:, None]).T @ phi

    rule = edge_quadrature(deg)
    eb = cell.edge_basis.eval(rule.points)
    for l in range(3):
        lo, hi = cell.edge_canonical(l)
        epts, ew = map_to_edge(rule, lo, hi)
        wn = cell.vector_basis.normal_trace(epts, cell.normals[l])
        G[:, cell.edge_slice(l)] += (wn * ew[:, None]).T @ eb
    return G


def _edge_mismatch_blocks(cell):
    """Per-edge matrices of the quadratic form <v0 - vb, w0 - wb>_{L2(e)}."""
    rule = edge_quadrature(2 * cell.k + POLY_MARGIN)
    eb = cell.edge_basis.eval(rule.points)
    blocks = []
    for l in range(3):
        lo, hi = cell.edge_canonical(l)
        epts, ew = map_to_edge(rule, lo, hi)
        D = np.zeros((len(rule.points), cell.n_loc))
        D[:, : cell.n_interior] = cell.basis.eval(epts)
        D[:, cell.edge_slice(l)] = -eb
        blocks.append((D * ew[:, None]).T @ D)
    return blocks


def local_stabilizer_gamma(cell, gamma_value):
    """Trace-penalty stabilizer gamma * h_T^{-1} sum_e <v0 - vb, w0 - wb>_e."""
    if not 0.0 < gamma_value <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma_value}")
    blocks = _edge_mismatch_blocks(cell)
    return gamma_value / cell.diameter * sum(blocks)


def local_stabilizer_alpha(cell, alpha):
    """Volume-weighted stabilizer (alpha/3) h_T^{-2} |T| sum_e |e|^{-1} <...>_e."""
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    blocks = _edge_mismatch_blocks(cell)
    scale = alpha / 3.0 * cell.area / cell.diameter**2
    return scale * sum(b / el for b, el in zip(blocks, cell.edge_lengths))


def local_aw(cell, stabilizer):
    """Local matrix of the principal form: weak-gradient energy + interior mass + stabilizer."""
    G = weak_gradient_map(cell)
    A = G.T @ G
    A[: cell.n_interior, : cell.n_interior] += np.eye(cell.n_interior)
    A += stabilizer
    return 0.5 * (A + A.T)


def local_bw(mesh, edge_index, k):
    """L2(e) mass matrix of the edge basis on a boundary edge."""
    if not mesh.boundary_edge[edge_index]:
        raise ValueError(f"edge {edge_index} is interior; the boundary form has no support there")
    rule = edge_quadrature(2 * k + POLY_MARGIN)
    eb = EdgeBasis(k).eval(rule.points)
    return float(mesh.length[edge_index]) * (eb * rule.weights[:, None]).T @ eb


class LocalKernels:
    """Cached local operator matrices for every cell of a mesh.

    ``core`` is the stabilizer-free part G^T G + interior mass;
    ``stab_gamma`` and ``stab_alpha`` are the unit-coefficient stabilizers,
    to be scaled by gamma(h) or alpha at assembly time.  Matrices are cached
    by translation-invariant cell geometry, so structured meshes compute
    only one kernel set per cell congruence class.
    """

    def __init__(self, mesh, k):
        self.mesh = mesh
        self.k = int(k)
        self._cache = {}
        self._class_of = np.empty(mesh.n_cells, dtype=np.int64)
        self._kernels = []
        for ci in range(mesh.n_cells):
            cell = LocalCell.from_mesh(mesh, ci, self.k)
            key = cell.geometry_key()
            if key not in self._cache:
                self._cache[key] = len(self._kernels)
                self._kernels.append(self._compute(cell))
            self._class_of[ci] = self._cache[key]

    def _compute(self, cell):
        core = weak_gradient_map(cell)
        core = core.T @ core
        core[: cell.n_interior, : cell.n_interior] += np.eye(cell.n_interior)
        core = 0.5 * (core + core.T)
        sg = local_stabilizer_gamma(cell, 1.0)
        sa = local_stabilizer_alpha(cell, 1.0)
        return core, 0.5 * (sg + sg.T), 0.5 * (sa + sa.T)

    @property
    def n_classes(self):
        return len(self._kernels)

    def for_cell(self, ci):
        return self._kernels[self._class_of[ci]]

    def stacked(self, coefficient, kind):
        """(C, n_loc, n_loc) array of local matrices with the coefficient applied."""
        which = {"gamma": 1, "alpha": 2}[kind]
        per_class = np.array([core + coefficient * stabs[which - 1]
                              for core, *stabs in self._kernels])
        return per_class[self._class_of]

    def stacked_stabilizer(self, kind):
        which = {"gamma": 1, "alpha": 2}[kind]
        per_class = np.array([kern[which] for kern in self._kernels])
        return per_class[self._class_of]


def epsilon_h_diagnostic(u, grad_u, mesh, k, gamma_value, quad_degree=None):
    """Projection-defect energy of u minus the stabilizer energy of its interpolant.

    Returns sum_T ||(I - Q_vec) grad u||_T^2 + ||(I - Q_0) u||_T^2
    - s_gamma(Q_h u, Q_h u), evaluated residual-first so small values are not
    lost to cancellation.  `u` maps (n, 2) points to values, `grad_u` to
    (n, 2) gradients.
    """
    deg = quad_degree if quad_degree is not None else 2 * k + ANALYTIC_MARGIN
    rule = triangle_quadrature(deg)
    erule = edge_quadrature(deg)
    ebasis = EdgeBasis(k)
    eb = ebasis.eval(erule.points)

    edge_coefs = np.empty((mesh.n_edges, k + 1))
    for ei in range(mesh.n_edges):
        lo, hi = mesh.edge_endpoints(ei)
        epts, _ = map_to_edge(erule, lo, hi)
        edge_coefs[ei] = (eb * erule.weights[:, None]).T @ u(epts)

    defect = 0.0
    stab = 0.0
    for ci in range(mesh.n_cells):
        cell = LocalCell.from_mesh(mesh, ci, k)
        pts, w = map_to_triangle(rule, cell.vertices)
        uq = u(pts)
        gq = np.asarray(grad_u(pts), dtype=float)
        phi = cell.basis.eval(pts)
        c0 = (phi * w[:, None]).T @ uq
        defect += float(w @ (uq - phi @ c0) ** 2)
        phiv = cell.vector_basis.scalar.eval(pts)
        for comp in range(2):
            cg = (phiv * w[:, None]).T @ gq[:, comp]
            defect += float(w @ (gq[:, comp] - phiv @ cg) ** 2)
        for l in range(3):
            lo, hi = cell.edge_canonical(l)
            epts, ew = map_to_edge(erule, lo, hi)
            mismatch = cell.basis.eval(epts) @ c0 - eb @ edge_coefs[mesh.cell_edges[ci, l]]
            stab += float(ew @ mismatch**2) / cell.diameter
    return defect - gamma_value * stab
