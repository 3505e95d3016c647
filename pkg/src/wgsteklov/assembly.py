"""Global DOF management and assembly of the sparse operator pair (A, B).

DOFs are numbered cell blocks first (dim P_k per cell, ascending cell index)
followed by edge blocks (k + 1 per edge, ascending edge index).  The boundary
set consists of all DOFs of boundary edges; the boundary form B is supported
there only.  Assembly order is deterministic, so repeated runs produce
bit-identical matrices.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .polyquad import dim_pk
from .wgcore import ANALYTIC_MARGIN, LocalCell, LocalKernels, local_bw, project_cell, project_edge


@dataclass(frozen=True)
class PowerEps:
    """Stabilizer weight gamma(h) = h^eps.

    The lower-bound theory wants 0 < eps < 1/4; any eps in (0, 1) is accepted
    so experimental sweeps stay expressible.
    """

    eps: float

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")


@dataclass(frozen=True)
class NegInvLog:
    """Stabilizer weight gamma(h) = -1 / log(h); requires h < 1."""


@dataclass(frozen=True)
class GammaStabilizer:
    """Trace-penalty stabilizer with mesh-dependent weight gamma(h).

    `spec` is a PowerEps, a NegInvLog, or a fixed float in (0, 1].
    """

    spec: object

    def coefficient(self, h):
        return gamma_of_h(self.spec, h)


@dataclass(frozen=True)
class AlphaStabilizer:
    """Volume-weighted stabilizer with a fixed global coefficient alpha > 0."""

    alpha: float

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    def coefficient(self, h):
        return self.alpha


def gamma_of_h(spec, h):
    """Evaluate a gamma(h) specification at mesh size h.

    Fixed float specs are validated to lie in (0, 1] and returned unchanged.
    Both mesh-dependent choices decrease toward zero under refinement; the
    -1/log(h) choice only stays <= 1 once h <= 1/e.
    """
    if isinstance(spec, (int, float)):
        value = float(spec)
        if not 0.0 < value <= 1.0:
            raise ValueError(f"fixed gamma must lie in (0, 1], got {value}")
        return value
    if not 0.0 < h < 1.0:
        raise ValueError(f"gamma(h) requires h in (0, 1), got {h}")
    if isinstance(spec, PowerEps):
        return float(h**spec.eps)
    if isinstance(spec, NegInvLog):
        return float(-1.0 / np.log(h))
    raise TypeError(f"unknown gamma specification {spec!r}")


class DofMap:
    """Global numbering for the WG space on a mesh.

    Attributes
    ----------
    k : polynomial degree (>= 1)
    dim_cell, dim_edge : block sizes dim P_k and k + 1
    n_dofs : total DOF count C * dim_cell + E * dim_edge
    boundary_dofs : sorted int array of all DOFs on boundary edges
    interior_dofs : complement of boundary_dofs
    """

    def __init__(self, mesh, k):
        if k < 1:
            raise ValueError(f"polynomial degree k must be >= 1, got {k}")
        self.mesh = mesh
        self.k = int(k)
        self.dim_cell = dim_pk(self.k)
        self.dim_edge = self.k + 1
        self.n_cell_dofs = mesh.n_cells * self.dim_cell
        self.n_dofs = self.n_cell_dofs + mesh.n_edges * self.dim_edge
        bnd = np.where(mesh.boundary_edge)[0]
        self.boundary_dofs = (
            self.n_cell_dofs
            + (bnd[:, None] * self.dim_edge + np.arange(self.dim_edge)[None, :]).ravel()
        )
        mask = np.zeros(self.n_dofs, dtype=bool)
        mask[self.boundary_dofs] = True
        self.interior_dofs = np.where(~mask)[0]

    def cell_dofs(self, ci):
        return np.arange(ci * self.dim_cell, (ci + 1) * self.dim_cell)

    def edge_dofs(self, ei):
        start = self.n_cell_dofs + ei * self.dim_edge
        return np.arange(start, start + self.dim_edge)

    def local_to_global(self, ci):
        """Global indices of a cell's local block (interior, then 3 edges)."""
        parts = [self.cell_dofs(ci)]
        parts += [self.edge_dofs(ei) for ei in self.mesh.cell_edges[ci]]
        return np.concatenate(parts)


def build_dof_map(mesh, k):
    """Construct the global DOF numbering for degree k >= 1."""
    return DofMap(mesh, k)


class WgOperatorPair:
    """Assembled symmetric sparse forms A (principal) and B (boundary).

    A is symmetric positive definite for any positive stabilizer coefficient;
    B is positive semidefinite with support exactly on the boundary DOF block.
    """

    def __init__(self, A, B, dof_map, stabilizer, coefficient):
        self.A = A
        self.B = B
        self.dof_map = dof_map
        self.mesh = dof_map.mesh
        self.k = dof_map.k
        self.stabilizer = stabilizer
        self.coefficient = coefficient


def assemble(mesh, k, stabilizer):
    """Assemble the operator pair for a mesh, degree, and stabilizer spec."""
    dof_map = build_dof_map(mesh, k)
    kernels = LocalKernels(mesh, k)
    coefficient = stabilizer.coefficient(mesh.h_max)
    kind = "alpha" if isinstance(stabilizer, AlphaStabilizer) else "gamma"
    local = kernels.stacked(coefficient, kind)
    A = _scatter(local, dof_map)
    B = _assemble_boundary(mesh, dof_map)
    return WgOperatorPair(A, B, dof_map, stabilizer, coefficient)


def assemble_stabilizer(mesh, k, kind="gamma"):
    """Assembled unit-coefficient stabilizer matrix (for linearity checks)."""
    dof_map = build_dof_map(mesh, k)
    kernels = LocalKernels(mesh, k)
    return _scatter(kernels.stacked_stabilizer(kind), dof_map)


def _scatter(local, dof_map):
    n_loc = local.shape[1]
    gdofs = np.empty((dof_map.mesh.n_cells, n_loc), dtype=np.int64)
    for ci in range(dof_map.mesh.n_cells):
        gdofs[ci] = dof_map.local_to_global(ci)
    rows = np.repeat(gdofs, n_loc, axis=1).ravel()
    cols = np.tile(gdofs, (1, n_loc)).ravel()
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(dof_map.n_dofs, dof_map.n_dofs))
    return A.tocsr()


def _assemble_boundary(mesh, dof_map):
    rows, cols, data = [], [], []
    for ei in np.where(mesh.boundary_edge)[0]:
        block = local_bw(mesh, ei, dof_map.k)
        dofs = dof_map.edge_dofs(ei)
        rows.append(np.repeat(dofs, dof_map.dim_edge))
        cols.append(np.tile(dofs, dof_map.dim_edge))
        data.append(block.ravel())
    B = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dof_map.n_dofs, dof_map.n_dofs),
    )
    return B.tocsr()


def interpolate(mesh, k, f, quad_degree=None):
    """Global interpolant coefficients: cellwise and edgewise L2 projections of f.

    The default quadrature is elevated (analytic-integrand margin) since the
    usual argument is a smooth non-polynomial function.
    """
    dof_map = build_dof_map(mesh, k)
    deg = quad_degree if quad_degree is not None else 2 * k + ANALYTIC_MARGIN
    coeffs = np.zeros(dof_map.n_dofs)
    for ci in range(mesh.n_cells):
        cell = LocalCell.from_mesh(mesh, ci, k)
        coeffs[dof_map.cell_dofs(ci)] = project_cell(cell, f, quad_degree=deg)
    for ei in range(mesh.n_edges):
        lo, hi = mesh.edge_endpoints(ei)
        coeffs[dof_map.edge_dofs(ei)] = project_edge(k, lo, hi, f, quad_degree=deg)
    return coeffs


def energy(matrix, u, v=None):
    """Bilinear form value u^T M v (v defaults to u)."""
    v = u if v is None else v
    return float(u @ (matrix @ v))


def dump_matrix_market(path, matrix):
    """Write a sparse matrix in MatrixMarket coordinate format."""
    from scipy.io import mmwrite

    mmwrite(str(path), sp.coo_matrix(matrix))
