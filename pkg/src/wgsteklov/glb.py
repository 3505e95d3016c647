"""Guaranteed-lower-bound pathway: certificate arithmetic and defect-ratio probing.

The certificate needs two constants: `proj_bound` (delta) bounding the
boundary projection defect by the gradient projection defect, and
`stab_bound` (Lambda) bounding the stabilizer energy of interpolants by the
same defect.  Proof-grade values come from external analysis and enter as
configuration; :func:`estimate_delta` provides a numerical lower estimate of
`proj_bound` by maximizing the defect ratio over a continuous piecewise
polynomial probe space, for exploratory certification only.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .assembly import AlphaStabilizer, assemble
from .eigen import solve_pair
from .mesh import build_structured_mesh
from .polyquad import (
    CellBasis,
    EdgeBasis,
    dim_pk,
    edge_quadrature,
    map_to_triangle,
    monomial_exponents,
    triangle_quadrature,
)
from .wgcore import LocalCell


@dataclass(frozen=True)
class GlbConfig:
    """Certificate inputs: stabilizer weight and the two analysis constants.

    `index` is the 1-based eigenvalue the certificate targets.
    """

    alpha: float
    stab_bound: float
    proj_bound: float = None
    index: int = 1

    def __post_init__(self):
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.stab_bound < 0.0:
            raise ValueError(f"stab_bound must be nonnegative, got {self.stab_bound}")
        if self.proj_bound is not None and self.proj_bound < 0.0:
            raise ValueError(f"proj_bound must be nonnegative, got {self.proj_bound}")
        if self.index < 1:
            raise ValueError(f"index must be >= 1, got {self.index}")


@dataclass(frozen=True)
class Certificate:
    """Outcome of the lower-bound criterion; case 0 means not certified."""

    certified: bool
    case: int

    def __bool__(self):
        return self.certified


def glb_criterion(config, lambda_exact, lambda_h):
    """Check the lower-bound certificate for one eigenvalue.

    Certifies lambda_h <= lambda when either
    (1) proj_bound * lambda_exact + alpha * stab_bound <= 1 (if the exact
        value is supplied), or
    (2) proj_bound * lambda_h + alpha * stab_bound <= 1.
    This is a certificate check on given constants, not a computation of the
    exact eigenvalue.
    """
    if config.proj_bound is None:
        raise ValueError("criterion requires a concrete proj_bound")
    if lambda_h <= 0.0:
        raise ValueError(f"lambda_h must be positive, got {lambda_h}")
    if lambda_exact is not None and lambda_exact < 0.0:
        raise ValueError(f"lambda_exact must be nonnegative, got {lambda_exact}")
    budget = config.alpha * config.stab_bound
    if lambda_exact is not None and config.proj_bound * lambda_exact + budget <= 1.0:
        return Certificate(True, 1)
    if config.proj_bound * lambda_h + budget <= 1.0:
        return Certificate(True, 2)
    return Certificate(False, 0)


class LagrangeProbeSpace:
    """Continuous piecewise P_p space on a triangulation, nodal basis.

    Nodes sit at vertices, at p - 1 points along each edge (ordered by the
    canonical edge parameter), and at interior barycentric lattice points,
    so shared nodes coincide between neighboring cells and traces match.
    """

    def __init__(self, mesh, degree):
        if degree < 1:
            raise ValueError(f"probe degree must be >= 1, got {degree}")
        self.mesh = mesh
        self.p = int(degree)
        self.n_edge_nodes = self.p - 1
        self.n_cell_nodes = dim_pk(self.p) - 3 - 3 * self.n_edge_nodes
        self.n_dofs = (
            mesh.n_vertices + mesh.n_edges * self.n_edge_nodes + mesh.n_cells * self.n_cell_nodes
        )

    def edge_node_dofs(self, ei):
        start = self.mesh.n_vertices + ei * self.n_edge_nodes
        return np.arange(start, start + self.n_edge_nodes)

    def cell_node_dofs(self, ci):
        start = (
            self.mesh.n_vertices
            + self.mesh.n_edges * self.n_edge_nodes
            + ci * self.n_cell_nodes
        )
        return np.arange(start, start + self.n_cell_nodes)

    def cell_nodes(self, ci):
        """Physical node positions and global DOFs of one cell, edge nodes in
        canonical order."""
        mesh = self.mesh
        cell = LocalCell.from_mesh(mesh, ci, 1)
        points = [mesh.vertices[v] for v in mesh.cells[ci]]
        gdofs = list(mesh.cells[ci])
        for l in range(3):
            lo, hi = cell.edge_canonical(l)
            for i in range(1, self.p):
                points.append(lo + (i / self.p) * (hi - lo))
            gdofs.extend(self.edge_node_dofs(mesh.cell_edges[ci, l]))
        verts = mesh.vertices[mesh.cells[ci]]
        for a in range(1, self.p):
            for b in range(1, self.p - a):
                c = self.p - a - b
                points.append((a * verts[0] + b * verts[1] + c * verts[2]) / self.p)
        gdofs.extend(self.cell_node_dofs(ci))
        return np.array(points), np.array(gdofs, dtype=np.int64)

    def local_basis(self, ci):
        """Evaluators for the local nodal basis: (eval, grad) callables."""
        nodes, gdofs = self.cell_nodes(ci)
        centroid = self.mesh.vertices[self.mesh.cells[ci]].mean(axis=0)
        scale = float(self.mesh.diameter[ci])
        exps = monomial_exponents(self.p)

        def raw(pts):
            t = (np.asarray(pts) - centroid) / scale
            return t[:, 0:1] ** exps[:, 0] * t[:, 1:2] ** exps[:, 1]

        def raw_grad(pts):
            t = (np.asarray(pts) - centroid) / scale
            a, b = exps[:, 0], exps[:, 1]
            xa1 = np.where(a > 0, t[:, 0:1] ** np.maximum(a - 1, 0), 0.0)
            yb1 = np.where(b > 0, t[:, 1:2] ** np.maximum(b - 1, 0), 0.0)
            return a * xa1 * t[:, 1:2] ** b / scale, t[:, 0:1] ** a * b * yb1 / scale

        V = raw(nodes)
        Vinv = np.linalg.inv(V)
        return (
            lambda pts: raw(pts) @ Vinv,
            lambda pts: (raw_grad(pts)[0] @ Vinv, raw_grad(pts)[1] @ Vinv),
            gdofs,
        )


def estimate_delta(mesh, k, probe_degree, quad_degree=None):
    """Numerical lower estimate of the boundary-defect constant.

    Maximizes || (I - Q_b) f ||^2 over the boundary against
    || (I - Q_vec) grad f ||^2 over the domain, for f in a continuous
    piecewise P_{probe_degree} probe space, after deflating the common null
    space (piecewise P_k functions make both defects vanish).  The true
    constant can only be larger, so this is a lower estimate; meant for
    small meshes.
    """
    if probe_degree <= k:
        raise ValueError(
            f"probe_degree must exceed k (got {probe_degree} <= {k}); "
            "the whole probe space would sit in the null space"
        )
    space = LagrangeProbeSpace(mesh, probe_degree)
    p = space.p
    deg = quad_degree if quad_degree is not None else 2 * p + 2

    num = np.zeros((space.n_dofs, space.n_dofs))
    den = np.zeros((space.n_dofs, space.n_dofs))

    # numerator: boundary projection defect, edge by edge
    erule = edge_quadrature(deg)
    eb = EdgeBasis(k).eval(erule.points)
    tnodes = np.concatenate([[0.0, 1.0], np.arange(1, p) / p])
    tv = np.vander(tnodes, p + 1, increasing=True)
    trace = np.vander(erule.points, p + 1, increasing=True) @ np.linalg.inv(tv)
    proj = eb @ (eb * erule.weights[:, None]).T @ trace
    resid = trace - proj
    block = (resid * erule.weights[:, None]).T @ resid
    for ei in np.where(mesh.boundary_edge)[0]:
        lo_v, hi_v = mesh.edges[ei]
        gd = np.concatenate([[lo_v, hi_v], space.edge_node_dofs(ei)])
        num[np.ix_(gd, gd)] += float(mesh.length[ei]) * block

    # denominator: gradient projection defect, cell by cell
    rule = triangle_quadrature(deg)
    for ci in range(mesh.n_cells):
        basis_eval, basis_grad, gdofs = space.local_basis(ci)
        pts, w = map_to_triangle(rule, mesh.vertices[mesh.cells[ci]])
        gx, gy = basis_grad(pts)
        phiv = CellBasis(mesh.vertices[mesh.cells[ci]], k - 1).eval(pts)
        wproj = phiv @ (phiv * w[:, None]).T
        rx = gx - wproj @ gx
        ry = gy - wproj @ gy
        dloc = (rx * w[:, None]).T @ rx + (ry * w[:, None]).T @ ry
        den[np.ix_(gdofs, gdofs)] += dloc

    num = 0.5 * (num + num.T)
    den = 0.5 * (den + den.T)
    evals, Q = sla.eigh(den)
    keep = evals > 1e-10 * evals.max()
    if not np.any(keep):
        raise ValueError("probe space lies entirely in the defect null space")
    basis = Q[:, keep] / np.sqrt(evals[keep])
    reduced = basis.T @ num @ basis
    return float(sla.eigh(0.5 * (reduced + reduced.T), eigvals_only=True)[-1])


def run_glb_study(domain, levels, k, config, refs=None, probe_degree=None):
    """Run the lower-bound certificate study over a refinement sequence.

    Per level: assemble with the volume-weighted stabilizer, solve the first
    `config.index` eigenpairs, resolve proj_bound (configured value, or
    estimated when absent), and evaluate the certificate against the
    discrete eigenvalue (case 2) or the reference (case 1) when available.
    """
    rows = []
    for n in levels:
        mesh = build_structured_mesh(domain, n)
        pair = assemble(mesh, k, AlphaStabilizer(config.alpha))
        result = solve_pair(pair, config.index)
        lam_h = float(result.values[config.index - 1])
        if config.proj_bound is not None:
            delta = config.proj_bound
            delta_source = "configured"
        else:
            delta = estimate_delta(mesh, k, probe_degree if probe_degree else k + 2)
            delta_source = "estimated"
        level_config = GlbConfig(config.alpha, config.stab_bound, delta, config.index)
        ref = None if refs is None else float(refs[config.index - 1])
        cert = glb_criterion(level_config, ref, lam_h)
        rows.append(
            {
                "n": int(n),
                "h": mesh.h_max,
                "alpha": config.alpha,
                "stab_bound": config.stab_bound,
                "proj_bound": delta,
                "proj_bound_source": delta_source,
                "index": config.index,
                "lambda_h": lam_h,
                "reference": ref,
                "certified": cert.certified,
                "case": cert.case,
                "below_reference": None if ref is None else bool(lam_h <= ref + 1e-9),
            }
        )
    return rows
