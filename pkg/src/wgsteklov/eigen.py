"""Generalized eigensolver for the WG pencil via boundary condensation.

The boundary form B is supported only on boundary-edge DOFs, so the pencil
(A, B) reduces exactly to a dense problem on the boundary block: with
S = A_GG - A_GI A_II^{-1} A_IG and M the boundary block of B, the finite
eigenvalues of (A, B) are exactly the eigenvalues of (S, M), and interior
components are recovered by back-substitution through the retained
factorization of A_II.
"""

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class NumericalError(RuntimeError):
    """A factorization or solve failed, or a result missed its tolerance."""


DEFAULT_RTOL = 1e-9


class CondensedPencil:
    """Dense boundary-block reduction (S, M) of an operator pair.

    Holds the factorization of the interior block (and, when cell blocks
    were eliminated first, the cell-elimination map) so eigenvectors can be
    expanded back to full DOF vectors.
    """

    def __init__(self, S, M, pair, expand):
        self.S = S
        self.M = M
        self.pair = pair
        self.boundary_dofs = pair.dof_map.boundary_dofs
        self._expand = expand

    @property
    def size(self):
        return self.S.shape[0]

    def expand(self, x_boundary):
        """Full-length DOF vector(s) from boundary coefficients."""
        return self._expand(x_boundary)


def condense(pair, eliminate_cells=False, chunk=256):
    """Reduce an operator pair onto its boundary DOFs.

    With ``eliminate_cells`` the block-diagonal cell-interior block is
    eliminated exactly first (cells couple only to their own edges), so the
    sparse factorization sees the edge-only system; results agree with the
    default path to solver tolerance.
    """
    A = pair.A.tocsc()
    dof_map = pair.dof_map

    if eliminate_cells:
        nc = dof_map.n_cell_dofs
        d = dof_map.dim_cell
        A_cc = A[:nc, :nc].tobsr(blocksize=(d, d))
        blocks = np.ascontiguousarray(A_cc.data)
        try:
            inv_blocks = np.linalg.inv(blocks)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("cell-block elimination failed: singular cell block") from exc
        n_cells = dof_map.mesh.n_cells
        A_cc_inv = sp.bsr_matrix(
            (inv_blocks, np.arange(n_cells), np.arange(n_cells + 1)), shape=(nc, nc)
        ).tocsc()
        A_ce = A[:nc, nc:].tocsc()
        W = (A_cc_inv @ A_ce).tocsc()
        A_edges = (A[nc:, nc:] - A_ce.T @ W).tocsc()
        g_edges = dof_map.boundary_dofs - nc
        S, M, solve_interior, iidx = _boundary_schur(A_edges, pair.B, dof_map, g_edges, chunk, offset=nc)

        def expand(xg):
            u_edges = _expand_edges(A_edges.shape[0], g_edges, iidx, solve_interior, A_edges, xg)
            u_cells = -(W @ u_edges)
            return np.concatenate([u_cells, u_edges], axis=0)

    else:
        g = dof_map.boundary_dofs
        S, M, solve_interior, iidx = _boundary_schur(A, pair.B, dof_map, g, chunk, offset=0)

        def expand(xg):
            return _expand_edges(A.shape[0], g, iidx, solve_interior, A, xg)

    asym = np.abs(S - S.T).max()
    scale = np.abs(S).max()
    if asym > 1e-12 * scale:
        raise NumericalError(f"condensed matrix asymmetry {asym / scale:.2e} exceeds 1e-12")
    return CondensedPencil(0.5 * (S + S.T), M, pair, expand)


def _boundary_schur(A, B, dof_map, g, chunk, offset):
    n = A.shape[0]
    mask = np.zeros(n, dtype=bool)
    mask[g] = True
    iidx = np.where(~mask)[0]
    A_ii = A[iidx][:, iidx].tocsc()
    A_ig = A[iidx][:, g].tocsc()
    A_gg = A[g][:, g].toarray()
    try:
        lu = spla.splu(A_ii)
    except RuntimeError as exc:
        raise NumericalError(f"interior factorization failed: {exc}") from exc

    def solve_refined(rhs):
        # one refinement step keeps the factorization error out of the
        # condensed matrix and the eigenpair residuals
        x = lu.solve(rhs)
        x += lu.solve(rhs - A_ii @ x)
        return x

    S = A_gg
    for c0 in range(0, len(g), chunk):
        cols = slice(c0, min(c0 + chunk, len(g)))
        X = solve_refined(A_ig[:, cols].toarray())
        S[:, cols] -= A_ig.T @ X
    M = B[g + offset][:, g + offset].toarray()
    return S, M, solve_refined, iidx


def _expand_edges(n, g, iidx, solve_interior, A, xg):
    single = xg.ndim == 1
    X = xg[:, None] if single else xg
    u = np.zeros((n, X.shape[1]))
    u[g] = X
    A_ig = A[iidx][:, g]
    u[iidx] = -solve_interior(np.ascontiguousarray(A_ig @ X))
    return u[:, 0] if single else u


class EigenResult:
    """Eigenpairs of the WG pencil, ascending, boundary-form normalized.

    `residuals` holds the normwise backward error of each pair,
    ||A u - lambda B u|| / ((||A|| + lambda ||B||) ||u||); the raw ratio
    ||A u - lambda B u|| / ||A u|| has a double-precision floor that grows
    with the operator scaling and would reject correct solves on fine
    high-degree meshes.
    """

    def __init__(self, values, vectors, residuals, b_norms):
        self.values = values
        self.vectors = vectors
        self.residuals = residuals
        self.b_norms = b_norms

    @property
    def normalized(self):
        return np.abs(self.b_norms - 1.0) <= 1e-10


def solve_condensed(pencil, m, rtol=DEFAULT_RTOL):
    """Solve for the m smallest eigenpairs of the condensed pencil.

    The M-Cholesky congruence transforms (S, M) to a standard symmetric
    problem; eigenvectors come back b_w-normalized and are expanded to full
    DOF vectors.  Raises NumericalError if any backward-error residual (see
    EigenResult) exceeds `rtol`.
    """
    if not 1 <= m <= pencil.size:
        raise ValueError(f"m must lie in [1, {pencil.size}], got {m}")
    try:
        L = sla.cholesky(pencil.M, lower=True)
    except sla.LinAlgError as exc:
        raise NumericalError("boundary mass block is not positive definite") from exc
    St = sla.solve_triangular(L, pencil.S, lower=True)
    St = sla.solve_triangular(L, St.T, lower=True).T
    St = 0.5 * (St + St.T)
    values, Y = sla.eigh(St, subset_by_index=[0, m - 1])
    X = sla.solve_triangular(L.T, Y, lower=False)

    vectors = pencil.expand(X)
    A, B = pencil.pair.A, pencil.pair.B
    a_norm = float(abs(A).sum(axis=1).max())
    b_norm = float(abs(B).sum(axis=1).max())
    residuals = np.empty(m)
    b_norms = np.empty(m)
    for j in range(m):
        u = vectors[:, j]
        r = np.linalg.norm(A @ u - values[j] * (B @ u))
        residuals[j] = r / ((a_norm + abs(values[j]) * b_norm) * np.linalg.norm(u))
        b_norms[j] = u @ (B @ u)
    if np.any(residuals > rtol):
        raise NumericalError(
            f"eigenpair residual {residuals.max():.2e} exceeds tolerance {rtol:.1e}"
        )
    return EigenResult(values, vectors, residuals, b_norms)


def solve_pair(pair, m, eliminate_cells=False, rtol=DEFAULT_RTOL):
    """Condense and solve in one step."""
    return solve_condensed(condense(pair, eliminate_cells=eliminate_cells), m, rtol=rtol)


def rayleigh_quotient(pair, u):
    """Form quotient a_w(u, u) / b_w(u, u) of a discrete function."""
    den = float(u @ (pair.B @ u))
    if den <= 0.0:
        raise ValueError("function has no boundary content (b_w(u, u) <= 0)")
    return float(u @ (pair.A @ u)) / den


def dense_eigenvalues(pair):
    """All finite eigenvalues of (A, B) by a dense QZ solve, ascending.

    Brute-force reference path, independent of the condensation route; only
    sensible for small meshes.
    """
    A = pair.A.toarray()
    B = pair.B.toarray()
    alpha, beta = sla.eig(A, B, right=False, homogeneous_eigvals=True)
    scale = np.abs(alpha) + np.abs(beta)
    finite = np.abs(beta) > 1e-10 * scale
    values = np.real(alpha[finite] / beta[finite])
    return np.sort(values)
