"""Polynomial bases on triangles and edges, and quadrature rules of controlled exactness.

Triangle rules are conical (Duffy-type) products of Gauss-Legendre and
Gauss-Jacobi rules, so any requested exactness degree is available with
strictly positive weights.  Cell bases are monomials centered at the cell
centroid and scaled by the cell diameter, then orthonormalized in L2 of the
physical cell; edge bases are Legendre polynomials orthonormal with respect
to the unit parameter interval.
"""

from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss, legval
from scipy.linalg import solve_triangular
from scipy.special import roots_jacobi


def dim_pk(k):
    """Dimension of the polynomial space of total degree <= k in two variables."""
    return (k + 1) * (k + 2) // 2


def monomial_exponents(k):
    """Graded exponent pairs (a, b) for x^a y^b, a+b <= k, constant first."""
    exps = [(d - j, j) for d in range(k + 1) for j in range(d + 1)]
    return np.array(exps, dtype=np.int64)


class QuadratureRule:
    """A fixed quadrature rule with a stated polynomial exactness degree.

    Triangle rules store points in barycentric coordinates, shape (n, 3),
    with weights summing to one; the integral over a physical triangle T is
    |T| * sum(w * f(points @ vertices)).  Edge rules store points on [0, 1]
    with weights summing to one, so integrals over an edge pick up a factor
    of the edge length.
    """

    def __init__(self, points, weights, degree):
        self.points = np.asarray(points, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        self.degree = int(degree)

    def __len__(self):
        return len(self.weights)


@lru_cache(maxsize=None)
def triangle_quadrature(degree):
    """Quadrature rule on the triangle exact for total degree <= `degree`.

    Built as a conical product of an m-point Gauss-Legendre rule and an
    m-point Gauss-Jacobi rule with weight (1 - x), m = (degree + 2) // 2.
    All weights are positive and any nonnegative degree is supported.
    Rules are cached; treat the returned arrays as read-only.
    """
    if degree < 0:
        raise ValueError(f"quadrature degree must be nonnegative, got {degree}")
    m = max(1, (degree + 2) // 2)
    xg, wg = leggauss(m)
    xi = (xg + 1.0) / 2.0
    wxi = wg / 2.0
    xj, wj = roots_jacobi(m, 1.0, 0.0)
    eta = (xj + 1.0) / 2.0
    weta = wj / 4.0
    x = np.outer(xi, 1.0 - eta).ravel()
    y = np.tile(eta, m)
    w = np.outer(wxi, weta).ravel()
    bary = np.column_stack([1.0 - x - y, x, y])
    rule = QuadratureRule(bary, 2.0 * w, degree)
    rule.points.setflags(write=False)
    rule.weights.setflags(write=False)
    return rule


@lru_cache(maxsize=None)
def edge_quadrature(degree):
    """Gauss-Legendre rule on [0, 1] exact for polynomial degree <= `degree`.

    Rules are cached; treat the returned arrays as read-only.
    """
    if degree < 0:
        raise ValueError(f"quadrature degree must be nonnegative, got {degree}")
    m = max(1, (degree + 2) // 2)
    x, w = leggauss(m)
    rule = QuadratureRule((x + 1.0) / 2.0, w / 2.0, degree)
    rule.points.setflags(write=False)
    rule.weights.setflags(write=False)
    return rule


def map_to_triangle(rule, vertices):
    """Physical points and weights of a barycentric rule on a triangle.

    Returns (points, weights) with points of shape (n, 2) and weights that
    include the triangle area, so sum(weights * f(points)) integrates f.
    """
    vertices = np.asarray(vertices, dtype=float)
    pts = rule.points @ vertices
    area = triangle_area(vertices)
    return pts, rule.weights * area


def map_to_edge(rule, p_lo, p_hi):
    """Physical points and arclength weights of an edge rule on a segment."""
    p_lo = np.asarray(p_lo, dtype=float)
    p_hi = np.asarray(p_hi, dtype=float)
    pts = p_lo[None, :] + rule.points[:, None] * (p_hi - p_lo)[None, :]
    return pts, rule.weights * float(np.hypot(*(p_hi - p_lo)))


def triangle_area(vertices):
    """Signed-positive area of a CCW triangle."""
    (x0, y0), (x1, y1), (x2, y2) = np.asarray(vertices, dtype=float)
    return 0.5 * abs((x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0))


class CellBasis:
    """L2-orthonormal polynomial basis of degree <= k on a physical triangle.

    Monomials in the centroid-centered, diameter-scaled coordinates are
    orthonormalized against the cell mass matrix by a Cholesky factorization,
    so the mass matrix of the resulting basis is the identity and its
    conditioning does not degrade under mesh refinement.
    """

    # orthonormalization factors are translation invariant; cache them so
    # structured meshes factorize once per cell congruence class
    _chol_cache = {}

    def __init__(self, vertices, k):
        self.vertices = np.asarray(vertices, dtype=float)
        self.k = int(k)
        self.exponents = monomial_exponents(self.k)
        self.dim = len(self.exponents)
        self.centroid = self.vertices.mean(axis=0)
        sides = self.vertices[[1, 2, 0]] - self.vertices
        self.diameter = float(np.linalg.norm(sides, axis=1).max())
        self.area = triangle_area(self.vertices)
        if self.area <= 0.0:
            raise ValueError("degenerate cell: nonpositive area")
        key = (self.k, np.round(self.vertices - self.vertices[0], 12).tobytes())
        inv_t = CellBasis._chol_cache.get(key)
        if inv_t is None:
            rule = triangle_quadrature(2 * self.k)
            pts, w = map_to_triangle(rule, self.vertices)
            raw = self._raw(pts)
            inv_t = np.eye(self.dim)
            # two orthonormalization passes keep the basis orthonormal to
            # machine precision even on badly shaped cells at high degree
            for _ in range(2):
                phi = raw @ inv_t
                mass = (phi * w[:, None]).T @ phi
                try:
                    chol = np.linalg.cholesky(mass)
                except np.linalg.LinAlgError as exc:
                    raise ValueError("singular local mass matrix (degenerate cell)") from exc
                inv_t = inv_t @ solve_triangular(chol, np.eye(self.dim), lower=True).T
            CellBasis._chol_cache[key] = inv_t
        self._inv_t = inv_t

    def _scaled(self, points):
        return (np.asarray(points, dtype=float) - self.centroid) / self.diameter

    def _raw(self, points):
        t = self._scaled(points)
        a = self.exponents[:, 0]
        b = self.exponents[:, 1]
        return t[:, 0:1] ** a * t[:, 1:2] ** b

    def _raw_grad(self, points):
        t = self._scaled(points)
        a = self.exponents[:, 0]
        b = self.exponents[:, 1]
        xa1 = np.where(a > 0, t[:, 0:1] ** np.maximum(a - 1, 0), 0.0)
        yb1 = np.where(b > 0, t[:, 1:2] ** np.maximum(b - 1, 0), 0.0)
        gx = a * xa1 * t[:, 1:2] ** b / self.diameter
        gy = t[:, 0:1] ** a * b * yb1 / self.diameter
        return gx, gy

    def eval(self, points):
        """Basis values at physical points, shape (n_points, dim)."""
        return self._raw(points) @ self._inv_t

    def grad(self, points):
        """Basis gradients at physical points, shape (n_points, dim, 2)."""
        gx, gy = self._raw_grad(points)
        return np.stack([gx @ self._inv_t, gy @ self._inv_t], axis=-1)


class EdgeBasis:
    """Orthonormal Legendre basis for P_k on the canonical edge parameter.

    Orthonormal with respect to dt on [0, 1]; the L2(e) mass matrix of the
    basis is therefore |e| times the identity.
    """

    def __init__(self, k):
        self.k = int(k)
        self.dim = self.k + 1
        self._coef = np.diag(np.sqrt(2.0 * np.arange(self.dim) + 1.0))

    def eval(self, t):
        """Basis values at parameters t in [0, 1], shape (n_points, k + 1)."""
        t = np.asarray(t, dtype=float)
        return legval(2.0 * t - 1.0, self._coef).T


class VectorBasis:
    """Vector polynomial basis for [P_{k-1}(T)]^2, built componentwise.

    The first `scalar.dim` members are (phi_j, 0), the rest (0, phi_j), with
    phi_j the orthonormal scalar basis of degree k - 1; the vector mass
    matrix is the identity.
    """

    def __init__(self, vertices, k):
        if k < 1:
            raise ValueError("vector basis requires k >= 1")
        self.scalar = CellBasis(vertices, k - 1)
        self.degree = k - 1
        self.dim = 2 * self.scalar.dim

    def eval(self, points):
        """Vector values at physical points, shape (n_points, dim, 2)."""
        phi = self.scalar.eval(points)
        n, m = phi.shape
        out = np.zeros((n, 2 * m, 2))
        out[:, :m, 0] = phi
        out[:, m:, 1] = phi
        return out

    def divergence(self, points):
        """Divergence of each vector member, shape (n_points, dim)."""
        g = self.scalar.grad(points)
        return np.concatenate([g[:, :, 0], g[:, :, 1]], axis=1)

    def normal_trace(self, points, normal):
        """w . n for each member at physical points, shape (n_points, dim)."""
        phi = self.scalar.eval(points)
        return np.concatenate([phi * normal[0], phi * normal[1]], axis=1)
