"""Shared test utilities: random geometry and polynomial oracles."""

import numpy as np

from wgsteklov.polyquad import monomial_exponents
from wgsteklov.wgcore import project_cell, project_edge


def random_triangle(rng, min_area=0.05, scale=1.0):
    """A non-degenerate CCW triangle with vertices in [-scale, scale]^2."""
    while True:
        v = rng.uniform(-scale, scale, (3, 2))
        area = 0.5 * (
            (v[1, 0] - v[0, 0]) * (v[2, 1] - v[0, 1])
            - (v[1, 1] - v[0, 1]) * (v[2, 0] - v[0, 0])
        )
        if area < 0:
            v = v[[0, 2, 1]]
            area = -area
        if area > min_area * scale**2:
            return v


class Poly2:
    """Bivariate polynomial with explicit coefficients and exact gradient."""

    def __init__(self, exponents, coefficients):
        self.exponents = np.asarray(exponents)
        self.coefficients = np.asarray(coefficients, dtype=float)

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        a, b = self.exponents[:, 0], self.exponents[:, 1]
        return (pts[:, 0:1] ** a * pts[:, 1:2] ** b) @ self.coefficients

    def grad(self, pts):
        pts = np.asarray(pts, dtype=float)
        a, b = self.exponents[:, 0], self.exponents[:, 1]
        xa1 = np.where(a > 0, pts[:, 0:1] ** np.maximum(a - 1, 0), 0.0)
        yb1 = np.where(b > 0, pts[:, 1:2] ** np.maximum(b - 1, 0), 0.0)
        gx = (a * xa1 * pts[:, 1:2] ** b) @ self.coefficients
        gy = (pts[:, 0:1] ** a * b * yb1) @ self.coefficients
        return np.stack([gx, gy], axis=1)


def random_poly(rng, degree):
    exps = monomial_exponents(degree)
    return Poly2(exps, rng.uniform(-1.0, 1.0, len(exps)))


def local_interpolant(cell, f, quad_degree=None):
    """Local DOF vector of the interpolant (Q0 f, Qb f per edge) on one cell."""
    dofs = np.zeros(cell.n_loc)
    dofs[: cell.n_interior] = project_cell(cell, f, quad_degree=quad_degree)
    for l in range(3):
        lo, hi = cell.edge_canonical(l)
        dofs[cell.edge_slice(l)] = project_edge(cell.k, lo, hi, f, quad_degree=quad_degree)
    return dofs
