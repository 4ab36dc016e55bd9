"""Quadrature rules on the reference triangle.

Rules are stored in barycentric coordinates with weights normalized to sum
to one, so that an integral over a physical triangle T is approximated by

    int_T g ~= |T| * sum_k w_k g(x_k),    x_k = sum_i lambda_ki z_i.

Low orders use the classic centroid / edge-midpoint rules; higher orders are
conical-product rules (Gauss-Jacobi in the collapsed direction times
Gauss-Legendre), which are exact for any requested polynomial degree.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@dataclass(frozen=True)
class QuadratureRule:
    """Positive quadrature rule on the reference triangle.

    Attributes
    ----------
    order : int
        Total polynomial degree integrated exactly.
    points : ndarray, shape (nq, 3)
        Barycentric coordinates of the nodes.
    weights : ndarray, shape (nq,)
        Weights, summing to 1 (reference measure normalized).
    """

    order: int
    points: np.ndarray
    weights: np.ndarray

    def physical_points(self, vertices):
        """Map the rule onto triangles given by ``vertices`` (..., 3, 2)."""
        verts = np.asarray(vertices, dtype=float)
        return np.einsum("qi,...id->...qd", self.points, verts)

    def integrate(self, values, areas):
        """Combine point values (..., nq) with element areas (...) -> (...)."""
        return np.asarray(areas) * (np.asarray(values) @ self.weights)


def _conical_rule(order):
    # Collapsed tensor rule: x = xi, y = eta*(1-xi) with Jacobian (1-xi).
    # Gauss-Jacobi (alpha=1) absorbs the Jacobian, Gauss-Legendre handles eta;
    # n points per direction integrate total degree 2n-1 exactly.
    n = (order + 2) // 2
    xj, wj = roots_jacobi(n, 1.0, 0.0)
    xi = 0.5 * (xj + 1.0)
    wi = 0.25 * wj
    yl, wl = np.polynomial.legendre.leggauss(n)
    eta = 0.5 * (yl + 1.0)
    we = 0.5 * wl

    lam2 = np.repeat(xi, n)
    lam3 = np.tile(eta, n) * (1.0 - lam2)
    lam1 = 1.0 - lam2 - lam3
    pts = np.column_stack([lam1, lam2, lam3])
    w = np.repeat(wi, n) * np.tile(we, n)
    # normalize so that weights sum to one (they sum to the reference area 1/2)
    w = w / w.sum()
    return pts, w


@lru_cache(maxsize=None)
def quadrature(order):
    """Return a :class:`QuadratureRule` exact for polynomials of ``order``."""
    if order < 0:
        raise ValueError(f"quadrature order must be non-negative, got {order}")
    if order <= 1:
        pts = np.array([[1.0, 1.0, 1.0]]) / 3.0
        w = np.array([1.0])
    elif order == 2:
        pts = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
        w = np.full(3, 1.0 / 3.0)
    else:
        pts, w = _conical_rule(order)
    pts = np.ascontiguousarray(pts)
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(order=order, points=pts, weights=w)


def edge_rule(npoints):
    """Gauss-Legendre rule on [0, 1] with weights summing to 1."""
    x, w = np.polynomial.legendre.leggauss(npoints)
    return 0.5 * (x + 1.0), 0.5 * w
