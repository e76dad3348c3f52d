"""Quadrature rules: Gauss segments, collapsed triangle rules, NEFEM rules.

Reference segment is [0, 1]; reference triangle has vertices (0, 0), (1, 0),
(0, 1).  NEFEM rules live on the rectangle ``[lambda_a, lambda_b] x [0, 1]``
and are returned directly as physical points with physical weights.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .errors import GeometryError
from .nurbs import NurbsCurve, ParamInterval, interior_breakpoints


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


@lru_cache(maxsize=None)
def gauss_segment(n: int) -> QuadratureRule:
    """``n``-point Gauss-Legendre rule on [0, 1], exact to degree ``2n - 1``."""
    if not 1 <= n <= 64:
        raise ValueError(f"number of Gauss points must be in [1, 64], got {n}")
    x, w = np.polynomial.legendre.leggauss(n)
    pts, wts = 0.5 * (x + 1.0), 0.5 * w
    _freeze(pts, wts)
    return QuadratureRule(pts, wts, 2 * n - 1)


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadratureRule:
    """Collapsed (Duffy) Gauss-Jacobi rule exact for total degree ``degree``."""
    d = max(int(degree), 0)
    n = max(1, math.ceil((d + 1) / 2))
    gu = gauss_segment(n)
    xv, wv = roots_jacobi(n, 1.0, 0.0)
    v = 0.5 * (xv + 1.0)
    wv = wv / 4.0
    uu, vv = np.meshgrid(gu.points, v, indexing="ij")
    pts = np.column_stack([(uu * (1.0 - vv)).ravel(), vv.ravel()])
    wts = np.outer(gu.weights, wv).ravel()
    if np.any(wts <= 0):
        raise AssertionError("generated triangle rule has non-positive weights")
    _freeze(pts, wts)
    return QuadratureRule(pts, wts, d)


def monomial_integral(a: int, b: int) -> float:
    """Exact integral of ``x**a * y**b`` over the reference triangle."""
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


def split_interval(curve: NurbsCurve, interval: ParamInterval) -> np.ndarray:
    """Sub-span end points of ``interval`` separated at interior knots."""
    return np.array([interval.lambda_a, *interior_breakpoints(curve, interval),
                     interval.lambda_b])


def composite_gauss(edges: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss points and weights of ``n`` points on each span of ``edges``."""
    g = gauss_segment(n)
    a, b = edges[:-1], edges[1:]
    pts = (a[:, None] + np.outer(b - a, g.points)).ravel()
    wts = np.outer(b - a, g.weights).ravel()
    return pts, wts


def nefem_point_counts(k: int, q_curve: int) -> tuple[int, int]:
    """Default (n1, n2): curve-direction points per knot span, collapse-direction points."""
    return math.ceil((2 * k + q_curve + 2) / 2), k + 2


def is_rational(curve: NurbsCurve) -> bool:
    w = curve.weights
    return bool(np.ptp(w) > 1e-14 * w.max())


@dataclass(frozen=True, eq=False)
class PhysicalRule:
    """Quadrature over a physical region: points, weights (incl. Jacobians)."""

    points: np.ndarray
    weights: np.ndarray
    params: np.ndarray | None = None
    tangents: np.ndarray | None = None

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    @property
    def measure(self) -> float:
        return float(self.weights.sum())


def nefem_element_rule(chart, k: int, q_curve: int | None = None,
                       n1: int | None = None, n2: int | None = None) -> PhysicalRule:
    """Tensor rule on the chart rectangle, split at interior knots.

    Rational curves get ``3 q`` extra points per span along the curve, where
    the integrand is not polynomial.  ``params`` holds the (lambda1, lambda2)
    coordinates of each point.
    """
    curve = chart.curve
    q = curve.degree if q_curve is None else q_curve
    d1, d2 = nefem_point_counts(k, q)
    if n1 is None:
        n1 = d1 + (3 * q if is_rational(curve) else 0)
    n2 = d2 if n2 is None else n2
    l1, w1 = composite_gauss(split_interval(curve, chart.interval), n1)
    g2 = gauss_segment(n2)
    L1, L2 = np.meshgrid(l1, g2.points, indexing="ij")
    x, jac = chart.map(L1.ravel(), L2.ravel())
    det = np.linalg.det(jac) * chart.orientation
    if np.any(det <= 0):
        raise GeometryError(
            f"NEFEM chart of element {chart.element} has non-positive Jacobian")
    wts = np.outer(w1, g2.weights).ravel() * det
    return PhysicalRule(x, wts, np.column_stack([L1.ravel(), L2.ravel()]))


def nefem_face_rule(curve: NurbsCurve, interval: ParamInterval, k_hat: int,
                    q_curve: int | None = None, n: int | None = None) -> PhysicalRule:
    """Composite Gauss rule along a curved face; weights include ``|C'(lambda)|``."""
    q = curve.degree if q_curve is None else q_curve
    if n is None:
        n = nefem_point_counts(k_hat, q)[0]
        if is_rational(curve):
            n += 3 * q
    lam, w = composite_gauss(split_interval(curve, interval), n)
    x, dx = curve.point_and_tangent(lam)
    speed = np.linalg.norm(dx, axis=1)
    return PhysicalRule(x, w * speed, lam, dx)
