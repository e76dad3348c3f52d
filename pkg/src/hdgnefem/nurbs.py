"""Rational B-spline boundary curves.

Curves are stored with an open (clamped) knot vector.  Points are evaluated
with the rational de Boor recursion in homogeneous coordinates; derivatives
use the B-spline basis derivatives of the weighted curve and the quotient
rule.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import GeometryError

#: parameters this close to either end of the knot range are clamped inward
CLAMP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class NurbsCurve:
    """Planar NURBS curve of degree ``degree`` with an open knot vector."""

    degree: int
    knots: np.ndarray
    control_points: np.ndarray
    weights: np.ndarray
    _homogeneous: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        cps = np.asarray(self.control_points, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        q = int(self.degree)
        if q < 1:
            raise GeometryError(f"curve degree must be >= 1, got {q}")
        if cps.ndim != 2 or cps.shape[1] != 2:
            raise GeometryError("control points must be an (n, 2) array")
        if weights.shape != (cps.shape[0],):
            raise GeometryError("one weight per control point is required")
        if knots.size != cps.shape[0] + q + 1:
            raise GeometryError(
                f"expected {cps.shape[0] + q + 1} knots, got {knots.size}")
        if np.any(np.diff(knots) < 0):
            raise GeometryError("knot vector must be non-decreasing")
        if np.any(knots[: q + 1] != knots[0]) or np.any(knots[-q - 1:] != knots[-1]):
            raise GeometryError("knot vector must be open (end knots repeated degree+1 times)")
        if knots[-1] <= knots[0]:
            raise GeometryError("knot range is empty")
        if np.any(weights <= 0):
            raise GeometryError("weights must be strictly positive")
        for name, value in (("degree", q), ("knots", knots),
                            ("control_points", cps), ("weights", weights)):
            object.__setattr__(self, name, value)
        for arr in (knots, cps, weights):
            arr.setflags(write=False)
        hom = np.column_stack([cps * weights[:, None], weights])
        hom.setflags(write=False)
        object.__setattr__(self, "_homogeneous", hom)

    @property
    def n_control(self) -> int:
        return self.control_points.shape[0]

    @property
    def lambda_min(self) -> float:
        return float(self.knots[0])

    @property
    def lambda_max(self) -> float:
        return float(self.knots[-1])

    # -- parameter handling -------------------------------------------------
    def _check(self, lam: float) -> float:
        lo, hi = self.lambda_min, self.lambda_max
        if lam < lo:
            if lo - lam <= CLAMP_TOL:
                return lo
            raise GeometryError(f"parameter {lam!r} below knot range [{lo}, {hi}]")
        if lam > hi:
            if lam - hi <= CLAMP_TOL:
                return hi
            raise GeometryError(f"parameter {lam!r} above knot range [{lo}, {hi}]")
        return float(lam)

    def find_span(self, lam: float) -> int:
        """Index ``i`` with ``knots[i] <= lam < knots[i+1]`` (last span at the end)."""
        n = self.n_control - 1
        if lam >= self.knots[n + 1]:
            return n
        return int(np.searchsorted(self.knots, lam, side="right") - 1)

    # -- evaluation ---------------------------------------------------------
    def _point(self, lam: float) -> np.ndarray:
        lam = self._check(lam)
        q = self.degree
        span = self.find_span(lam)
        t = self.knots
        d = self._homogeneous[span - q: span + 1].copy()
        for r in range(1, q + 1):
            for j in range(q, r - 1, -1):
                i = span - q + j
                denom = t[i + q - r + 1] - t[i]
                alpha = 0.0 if denom == 0 else (lam - t[i]) / denom
                d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j]
        return d[q, :2] / d[q, 2]

    def evaluate(self, lam):
        """Point(s) on the curve; scalar input gives shape (2,), arrays (..., 2)."""
        arr = np.asarray(lam, dtype=float)
        if arr.ndim == 0:
            return self._point(float(arr))
        out = np.array([self._point(float(v)) for v in arr.ravel()])
        return out.reshape(arr.shape + (2,))

    __call__ = evaluate

    def _basis_derivs(self, span: int, lam: float, nder: int) -> np.ndarray:
        """Nonzero basis functions and derivatives up to ``nder`` at ``lam``."""
        q, t = self.degree, self.knots
        ndu = np.zeros((q + 1, q + 1))
        left = np.zeros(q + 1)
        right = np.zeros(q + 1)
        ndu[0, 0] = 1.0
        for j in range(1, q + 1):
            left[j] = lam - t[span + 1 - j]
            right[j] = t[span + j] - lam
            saved = 0.0
            for r in range(j):
                ndu[j, r] = right[r + 1] + left[j - r]
                temp = ndu[r, j - 1] / ndu[j, r]
                ndu[r, j] = saved + right[r + 1] * temp
                saved = left[j - r] * temp
            ndu[j, j] = saved
        ders = np.zeros((nder + 1, q + 1))
        ders[0] = ndu[:, q]
        a = np.zeros((2, q + 1))
        for r in range(q + 1):
            s1, s2 = 0, 1
            a[0, 0] = 1.0
            for k in range(1, nder + 1):
                d = 0.0
                rk, pk = r - k, q - k
                if r >= k:
                    a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                    d = a[s2, 0] * ndu[rk, pk]
                j1 = 1 if rk >= -1 else -rk
                j2 = k - 1 if r - 1 <= pk else q - r
                for j in range(j1, j2 + 1):
                    a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                    d += a[s2, j] * ndu[rk + j, pk]
                if r <= pk:
                    a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                    d += a[s2, k] * ndu[r, pk]
                ders[k, r] = d
                s1, s2 = s2, s1
        fac = q
        for k in range(1, nder + 1):
            ders[k] *= fac
            fac *= q - k
        return ders

    def _derivatives(self, lam: float, order: int) -> np.ndarray:
        """Rows: C, C', ..., C^(order) at ``lam``."""
        lam = self._check(lam)
        q = self.degree
        span = self.find_span(lam)
        ders = self._basis_derivs(span, lam, min(order, q))
        hom = self._homogeneous[span - q: span + 1]
        aw = np.zeros((order + 1, 3))
        aw[: ders.shape[0]] = ders @ hom
        a, w = aw[:, :2], aw[:, 2]
        c = np.zeros((order + 1, 2))
        # points come from de Boor so every code path returns bitwise-identical C(lam)
        c[0] = self._point(lam)
        if order >= 1:
            c[1] = (a[1] - w[1] * c[0]) / w[0]
        if order >= 2:
            c[2] = (a[2] - 2.0 * w[1] * c[1] - w[2] * c[0]) / w[0]
        return c

    def derivative(self, lam, order: int = 1):
        """``order``-th parametric derivative (1 or 2)."""
        if order not in (1, 2):
            raise ValueError(f"derivative order must be 1 or 2, got {order}")
        arr = np.asarray(lam, dtype=float)
        if arr.ndim == 0:
            return self._derivatives(float(arr), order)[order]
        out = np.array([self._derivatives(float(v), order)[order] for v in arr.ravel()])
        return out.reshape(arr.shape + (2,))

    def point_and_tangent(self, lam) -> tuple[np.ndarray, np.ndarray]:
        """``C(lam)`` and ``C'(lam)`` for an array of parameters."""
        arr = np.atleast_1d(np.asarray(lam, dtype=float))
        rows = np.array([self._derivatives(float(v), 1) for v in arr.ravel()])
        return rows[:, 0].reshape(arr.shape + (2,)), rows[:, 1].reshape(arr.shape + (2,))

    def breakpoints(self) -> np.ndarray:
        """Distinct knot values, including both ends."""
        return np.unique(self.knots)


@dataclass(frozen=True)
class ParamInterval:
    """Parametric sub-interval ``[lambda_a, lambda_b]`` of a boundary curve."""

    curve_id: int
    lambda_a: float
    lambda_b: float

    def __post_init__(self):
        if not self.lambda_a < self.lambda_b:
            raise GeometryError(
                f"empty parametric interval [{self.lambda_a}, {self.lambda_b}]")

    @property
    def length(self) -> float:
        return self.lambda_b - self.lambda_a

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lambda_a + self.lambda_b)

    def at(self, t):
        """Map face coordinate ``t`` in [0, 1] to the curve parameter."""
        return self.lambda_a + np.asarray(t, dtype=float) * (self.lambda_b - self.lambda_a)

    def split(self) -> tuple["ParamInterval", "ParamInterval"]:
        m = self.midpoint
        return (ParamInterval(self.curve_id, self.lambda_a, m),
                ParamInterval(self.curve_id, m, self.lambda_b))


def check_interval(curve: NurbsCurve, interval: ParamInterval) -> None:
    lo, hi = curve.lambda_min - CLAMP_TOL, curve.lambda_max + CLAMP_TOL
    if interval.lambda_a < lo or interval.lambda_b > hi:
        raise GeometryError(
            f"interval [{interval.lambda_a}, {interval.lambda_b}] outside "
            f"knot range [{curve.lambda_min}, {curve.lambda_max}]")


def interior_breakpoints(curve: NurbsCurve, interval: ParamInterval) -> list[float]:
    """Distinct knots strictly inside the interval, sorted."""
    bps = curve.breakpoints()
    inside = bps[(bps > interval.lambda_a) & (bps < interval.lambda_b)]
    return [float(v) for v in inside]


def evaluate(curve: NurbsCurve, lam):
    return curve.evaluate(lam)


def derivative(curve: NurbsCurve, lam, order: int = 1):
    return curve.derivative(lam, order)


# -- standard shapes ---------------------------------------------------------

def line(p0: Sequence[float], p1: Sequence[float], lam_range=(0.0, 1.0)) -> NurbsCurve:
    """Degree-1 straight segment from ``p0`` to ``p1``."""
    a, b = lam_range
    return NurbsCurve(1, [a, a, b, b], [p0, p1], [1.0, 1.0])


def circle(center: Sequence[float], radius: float) -> NurbsCurve:
    """Closed quadratic rational circle, counter-clockwise, parameter in [0, 1].

    Built from four quarter arcs; ``C(0) = C(1) = center + (radius, 0)``.
    """
    cx, cy = center
    r = radius
    pts = [(cx + r, cy), (cx + r, cy + r), (cx, cy + r), (cx - r, cy + r),
           (cx - r, cy), (cx - r, cy - r), (cx, cy - r), (cx + r, cy - r), (cx + r, cy)]
    s = np.sqrt(0.5)
    weights = [1.0, s, 1.0, s, 1.0, s, 1.0, s, 1.0]
    knots = [0, 0, 0, 0.25, 0.25, 0.5, 0.5, 0.75, 0.75, 1, 1, 1]
    return NurbsCurve(2, knots, pts, weights)


def quarter_circle(center: Sequence[float], radius: float) -> NurbsCurve:
    """Rational quadratic arc from angle 0 to pi/2 on [0, 1]."""
    cx, cy = center
    s = np.sqrt(0.5)
    return NurbsCurve(2, [0, 0, 0, 1, 1, 1],
                      [(cx + radius, cy), (cx + radius, cy + radius), (cx, cy + radius)],
                      [1.0, s, 1.0])


# -- text geometry files -----------------------------------------------------

def format_curves(curves: Iterable[NurbsCurve]) -> str:
    """Serialise curves; ``repr`` of floats guarantees exact round-trip."""
    lines = []
    for c in curves:
        lines.append("CURVE")
        lines.append(str(c.degree))
        lines.append(str(c.knots.size))
        lines.append(" ".join(repr(float(v)) for v in c.knots))
        lines.append(str(c.n_control))
        for (x, y), w in zip(c.control_points, c.weights):
            lines.append(f"{float(x)!r} {float(y)!r} {float(w)!r}")
    return "\n".join(lines) + "\n"


def parse_curves(text: str) -> list[NurbsCurve]:
    tokens = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    tokens = [t for t in tokens if t]
    curves = []
    pos = 0
    while pos < len(tokens):
        if tokens[pos] != "CURVE":
            raise GeometryError(f"expected 'CURVE' block header, got {tokens[pos]!r}")
        degree = int(tokens[pos + 1])
        nk = int(tokens[pos + 2])
        knots = [float(v) for v in tokens[pos + 3].split()]
        if len(knots) != nk:
            raise GeometryError(f"knot count {nk} does not match {len(knots)} values")
        ncp = int(tokens[pos + 4])
        rows = [[float(v) for v in tokens[pos + 5 + i].split()] for i in range(ncp)]
        arr = np.array(rows)
        curves.append(NurbsCurve(degree, knots, arr[:, :2], arr[:, 2]))
        pos += 5 + ncp
    return curves


def write_curves(path, curves: Iterable[NurbsCurve]) -> None:
    Path(path).write_text(format_curves(curves))


def read_curves(path) -> list[NurbsCurve]:
    return parse_curves(Path(path).read_text())
