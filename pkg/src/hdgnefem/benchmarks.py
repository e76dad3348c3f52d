"""Benchmark problems: manufactured Stokes flow on a circle and a wavy channel."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import make_lsq_spline

from .errors import DataError, GeometryError
from .hdg import ProblemSpec
from .mesh import DIRICHLET, NEUMANN, TriMesh, nested_refine
from .nurbs import NurbsCurve, ParamInterval, circle


# -- manufactured solution -----------------------------------------------------------

def _quartic(t):
    """``t^2 (1 - t)^2`` and its first three derivatives."""
    return (t**2 * (1 - t) ** 2, 2 * t - 6 * t**2 + 4 * t**3,
            2 - 12 * t + 12 * t**2, -12 + 24 * t)


@dataclass(frozen=True)
class StokesExact:
    """Divergence-free field from the stream function ``X(x) Y(y)`` and ``p = x (1 - x)``.

    ``grad(x)[p, i, j] = d u_j / d x_i``; ``L = -grad u``.
    """

    viscosity: float = 1.0

    def velocity(self, x: np.ndarray) -> np.ndarray:
        X, dX, _, _ = _quartic(x[:, 0])
        Y, dY, _, _ = _quartic(x[:, 1])
        return np.column_stack([X * dY, -Y * dX])

    def pressure(self, x: np.ndarray) -> np.ndarray:
        return x[:, 0] * (1 - x[:, 0])

    def grad(self, x: np.ndarray) -> np.ndarray:
        X, dX, d2X, _ = _quartic(x[:, 0])
        Y, dY, d2Y, _ = _quartic(x[:, 1])
        g = np.empty((x.shape[0], 2, 2))
        g[:, 0, 0] = dX * dY
        g[:, 1, 0] = X * d2Y
        g[:, 0, 1] = -Y * d2X
        g[:, 1, 1] = -dY * dX
        return g

    def L(self, x: np.ndarray) -> np.ndarray:
        return -self.grad(x)

    def source(self, x: np.ndarray) -> np.ndarray:
        X, dX, d2X, d3X = _quartic(x[:, 0])
        Y, dY, d2Y, d3Y = _quartic(x[:, 1])
        lap1 = d2X * dY + X * d3Y
        lap2 = -(Y * d3X + d2Y * dX)
        nu = self.viscosity
        return np.column_stack([-nu * lap1 + (1 - 2 * x[:, 0]), -nu * lap2])

    def traction(self, x: np.ndarray, n: np.ndarray) -> np.ndarray:
        """Pseudo-traction ``n . (nu grad u) - p n``."""
        g = self.grad(x)
        return (self.viscosity * np.einsum("pi,pij->pj", n, g)
                - self.pressure(x)[:, None] * n)

    def strong_residual(self, x: np.ndarray, step: float = 1e-3) -> float:
        """Max of |div u| and |-nu lap u + grad p - s| at ``x``.

        Second derivatives come from a fourth-order central difference of
        the analytic gradient, so the check is independent of ``source``.
        """
        def d_dir(f, i):
            e = np.zeros(2)
            e[i] = step
            return (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * step)
        div = np.abs(np.einsum("pii->p", self.grad(x))).max()
        lap = sum(d_dir(lambda y: self.grad(y)[:, i, :], i) for i in range(2))
        gp = np.column_stack([d_dir(self.pressure, 0), d_dir(self.pressure, 1)])
        mom = np.abs(-self.viscosity * lap + gp - self.source(x)).max()
        return float(max(div, mom))


@dataclass
class Benchmark:
    """Geometry, mesh family, problem data and exact solution of a test case."""

    name: str
    curves: tuple
    coarse: TriMesh
    spec: ProblemSpec
    exact: StokesExact
    info: dict = field(default_factory=dict)

    def mesh(self, level: int = 0) -> TriMesh:
        m = self.coarse
        for _ in range(level):
            m = nested_refine(m)
        return m

    def meshes(self, levels: int) -> list[TriMesh]:
        out = [self.coarse]
        for _ in range(levels - 1):
            out.append(nested_refine(out[-1]))
        return out


def _verify(bench: Benchmark, samples: np.ndarray) -> Benchmark:
    res = bench.exact.strong_residual(samples)
    if res > 1e-10:
        raise DataError(f"{bench.name}: exact solution violates the strong form ({res:.3e})")
    bench.info["strong_residual"] = res
    return bench


def _spec(exact: StokesExact, pure_dirichlet: bool) -> ProblemSpec:
    return ProblemSpec(exact.viscosity, exact.source, exact.velocity,
                       exact.traction, pure_dirichlet)


# -- circle ---------------------------------------------------------------------------

def circle_mesh(center=(0.5, 0.5), radius: float = 0.5, inner: float = 0.44) -> TriMesh:
    """16-element mesh of a disc: four central triangles and three per quadrant.

    ``inner`` is the radius fraction of the inner ring of vertices.
    """
    c = np.asarray(center, dtype=float)
    curve = circle(c, radius)
    lam = np.arange(8) / 8.0
    ring = np.array([c + inner * radius * np.array([np.cos(a), np.sin(a)])
                     for a in np.arange(4) * np.pi / 2])
    bnd = np.asarray(curve(lam))
    verts = np.vstack([c, ring, bnd])
    C, I, B = 0, lambda q: 1 + q % 4, lambda j: 5 + j % 8
    elems = [(C, I(q), I(q + 1)) for q in range(4)]
    for q in range(4):
        elems += [(I(q), B(2 * q), B(2 * q + 1)),
                  (I(q), B(2 * q + 1), I(q + 1)),
                  (I(q + 1), B(2 * q + 1), B(2 * q + 2))]
    bl = list(lam) + [1.0]
    boundary = [(B(j), B(j + 1), DIRICHLET, ParamInterval(0, bl[j], bl[j + 1]))
                for j in range(8)]
    return TriMesh(verts, elems, boundary, [curve])


def benchmark_circle() -> Benchmark:
    """Disc of radius 0.5 centred at (0.5, 0.5) with Dirichlet data everywhere."""
    exact = StokesExact(1.0)
    mesh = circle_mesh()
    rng = np.random.default_rng(0)
    r = 0.5 * np.sqrt(rng.random(100))
    a = 2 * np.pi * rng.random(100)
    samples = 0.5 + np.column_stack([r * np.cos(a), r * np.sin(a)])
    return _verify(Benchmark("circle", mesh.curves, mesh, _spec(exact, True), exact), samples)


# -- wavy channel ---------------------------------------------------------------------

def wavy_profile(x):
    return (1.0 + np.cos(5.0 * np.pi * np.asarray(x, dtype=float))) / 10.0


def fit_wavy_curve(x0: float, x1: float, degree: int = 9, spans: int | None = None,
                   tol: float = 1e-10, samples: int = 1000) -> tuple[NurbsCurve, float]:
    """Polynomial B-spline ``C(lam) = (lam, y(lam))`` fitted to the wavy profile.

    Control abscissae are the Greville points, so ``x(lam) = lam`` exactly and
    the fit error is purely vertical.  Returns the curve and the maximum
    deviation over ``samples`` points.
    """
    if spans is None:
        spans = int(np.ceil(40 * (x1 - x0)))
    inner = np.linspace(x0, x1, spans + 1)
    knots = np.concatenate([[x0] * degree, inner, [x1] * degree])
    ncp = knots.size - degree - 1
    greville = np.array([knots[i + 1:i + degree + 1].mean() for i in range(ncp)])
    xs = np.linspace(x0, x1, 40 * spans + 1)
    spl = make_lsq_spline(xs, wavy_profile(xs), knots, k=degree)
    cps = np.column_stack([greville, spl.c])
    curve = NurbsCurve(degree, knots, cps, np.ones(ncp))
    check = np.linspace(x0, x1, samples)
    pts = curve(check)
    dev = float(max(np.abs(pts[:, 0] - check).max(),
                    np.abs(pts[:, 1] - wavy_profile(check)).max()))
    if dev > tol:
        raise GeometryError(f"wavy boundary fit deviation {dev:.3e} exceeds {tol:.1e}")
    return curve, dev


def wavy_mesh(curve: NurbsCurve, nx: int, ny: int, top: float) -> TriMesh:
    """Structured mesh above the curve ``y = f(x)`` up to ``y = top``.

    Bottom faces are curved and Neumann; the other sides are Dirichlet.
    """
    x0, x1 = curve.lambda_min, curve.lambda_max
    lam = np.linspace(x0, x1, nx + 1)
    base = np.asarray(curve(lam))
    verts = []
    for j in range(ny + 1):
        s = j / ny
        verts += [(b[0], (1 - s) * b[1] + s * top) for b in base]
    vid = lambda i, j: j * (nx + 1) + i
    elems = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            elems += [(a, b, c), (a, c, d)]
    boundary = [(vid(i, 0), vid(i + 1, 0), NEUMANN, ParamInterval(0, lam[i], lam[i + 1]))
                for i in range(nx)]
    boundary += [(vid(nx, j), vid(nx, j + 1), DIRICHLET) for j in range(ny)]
    boundary += [(vid(i + 1, ny), vid(i, ny), DIRICHLET) for i in range(nx)]
    boundary += [(vid(0, j + 1), vid(0, j), DIRICHLET) for j in range(ny)]
    return TriMesh(verts, elems, boundary, [curve])


WAVY_DEFAULTS = dict(x0=0.0, x1=3.0, top=1.0, nx=24, ny=4)


def benchmark_wavy_channel(x0: float = WAVY_DEFAULTS["x0"], x1: float = WAVY_DEFAULTS["x1"],
                           top: float = WAVY_DEFAULTS["top"], nx: int = WAVY_DEFAULTS["nx"],
                           ny: int = WAVY_DEFAULTS["ny"]) -> Benchmark:
    """Channel over the wavy wall ``f(x) = (1 + cos(5 pi x)) / 10``.

    Traction from the exact fields on the wall, exact velocity elsewhere.
    """
    exact = StokesExact(1.0)
    curve, dev = fit_wavy_curve(x0, x1)
    mesh = wavy_mesh(curve, nx, ny, top)
    rng = np.random.default_rng(1)
    xs = x0 + (x1 - x0) * rng.random(100)
    ys = wavy_profile(xs) + (top - wavy_profile(xs)) * rng.random(100)
    bench = Benchmark("wavy", mesh.curves, mesh, _spec(exact, False), exact,
                      {"fit_deviation": dev})
    return _verify(bench, np.column_stack([xs, ys]))


BENCHMARKS: dict[str, Callable[[], Benchmark]] = {
    "circle": benchmark_circle,
    "wavy": benchmark_wavy_channel,
}


def get_benchmark(name: str) -> Benchmark:
    try:
        return BENCHMARKS[name]()
    except KeyError:
        raise ValueError(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}") from None
