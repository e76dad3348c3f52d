"""Shared helpers for the test suite: polynomial Stokes fields and small meshes."""
from __future__ import annotations

import numpy as np
from numpy.polynomial import polynomial as P

from hdgnefem.hdg import ProblemSpec
from hdgnefem.mesh import DIRICHLET, NEUMANN, TriMesh, nested_refine, rectangle_mesh
from hdgnefem.nurbs import ParamInterval, line, quarter_circle


class PolyStokes:
    """Stokes fields from a polynomial stream function of degree ``k + 1``.

    ``u = (d psi/dy, -d psi/dx)`` has degree ``k``; ``p`` has degree ``k``.
    All derivatives are taken on coefficient arrays, independently of the
    solver.
    """

    def __init__(self, k: int, nu: float = 1.0, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.k, self.nu = k, nu
        psi = rng.standard_normal((k + 2, k + 2))
        pr = rng.standard_normal((k + 1, k + 1))
        for a in range(k + 2):
            for b in range(k + 2):
                if a + b > k + 1:
                    psi[a, b] = 0.0
                if a + b > k and a <= k and b <= k:
                    pr[a, b] = 0.0
        self.u1 = P.polyder(psi, axis=1)
        self.u2 = -P.polyder(psi, axis=0)
        self.pc = pr

    @staticmethod
    def _ev(c, x):
        return P.polyval2d(x[:, 0], x[:, 1], c)

    def velocity(self, x):
        return np.column_stack([self._ev(self.u1, x), self._ev(self.u2, x)])

    def pressure(self, x):
        return self._ev(self.pc, x)

    def grad(self, x):
        """``g[p, i, j] = d u_j / d x_i``."""
        g = np.empty((x.shape[0], 2, 2))
        for j, c in enumerate((self.u1, self.u2)):
            g[:, 0, j] = self._ev(P.polyder(c, axis=0), x)
            g[:, 1, j] = self._ev(P.polyder(c, axis=1), x)
        return g

    def L(self, x):
        return -self.grad(x)

    def source(self, x):
        out = np.empty((x.shape[0], 2))
        for j, c in enumerate((self.u1, self.u2)):
            lap = (self._ev(P.polyder(c, 2, axis=0), x)
                   + self._ev(P.polyder(c, 2, axis=1), x))
            dp = self._ev(P.polyder(self.pc, axis=j), x)
            out[:, j] = -self.nu * lap + dp
        return out

    def traction(self, x, n):
        return (self.nu * np.einsum("pi,pij->pj", n, self.grad(x))
                - self.pressure(x)[:, None] * n)

    def spec(self, pure_dirichlet: bool) -> ProblemSpec:
        return ProblemSpec(self.nu, self.source, self.velocity, self.traction, pure_dirichlet)


def zero_spec(pure_dirichlet: bool = True) -> ProblemSpec:
    z = lambda x: np.zeros((x.shape[0], 2))
    return ProblemSpec(1.0, z, z, lambda x, n: np.zeros((x.shape[0], 2)), pure_dirichlet)


def single_triangle() -> TriMesh:
    verts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    return TriMesh(verts, [(0, 1, 2)], [(0, 1, DIRICHLET), (1, 2, DIRICHLET),
                                        (2, 0, DIRICHLET)])


def two_triangles(tags=(DIRICHLET,) * 4) -> TriMesh:
    return rectangle_mesh(1, 1, tags=tags)


def quarter_disc(refine: int = 0, tag: int = DIRICHLET) -> TriMesh:
    """Quarter disc of radius 1 at the origin; arc is curve 0."""
    arc = quarter_circle((0.0, 0.0), 1.0)
    verts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    mesh = TriMesh(verts, [(0, 1, 2)],
                   [(0, 1, DIRICHLET), (1, 2, tag, ParamInterval(0, 0.0, 1.0)),
                    (2, 0, DIRICHLET)], [arc])
    for _ in range(refine):
        mesh = nested_refine(mesh)
    return mesh


def straight_curve_mesh() -> TriMesh:
    """Unit right triangle whose hypotenuse is a degree-1 NURBS line."""
    ln = line((1.0, 0.0), (0.0, 1.0))
    verts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    return TriMesh(verts, [(0, 1, 2)],
                   [(0, 1, DIRICHLET), (1, 2, DIRICHLET, ParamInterval(0, 0.0, 1.0)),
                    (2, 0, DIRICHLET)], [ln])


def small_meshes():
    """Meshes with at most 8 elements, straight and curved, with and without Neumann."""
    mixed = (NEUMANN, DIRICHLET, DIRICHLET, DIRICHLET)
    return {
        "triangle": single_triangle(),
        "square": two_triangles(),
        "square-neumann": two_triangles(mixed),
        "grid-2x2": rectangle_mesh(2, 2, diagonal="alternate"),
        "grid-2x2-neumann": rectangle_mesh(2, 2, tags=mixed),
        "quarter-disc": quarter_disc(1),
        "quarter-disc-neumann": quarter_disc(1, NEUMANN),
    }


def winding_number(point, polygon: np.ndarray) -> float:
    d = polygon - point
    ang = np.arctan2(d[:, 1], d[:, 0])
    diff = np.diff(np.concatenate([ang, ang[:1]]))
    diff = (diff + np.pi) % (2 * np.pi) - np.pi
    return float(diff.sum() / (2 * np.pi))
