"""Postprocessing, error estimation and the degree-adaptive loop."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import approximation as ap
from .geometry import GeometryBackend
from .hdg import HdgSolution, ProblemSpec, SolverConfig, solve
from .mesh import TriMesh

log = logging.getLogger(__name__)


@dataclass(eq=False)
class PostProcessed:
    """Elemental field ``u*`` in Cartesian modes of degree ``k + 1``."""

    element: int
    k: int
    modes: ap.ScaledLegendre
    coeffs: np.ndarray  # (n_modes, 2)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.modes(x)[0] @ self.coeffs

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """``G[p, i, j] = d u*_j / d x_i``."""
        return np.einsum("pmi,mj->pij", self.modes(x)[1], self.coeffs)


def _level(k: int) -> int:
    return k + 1


def postprocess(solution: HdgSolution, e: int) -> PostProcessed:
    """Solve ``(grad u*, grad v) = -(L, grad v)`` with ``(u*, 1) = (u, 1)``."""
    k = int(solution.degrees[e])
    rule, L, u, _, _ = solution.fields_at(e, _level(k))
    modes = ap.ScaledLegendre.for_points(k + 1, rule.x)
    V, G = modes(rule.x)
    w = rule.w
    m = V.shape[1]
    S = np.einsum("pai,pbi,p->ab", G, G, w)
    c = V.T @ w
    A = np.zeros((m + 1, m + 1))
    A[:m, :m] = S
    A[:m, m] = c
    A[m, :m] = c
    rhs = np.zeros((m + 1, 2))
    # L[p, i, j] approximates -d u_j / d x_i
    rhs[:m] = -np.einsum("pai,pij,p->aj", G, L, w)
    rhs[m] = w @ u
    sol = np.linalg.solve(A, rhs)
    return PostProcessed(e, k, modes, sol[:m])


def normalized_l2(diff: np.ndarray, w: np.ndarray) -> float:
    """``sqrt(int |d|^2 / |Omega_e|)`` from quadrature values."""
    return math.sqrt(max(float(w @ np.sum(diff * diff, axis=1)), 0.0) / float(w.sum()))


def estimate_error(solution: HdgSolution, e: int,
                   ustar: PostProcessed | None = None) -> float:
    """Area-normalised elemental L2 distance between ``u*`` and ``u``."""
    ustar = postprocess(solution, e) if ustar is None else ustar
    rule, _, u, _, _ = solution.fields_at(e, _level(ustar.k))
    return normalized_l2(ustar(rule.x) - u, rule.w)


def exact_error(solution: HdgSolution, e: int, exact_u: Callable) -> float:
    """Same normalised norm as the estimator, against an exact velocity."""
    k = int(solution.degrees[e])
    rule, _, u, _, _ = solution.fields_at(e, _level(k))
    return normalized_l2(u - np.asarray(exact_u(rule.x)), rule.w)


def degree_increment(E: float, eps: float, h: float, max_decrease: int = 1) -> int:
    """``ceil(log(eps / E) / log(h))``; ``E = 0`` gives ``-max_decrease``."""
    if not 0.0 < h < 1.0:
        raise ValueError(f"normalised element size must lie in (0, 1), got {h}")
    if eps <= 0:
        raise ValueError("desired error must be positive")
    if E < 0:
        raise ValueError("error estimate must be non-negative")
    if E == 0.0:
        return -max_decrease
    return math.ceil(math.log(eps / E) / math.log(h))


def applied_increment(dk: int, adapt: "AdaptConfig") -> int:
    """Increment actually applied: decreases need ``dk <= -(1 + margin)``
    and are capped at ``max_decrease``."""
    if dk >= 0:
        return dk
    if dk > -(1 + adapt.decrease_margin):
        return 0
    return max(dk, -adapt.max_decrease)


def update_geometry(backend: GeometryBackend, degrees) -> list:
    """Element geometries for a new degree map.

    Fixed isoparametric geometry never changes; NEFEM keeps its charts and
    only the nodal sets follow ``k``; regenerated isoparametric geometry is
    rebuilt with ``q = k`` on the curve.
    """
    return backend.elements(degrees)


@dataclass
class AdaptConfig:
    eps: float
    max_iterations: int = 10
    k_min: int = 1
    k_max: int = ap.K_MAX
    max_decrease: int = 1
    decrease_margin: int = 1

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("desired error must be positive")
        if self.k_min < 1 or self.k_max > ap.K_MAX or self.k_min > self.k_max:
            raise ValueError(f"degree bounds must satisfy 1 <= k_min <= k_max <= {ap.K_MAX}")
        if self.max_iterations < 1:
            raise ValueError("need at least one iteration")


@dataclass
class AdaptIteration:
    degrees: np.ndarray
    estimate: np.ndarray
    exact: np.ndarray | None
    increment: np.ndarray
    dofs: int
    converged: bool

    @property
    def max_estimate(self) -> float:
        return float(self.estimate.max())

    @property
    def max_exact(self) -> float:
        return float("nan") if self.exact is None else float(self.exact.max())


@dataclass
class AdaptReport:
    strategy: str
    eps: float
    iterations: list = field(default_factory=list)
    solution: HdgSolution | None = None

    @property
    def converged(self) -> bool:
        return bool(self.iterations) and self.iterations[-1].converged

    @property
    def final(self) -> AdaptIteration:
        return self.iterations[-1]

    def rows(self) -> list[tuple]:
        return [(i + 1, it.max_estimate, it.max_exact, it.dofs)
                for i, it in enumerate(self.iterations)]


def adapt_loop(mesh: TriMesh, spec: ProblemSpec, config: SolverConfig,
               adapt: AdaptConfig, exact_u: Callable | None = None,
               initial_degrees=None) -> AdaptReport:
    """Solve, estimate and update degrees until ``max E_e <= eps``.

    Decreases are limited to ``max_decrease`` per iteration and never go back
    to a degree at which the element was already seen above ``eps``; without
    that guard the degree map can cycle.
    """
    ne = mesh.n_elements
    degrees = (np.full(ne, adapt.k_min, dtype=int) if initial_degrees is None
               else np.clip(np.asarray(initial_degrees, dtype=int), adapt.k_min, adapt.k_max))
    backend = GeometryBackend(mesh, config.strategy)
    h = np.array([mesh.element_size(e) for e in range(ne)])
    # lowest degree not yet seen to violate the tolerance, per element
    floor = np.full(ne, adapt.k_min, dtype=int)
    report = AdaptReport(str(config.strategy), adapt.eps)
    for it in range(adapt.max_iterations):
        update_geometry(backend, degrees)
        sol = solve(mesh, spec, config, degrees, backend)
        est = np.array([estimate_error(sol, e) for e in range(ne)])
        exact = (None if exact_u is None
                 else np.array([exact_error(sol, e, exact_u) for e in range(ne)]))
        done = bool(est.max() <= adapt.eps)
        dk = np.array([applied_increment(degree_increment(est[e], adapt.eps, h[e],
                                                          adapt.max_decrease), adapt)
                       for e in range(ne)])
        report.iterations.append(AdaptIteration(degrees.copy(), est, exact, dk,
                                                sol.n_dofs, done))
        report.solution = sol
        log.info("iteration %d: max E = %.3e, dofs = %d", it + 1, est.max(), sol.n_dofs)
        if done:
            break
        bad = est > adapt.eps
        floor[bad] = np.maximum(floor[bad], degrees[bad] + 1)
        new = np.clip(np.maximum(degrees + dk, np.minimum(floor, degrees)),
                      adapt.k_min, adapt.k_max)
        if np.array_equal(new, degrees):
            log.warning("degree map stalled at iteration %d", it + 1)
            break
        degrees = new
    return report

