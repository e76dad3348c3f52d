"""Convergence studies and adaptivity-strategy comparisons."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .adaptivity import AdaptConfig, adapt_loop, postprocess
from .benchmarks import Benchmark
from .geometry import GeometryStrategy
from .hdg import HdgSolution, SolverConfig, solve
from .mesh import TriMesh

log = logging.getLogger(__name__)

FIELDS = ("u", "ustar", "L", "p")


def element_centroids(mesh: TriMesh) -> np.ndarray:
    return mesh.vertices[mesh.elements].mean(axis=1)


def sector_degrees(mesh: TriMesh, degrees: Sequence[int] = (1, 2, 3, 4, 5, 6),
                   center=None) -> np.ndarray:
    """Degree per element by angular sector of its centroid around ``center``."""
    cen = element_centroids(mesh)
    c = cen.mean(axis=0) if center is None else np.asarray(center, dtype=float)
    ang = np.mod(np.arctan2(cen[:, 1] - c[1], cen[:, 0] - c[0]), 2 * np.pi)
    sector = np.minimum((ang / (2 * np.pi) * len(degrees)).astype(int), len(degrees) - 1)
    return np.asarray(degrees, dtype=int)[sector]


def tracked_elements(mesh: TriMesh, degrees: np.ndarray) -> dict[int, int]:
    """For each degree, the element nearest the centroid of its patch."""
    cen = element_centroids(mesh)
    out = {}
    for k in np.unique(degrees):
        ids = np.flatnonzero(degrees == k)
        mid = cen[ids].mean(axis=0)
        out[int(k)] = int(ids[np.argmin(np.linalg.norm(cen[ids] - mid, axis=1))])
    return out


def central_descendant(e: int, levels: int) -> int:
    """Index of the central child after ``levels`` nested refinements."""
    for _ in range(levels):
        e = 4 * e + 3
    return e


def elemental_errors(sol: HdgSolution, bench: Benchmark, e: int,
                     pressure_shift: float = 0.0) -> dict[str, float]:
    """Unnormalised L2(Omega_e) errors of u, u*, L and ``p - pressure_shift``."""
    k = int(sol.degrees[e])
    rule, L, u, p, _ = sol.fields_at(e, k + 3)
    x, w = rule.x, rule.w
    ex = bench.exact
    us = postprocess(sol, e)
    sq = {
        "u": np.sum((u - ex.velocity(x)) ** 2, axis=1),
        "ustar": np.sum((us(x) - ex.velocity(x)) ** 2, axis=1),
        "L": np.sum((L - ex.L(x)) ** 2, axis=(1, 2)),
        "p": (p - ex.pressure(x) - pressure_shift) ** 2,
    }
    return {name: math.sqrt(max(float(w @ v), 0.0)) for name, v in sq.items()}


def fit_slope(h: Sequence[float], err: Sequence[float], last: int = 3) -> float:
    """Least-squares slope of ``log err`` against ``log h`` over the last levels."""
    lh = np.log(np.asarray(h, dtype=float)[-last:])
    le = np.log(np.asarray(err, dtype=float)[-last:])
    return float(np.polyfit(lh, le, 1)[0])


@dataclass
class ConvergenceTable:
    """Rows ``(level, h, k, err_u, err_ustar, err_L, err_p)`` and fitted slopes."""

    benchmark: str
    strategy: str
    rows: list = field(default_factory=list)
    slopes: dict = field(default_factory=dict)
    monotone: bool = True
    seconds: float = 0.0

    def degrees(self) -> list[int]:
        return sorted({r[2] for r in self.rows})

    def series(self, k: int) -> tuple[np.ndarray, dict[str, np.ndarray]]:
        rows = [r for r in self.rows if r[2] == k]
        h = np.array([r[1] for r in rows])
        return h, {f: np.array([r[3 + i] for r in rows]) for i, f in enumerate(FIELDS)}

    def fit(self, last: int = 3) -> dict:
        self.slopes = {}
        self.monotone = True
        for k in self.degrees():
            h, errs = self.series(k)
            if h.size < last:
                raise ValueError(f"need at least {last} levels to fit slopes")
            self.slopes[k] = {f: fit_slope(h, e, last) for f, e in errs.items()}
            for f, e in errs.items():
                if np.any(np.diff(e) >= 0):
                    log.warning("%s k=%d: non-monotone %s error sequence", self.strategy, k, f)
                    self.monotone = False
        return self.slopes


def pressure_offset(sol: HdgSolution, bench: Benchmark) -> float:
    """Domain mean of ``p_h - p`` for pure Dirichlet problems, else 0.

    The pressure is only determined up to a constant there; errors are
    measured against the exact pressure with the discrete domain mean.
    """
    if not bench.spec.pure_dirichlet:
        return 0.0
    num = den = 0.0
    for e in range(sol.mesh.n_elements):
        rule, _, _, p, _ = sol.fields_at(e, int(sol.degrees[e]) + 1)
        num += float(rule.w @ (p - bench.exact.pressure(rule.x)))
        den += float(rule.w.sum())
    return num / den


def run_convergence(bench: Benchmark, strategy: GeometryStrategy, levels: int = 4,
                    degrees: Sequence[int] = (1, 2, 3, 4, 5, 6),
                    mode: str = "variable", track: Sequence[int] | None = None) -> ConvergenceTable:
    """h-convergence of tracked elements on nested meshes.

    ``mode="variable"``: ``degrees`` are assigned to angular sectors of the
    coarse mesh (children inherit the degree) and the element nearest the
    centroid of each sector patch is tracked.  Lower-degree patches pollute
    the whole domain at their own rate, so each tracked degree ``k`` gets its
    own run with every patch below ``k`` raised to ``k``.

    ``mode="uniform"``: one run per degree with the same ``k`` everywhere,
    tracking the element nearest the domain centroid.
    """
    if levels < 3:
        raise ValueError("at least 3 mesh levels are required")
    t0 = time.perf_counter()
    meshes = bench.meshes(levels)
    coarse = meshes[0]
    config = SolverConfig(strategy=strategy)
    table = ConvergenceTable(bench.name, str(strategy))
    wanted = list(degrees) if track is None else [k for k in degrees if k in track]
    if mode == "variable":
        kc = sector_degrees(coarse, degrees)
        tracked = tracked_elements(coarse, kc)
        runs = [(np.maximum(kc, k), k, tracked[k]) for k in wanted]
    elif mode == "uniform":
        cen = element_centroids(coarse)
        mid = int(np.argmin(np.linalg.norm(cen - cen.mean(axis=0), axis=1)))
        runs = [(np.full(coarse.n_elements, k), k, mid) for k in wanted]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    for kc, k, e0 in runs:
        for lev, mesh in enumerate(meshes):
            sol = solve(mesh, bench.spec, config, np.repeat(kc, 4 ** lev))
            e = central_descendant(e0, lev)
            err = elemental_errors(sol, bench, e, pressure_offset(sol, bench))
            h = mesh.element_size(e) * mesh.domain_diameter
            table.rows.append((lev, h, k, err["u"], err["ustar"], err["L"], err["p"]))
            log.info("%s k=%d level %d: %d elements, %d dofs", strategy, k, lev,
                     mesh.n_elements, sol.n_dofs)
    table.fit()
    table.seconds = time.perf_counter() - t0
    return table


@dataclass
class Comparison:
    reports: dict = field(default_factory=dict)   # (strategy, eps) -> AdaptReport

    def rows(self) -> list[tuple]:
        out = []
        for (strategy, eps), rep in self.reports.items():
            for it, max_e, max_x, dofs in rep.rows():
                out.append((strategy, eps, it, max_e, max_x, dofs))
        return out


def run_adapt_compare(bench: Benchmark, strategies: Sequence[GeometryStrategy],
                      eps_list: Sequence[float], max_iterations: int = 10,
                      k_max: int = 8) -> Comparison:
    """Adaptive runs for every strategy and tolerance."""
    comp = Comparison()
    for strategy in strategies:
        for eps in eps_list:
            rep = adapt_loop(bench.coarse, bench.spec, SolverConfig(strategy=strategy),
                             AdaptConfig(eps, max_iterations, k_max=k_max),
                             exact_u=bench.exact.velocity)
            comp.reports[(str(strategy), eps)] = rep
    return comp
