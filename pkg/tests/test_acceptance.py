"""Acceptance criteria 1-7.  Each test records one PASS/FAIL line.

    pytest tests/test_acceptance.py -s      # or: python tests/test_acceptance.py
"""
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from hdgnefem.adaptivity import degree_increment
from hdgnefem.benchmarks import benchmark_circle, benchmark_wavy_channel
from hdgnefem.geometry import ISO_REGEN, NEFEM, element_chart, iso_fixed
from hdgnefem.hdg import SolverConfig, solve
from hdgnefem.mesh import DIRICHLET, NEUMANN, rectangle_mesh
from hdgnefem.nurbs import ParamInterval, quarter_circle
from hdgnefem.approximation import nefem_map
from hdgnefem.quadrature import monomial_integral, nefem_face_rule, triangle_rule
from hdgnefem.studies import run_adapt_compare, run_convergence
from support import PolyStokes, quarter_disc, small_meshes
from test_hdg import monolithic

HERE = Path(__file__).parent

# expected slope offset from k and allowed band per field
BANDS = {"u": (2, 0.25), "ustar": (3, 0.3), "L": (2, 0.25), "p": (2, 0.3)}


@pytest.mark.slow
def test_criterion_1_convergence_rates(criterion):
    t0 = time.perf_counter()
    bench = benchmark_circle()
    bad, parts = [], []
    for strategy in (ISO_REGEN, NEFEM):
        table = run_convergence(bench, strategy, levels=4, track=(1, 2, 3))
        for k in (1, 2, 3):
            s = table.slopes[k]
            parts.append(f"{strategy} k={k} " + "/".join(f"{s[f]:.2f}" for f in BANDS))
            for f, (off, tol) in BANDS.items():
                if abs(s[f] - (k + off)) > tol:
                    bad.append(f"{strategy} k={k} {f}={s[f]:.2f}")
    dt = time.perf_counter() - t0
    ok = criterion(1, not bad and dt < 300,
                   f"slopes u/u*/L/p: {'; '.join(parts)}; {dt:.0f}s" + (f"; off: {bad}" if bad else ""))
    assert ok


def test_criterion_2_degree_formula(criterion):
    ok = (degree_increment(0.3e-2, 0.3e-2, 0.4) == 0
          and degree_increment(1e-4, 1e-2, 0.1) == -2
          and degree_increment(1e-2, 1e-4, 0.1) == 2)
    rng = np.random.default_rng(18)
    mism = 0
    for _ in range(50):
        eps, E, h = 10.0 ** rng.uniform(-8, -1), 10.0 ** rng.uniform(-10, 1), rng.uniform(0.01, 0.99)
        mism += degree_increment(E, eps, h) != math.ceil(math.log(eps / E) / math.log(h))
    ok = criterion(2, ok and mism == 0, f"3 examples, 50 random triples, {mism} mismatches")
    assert ok


@pytest.mark.slow
def test_criterion_3_estimator_reliability(criterion):
    t0 = time.perf_counter()
    eps = 0.5e-2
    comp = run_adapt_compare(benchmark_wavy_channel(), [NEFEM, iso_fixed(1)], [eps])
    nef = comp.reports[("nefem", eps)]
    iso = comp.reports[("iso-fixed:1", eps)]
    dt = time.perf_counter() - t0
    a = nef.converged and len(nef.iterations) <= 4 and nef.final.max_exact <= 2 * eps
    b = iso.converged and iso.final.max_exact >= 10 * eps
    ok = criterion(3, a and b and dt < 180,
                   f"nefem: {len(nef.iterations)} it, exact {nef.final.max_exact:.2e}; "
                   f"iso-fixed:1: {len(iso.iterations)} it, estimate {iso.final.max_estimate:.2e}, "
                   f"exact {iso.final.max_exact:.2e} ({iso.final.max_exact / eps:.0f} eps); {dt:.0f}s")
    assert ok


def test_criterion_4_polynomial_exactness(criterion):
    mesh = rectangle_mesh(2, 2, x0=-0.3, x1=0.9, y0=0.1, y1=1.0,
                          tags=(NEUMANN, DIRICHLET, NEUMANN, DIRICHLET), diagonal="alternate")
    worst = {}
    for k in (1, 2, 3, 4):
        ex = PolyStokes(k, seed=10 + k)
        sol = solve(mesh, ex.spec(False), SolverConfig(), [k] * mesh.n_elements)
        err = 0.0
        for e in range(mesh.n_elements):
            x = sol.geometry[e].nodes(k)
            err = max(err, np.abs(sol.u[e] - ex.velocity(x)).max(),
                      np.abs(sol.L[e] - ex.L(x)).max(),
                      np.abs(sol.p[e] - ex.pressure(x)).max())
        worst[k] = err
    ok = criterion(4, max(worst.values()) < 1e-8,
                   "max nodal error " + ", ".join(f"k={k}: {v:.1e}" for k, v in worst.items()))
    assert ok


def test_criterion_5_monolithic_equivalence(criterion):
    worst = 0.0
    count = 0
    for name, mesh in small_meshes().items():
        for strategy in (NEFEM, ISO_REGEN):
            ex = PolyStokes(3, nu=0.7, seed=4)
            spec = ex.spec(mesh.pure_dirichlet)
            degrees = np.random.default_rng(1).integers(1, 4, mesh.n_elements)
            config = SolverConfig(strategy=strategy)
            xs, _ = monolithic(mesh, spec, config, degrees)
            sol = solve(mesh, spec, config, degrees)
            ref = np.concatenate(xs)
            got = np.concatenate([np.concatenate([sol.L[e].reshape(-1, 4).T.ravel(),
                                                  sol.u[e].T.ravel(), sol.p[e], [sol.zeta[e]]])
                                  for e in range(mesh.n_elements)])
            worst = max(worst, np.linalg.norm(got - ref) / np.linalg.norm(ref))
            count += 1
    ok = criterion(5, worst <= 1e-10, f"{count} mesh/backend pairs, max relative gap {worst:.1e}")
    assert ok


def test_criterion_6_quadrature_and_geometry(criterion):
    mono = 0.0
    for d in range(19):
        r = triangle_rule(d)
        x, y = r.points[:, 0], r.points[:, 1]
        for a in range(d + 1):
            for b in range(d + 1 - a):
                exact = monomial_integral(a, b)
                mono = max(mono, abs(r.weights @ (x**a * y**b) - exact) / exact)
    arc = nefem_face_rule(quarter_circle((0.5, 0.5), 0.5), ParamInterval(0, 0.0, 1.0), 4).measure
    chart = element_chart(quarter_disc(), 0)
    lam = np.linspace(0, 1, 17)
    top = np.array_equal(nefem_map(chart, lam, np.ones_like(lam))[0],
                         np.tile(chart.interior_vertex, (lam.size, 1)))
    base = np.array_equal(nefem_map(chart, lam, np.zeros_like(lam))[0], chart.curve(lam))
    ok = criterion(6, mono < 1e-12 and abs(arc - math.pi / 4) < 1e-10 and top and base,
                   f"monomials d<=18 rel err {mono:.1e}; arc-pi/4 {arc - math.pi / 4:.1e}; "
                   f"collapse identities {'exact' if top and base else 'broken'}")
    assert ok


def test_criterion_7_property_suite(criterion):
    r = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                        str(HERE / "test_properties.py")], capture_output=True, text=True,
                       cwd=HERE.parent)
    last = r.stdout.strip().splitlines()[-1] if r.stdout.strip() else r.stderr.strip()
    ok = criterion(7, r.returncode == 0, f"standalone run: {last}")
    assert ok


if __name__ == "__main__":
    sys.exit(subprocess.call([sys.executable, "-m", "pytest", "-s", "-q", __file__]))
