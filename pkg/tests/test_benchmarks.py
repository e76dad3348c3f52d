import numpy as np
import pytest

from hdgnefem.benchmarks import (StokesExact, benchmark_circle, benchmark_wavy_channel,
                                 fit_wavy_curve, get_benchmark, wavy_profile)
from hdgnefem.errors import GeometryError
from hdgnefem.mesh import NEUMANN


def test_exact_solution_values():
    ex = StokesExact()
    assert np.allclose(ex.velocity(np.array([[0.5, 0.5]])), 0.0)
    assert np.isclose(ex.pressure(np.array([[0.5, 0.3]]))[0], 0.25)


def test_exact_solution_divergence_free_and_strong_form():
    rng = np.random.default_rng(7)
    x = rng.random((100, 2))
    ex = StokesExact()
    assert np.abs(np.einsum("pii->p", ex.grad(x))).max() < 1e-15
    assert ex.strong_residual(x) < 1e-10
    h = 1e-6
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (ex.velocity(x + e) - ex.velocity(x - e)) / (2 * h)
        assert np.allclose(fd, ex.grad(x)[:, i, :], atol=1e-8)


def test_circle_benchmark():
    b = benchmark_circle()
    assert len(b.curves) == 1 and b.curves[0].degree == 2
    c = b.curves[0]
    assert np.allclose(c(0.0), c(1.0))
    lam = np.linspace(0, 1, 101)
    assert np.allclose(np.linalg.norm(c(lam) - 0.5, axis=1), 0.5, atol=1e-15)
    assert b.spec.pure_dirichlet and b.spec.viscosity == 1.0
    assert b.coarse.n_elements == 16 and b.info["strong_residual"] < 1e-10
    assert [m.n_elements for m in b.meshes(3)] == [16, 64, 256]


def test_wavy_profile_values():
    assert np.isclose(wavy_profile(0.0), 0.2)
    assert abs(wavy_profile(0.2)) < 1e-16


def test_wavy_fit_accuracy():
    curve, dev = fit_wavy_curve(0.0, 3.0)
    assert dev <= 1e-10
    s = np.linspace(0.0, 3.0, 1000)
    pts = curve(s)
    assert np.abs(pts[:, 1] - wavy_profile(pts[:, 0])).max() <= 1e-10


def test_wavy_fit_failure_reported():
    with pytest.raises(GeometryError, match="deviation"):
        fit_wavy_curve(0.0, 3.0, degree=3, spans=10)


def test_wavy_benchmark():
    b = benchmark_wavy_channel()
    assert not b.spec.pure_dirichlet
    m = b.coarse
    curved = m.curved_faces()
    assert curved and all(m.boundary[f].tag == NEUMANN for f in curved)
    assert all(bf.tag != NEUMANN for bf in m.boundary.values() if not bf.curved)
    assert b.info["fit_deviation"] <= 1e-10


def test_registry():
    assert get_benchmark("circle").name == "circle"
    with pytest.raises(ValueError):
        get_benchmark("ellipses")
