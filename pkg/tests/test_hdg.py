import numpy as np
import pytest

from hdgnefem.benchmarks import benchmark_circle
from hdgnefem.errors import DataError, SolverError
from hdgnefem.geometry import ISO_REGEN, NEFEM, GeometryBackend
from hdgnefem.hdg import (ProblemSpec, SolverConfig, assemble_global, assemble_local,
                          check_compatibility, condense, discretise,
                          element_edges, face_degrees, solve, solve_sparse)
from hdgnefem.mesh import DIRICHLET, NEUMANN, nested_refine, rectangle_mesh
from support import PolyStokes, single_triangle, small_meshes, zero_spec

def monolithic(mesh, spec, config, degrees):
    """Direct solve of element unknowns, traces and mean pressures together."""
    geometry, fdeg, dofs, tau, locals_ = discretise(mesh, spec, config, degrees)
    sizes = [loc.A.shape[0] for loc in locals_]
    off = np.concatenate([[0], np.cumsum(sizes)])
    nx = off[-1]
    N = nx + dofs.size
    M = np.zeros((N, N))
    b = np.zeros(N)
    ne = mesh.n_elements
    pd = spec.pure_dirichlet
    from hdgnefem.hdg import local_to_global, _SLICES
    for e, loc in enumerate(locals_):
        r = slice(off[e], off[e + 1])
        g = nx + local_to_global(dofs, loc.edges)
        rho = nx + dofs.rho(e)
        # A x - B uhat - e_zeta rho = f0
        M[r, r] = loc.A
        M[r, g] -= loc.B
        M[off[e + 1] - 1, rho] -= 1.0
        b[r] = loc.f0
        # weak flux balance: Q x - tau_mass uhat = neumann load
        M[np.ix_(g, np.arange(off[e], off[e + 1]))] += loc.Q
        M[np.ix_(g, g)] -= loc.tau_mass
        b[g] += loc.neumann_load
        if not (pd and e == ne - 1):
            M[rho, g] += loc.compat
            b[rho] += loc.compat_rhs
    if pd:
        row = nx + dofs.rho(ne - 1)
        for e, loc in enumerate(locals_):
            ps = _SLICES["p"](loc.n)
            M[row, off[e] + np.arange(loc.A.shape[0])[ps]] += loc.p_boundary
    sol = np.linalg.solve(M, b)
    return [sol[off[e]:off[e + 1]] for e in range(ne)], sol[nx:]


@pytest.mark.parametrize("name", list(small_meshes()))
@pytest.mark.parametrize("strategy", [NEFEM, ISO_REGEN])
def test_monolithic_equals_condensed(name, strategy):
    mesh = small_meshes()[name]
    assert mesh.n_elements <= 8
    ex = PolyStokes(3, nu=0.7, seed=4)
    spec = ex.spec(mesh.pure_dirichlet)
    rng = np.random.default_rng(1)
    degrees = rng.integers(1, 4, mesh.n_elements)
    config = SolverConfig(strategy=strategy)
    xs, U = monolithic(mesh, spec, config, degrees)
    sol = solve(mesh, spec, config, degrees)
    ref = np.concatenate(xs)
    got = np.concatenate([np.concatenate([sol.L[e].reshape(-1, 4).T.ravel(),
                                          sol.u[e].T.ravel(), sol.p[e], [sol.zeta[e]]])
                          for e in range(mesh.n_elements)])
    assert np.linalg.norm(got - ref) <= 1e-10 * np.linalg.norm(ref)
    traces = [sol.uhat[f].T.ravel() for f in sorted(sol.uhat)
              if sol.system.dofs.face_offset[f] >= 0]
    sysU = np.concatenate(traces + [sol.rho])
    assert np.linalg.norm(sysU - U) <= 1e-10 * max(np.linalg.norm(U), np.linalg.norm(ref))


@pytest.mark.parametrize("k", [1, 2, 3, 4])
@pytest.mark.parametrize("tags", ["dirichlet", "mixed"])
def test_polynomial_exactness(k, tags):
    t = DIRICHLET if tags == "dirichlet" else (NEUMANN, DIRICHLET, NEUMANN, DIRICHLET)
    mesh = rectangle_mesh(2, 2, x0=-0.3, x1=0.9, y0=0.1, y1=1.0, tags=t, diagonal="alternate")
    ex = PolyStokes(k, seed=k)
    sol = solve(mesh, ex.spec(mesh.pure_dirichlet), SolverConfig(), [k] * mesh.n_elements)
    shift = 0.0
    if mesh.pure_dirichlet:
        e0 = 0
        shift = float(np.mean(sol.p[e0] - ex.pressure(sol.geometry[e0].nodes(k))))
    for e in range(mesh.n_elements):
        x = sol.geometry[e].nodes(k)
        assert np.abs(sol.u[e] - ex.velocity(x)).max() < 1e-8
        assert np.abs(sol.L[e] + ex.grad(x)).max() < 1e-8
        assert np.abs(sol.p[e] - shift - ex.pressure(x)).max() < 1e-8


def test_mixed_degree_polynomial_exactness():
    mesh = rectangle_mesh(3, 2, tags=(NEUMANN, DIRICHLET, DIRICHLET, DIRICHLET))
    ex = PolyStokes(2, seed=9)
    degrees = np.array([2, 3, 4, 2, 3, 4, 4, 3, 2, 2, 3, 4])
    sol = solve(mesh, ex.spec(False), SolverConfig(), degrees)
    for e in range(mesh.n_elements):
        x = sol.geometry[e].nodes(int(degrees[e]))
        assert np.abs(sol.u[e] - ex.velocity(x)).max() < 1e-9


def test_local_mass_block_linear():
    mesh = single_triangle()
    spec = zero_spec()
    geom = GeometryBackend(mesh, NEFEM).element(0, 1)
    fdeg = face_degrees(mesh, [1])
    loc = assemble_local(geom, 1, element_edges(mesh, 0, fdeg), spec, 1.0)
    Mref = 0.5 / 12 * (np.ones((3, 3)) + np.eye(3))
    ALL = loc.block("L", "L")
    assert np.allclose(-ALL, np.kron(np.eye(4), Mref), atol=1e-15)
    assert np.all(np.linalg.eigvalsh(-ALL) > 0)


def test_local_polynomial_consistency():
    """With exact traces and data, the local solve returns (-grad u, u, p)."""
    mesh = rectangle_mesh(1, 1, tags=(NEUMANN, NEUMANN, DIRICHLET, DIRICHLET))
    ex = PolyStokes(3, seed=2)
    spec = ex.spec(False)
    k = 3
    geom = GeometryBackend(mesh, NEFEM).element(0, k)
    fdeg = face_degrees(mesh, [k, k])
    edges = element_edges(mesh, 0, fdeg)
    loc = assemble_local(geom, k, edges, spec, 2.0)
    uh = []
    from hdgnefem.approximation import trace_basis
    for info in edges:
        if info.slot is None:
            continue
        a, b = mesh.faces[info.face]
        tn = trace_basis(info.k_hat).nodes
        xs = np.outer(1 - tn, mesh.vertices[a]) + np.outer(tn, mesh.vertices[b])
        uh.append(ex.velocity(xs).T.ravel())
    uh = np.concatenate(uh)
    x = geom.nodes(k)
    # boundary mean of p over the whole element boundary
    rho = sum(er.w @ ex.pressure(er.x) for er in (geom.edge_rule(l, k + 2) for l in range(3)))
    sol = np.linalg.solve(loc.A, loc.f0 + loc.B @ uh + np.eye(loc.A.shape[0])[-1] * rho)
    n = loc.n
    L = sol[:4 * n].reshape(4, n)
    g = ex.grad(x)
    for i in range(2):
        for j in range(2):
            assert np.allclose(L[2 * i + j], -g[:, i, j], atol=1e-9)
    assert np.allclose(sol[4 * n:5 * n], ex.velocity(x)[:, 0], atol=1e-9)
    assert np.allclose(sol[6 * n:7 * n], ex.pressure(x), atol=1e-9)
    assert abs(sol[-1]) < 1e-9


def test_zero_data_gives_zero_solution():
    mesh = rectangle_mesh(2, 2)
    sol = solve(mesh, zero_spec(), SolverConfig(), [2] * mesh.n_elements)
    for e in range(mesh.n_elements):
        assert np.abs(sol.u[e]).max() < 1e-14 and np.abs(sol.p[e]).max() < 1e-14
        assert np.abs(sol.L[e]).max() < 1e-14


def test_condense_zero_rhs():
    mesh = rectangle_mesh(1, 1, tags=(NEUMANN, DIRICHLET, DIRICHLET, DIRICHLET))
    spec = zero_spec(False)
    _, fdeg, dofs, _, locals_ = discretise(mesh, spec, SolverConfig(), [2, 3])
    for loc in locals_:
        ce = condense(loc)
        assert np.all(ce.rhs == 0) and np.all(ce.x0 == 0)
        assert ce.K.shape == (loc.n_trace, loc.n_trace + 1)


def test_global_bookkeeping():
    mesh = rectangle_mesh(2, 2, tags=(NEUMANN, DIRICHLET, DIRICHLET, DIRICHLET))
    degrees = [1, 2, 3, 1, 2, 3, 1, 2]
    spec = PolyStokes(1).spec(False)
    _, fdeg, dofs, _, locals_ = discretise(mesh, spec, SolverConfig(), degrees)
    rows = sum(2 * (fdeg[f] + 1) for f in range(mesh.n_faces)
               if mesh.face_tag(f) != DIRICHLET)
    assert dofs.n_trace == rows and dofs.size == rows + mesh.n_elements
    assert np.all(fdeg >= 1)
    fe = mesh.conn.face_elements
    for f in range(mesh.n_faces):
        ks = [degrees[e] for e in fe[f] if e >= 0]
        assert fdeg[f] == max(ks)
    system = assemble_global(mesh, dofs, [condense(l) for l in locals_], False)
    K = abs(system.K).toarray()
    S = K > 1e-12 * K.max()
    assert np.array_equal(S, S.T)


def test_missing_constraint_detected():
    mesh = rectangle_mesh(1, 1)
    spec = zero_spec()
    _, _, dofs, _, locals_ = discretise(mesh, spec, SolverConfig(), [1, 1])
    condensed = [condense(l) for l in locals_]
    # without the pressure constraint the mean pressures are only fixed up to a constant
    system = assemble_global(mesh, dofs, condensed, False)
    with pytest.raises(SolverError, match="singular"):
        solve_sparse(system.K, system.f)
    # a single all-Dirichlet element has no trace unknowns and an empty compatibility row
    tri = single_triangle()
    _, _, d1, _, l1 = discretise(tri, spec, SolverConfig(), [1])
    with pytest.raises(SolverError, match="empty rows"):
        assemble_global(tri, d1, [condense(l) for l in l1], False)


def test_pure_dirichlet_flag_checked():
    mesh = rectangle_mesh(1, 1)
    with pytest.raises(DataError):
        solve(mesh, zero_spec(False), SolverConfig(), [1, 1])


def test_compatibility_examples():
    mesh = nested_refine(rectangle_mesh(2, 2))
    assert check_compatibility(zero_spec(), mesh) == 0.0
    const = ProblemSpec(1.0, lambda x: 0 * x, lambda x: np.tile([1.0, 0.0], (x.shape[0], 1)))
    assert check_compatibility(const, mesh) < 1e-14
    bench = benchmark_circle()
    assert check_compatibility(bench.spec, bench.mesh(1)) < 1e-10
    bad = ProblemSpec(1.0, lambda x: 0 * x, lambda x: x.copy())
    with pytest.raises(DataError):
        check_compatibility(bad, mesh)


@pytest.mark.parametrize("scale", [0.1, 1.0, 10.0])
def test_tau_robustness(scale):
    bench = benchmark_circle()
    mesh = bench.mesh(1)
    sol = solve(mesh, bench.spec, SolverConfig(tau_scale=scale), [2] * mesh.n_elements)
    assert sol.residual <= 1e-9 * np.linalg.norm(sol.system.f)
    err = max(np.abs(sol.u[e] - bench.exact.velocity(sol.geometry[e].nodes(2))).max()
              for e in range(mesh.n_elements))
    assert err < 1e-2


def test_tau_must_be_positive():
    with pytest.raises(ValueError):
        SolverConfig(tau=-1.0).tau_value(zero_spec(), rectangle_mesh(1, 1))


def test_boundary_mean_pressure_equals_rho():
    bench = benchmark_circle()
    mesh = bench.mesh(1)
    sol = solve(mesh, bench.spec, SolverConfig(), [3] * mesh.n_elements)
    for e in range(mesh.n_elements):
        g = sol.geometry[e]
        total = 0.0
        for l in range(3):
            er = g.edge_rule(l, 5)
            total += er.w @ (g.tabulate_edge(3, er) @ sol.p[e])
        assert abs(total - sol.rho[e]) < 1e-9


def test_dirichlet_trace_matches_data():
    bench = benchmark_circle()
    mesh = bench.mesh(0)
    sol = solve(mesh, bench.spec, SolverConfig(), [4] * mesh.n_elements)
    fe = mesh.conn.face_elements
    for f, bf in mesh.boundary.items():
        e, l = fe[f, 0], mesh.conn.face_local[f, 0]
        er = sol.geometry[e].edge_rule(l, 6)
        from hdgnefem.hdg import face_trace_values
        vals = face_trace_values(mesh, f, int(sol.face_degree[f]), er.t) @ sol.uhat[f]
        assert np.abs(vals - bench.exact.velocity(er.x)).max() < 1e-4


def test_higher_degree_reduces_error():
    bench = benchmark_circle()
    mesh = bench.mesh(1)
    errs = {}
    for k in (2, 4):
        sol = solve(mesh, bench.spec, SolverConfig(), [k] * mesh.n_elements)
        errs[k] = np.array([np.sqrt(abs(r.w @ np.sum((u - bench.exact.velocity(r.x)) ** 2, 1)))
                            for r, _, u, _, _ in (sol.fields_at(e, k + 2)
                                                  for e in range(mesh.n_elements))])
    assert np.all(errs[4] < errs[2])


def test_local_conservation():
    """Element momentum balance with the numerical flux holds to solver precision."""
    mesh = rectangle_mesh(2, 2, tags=(NEUMANN, DIRICHLET, DIRICHLET, DIRICHLET))
    ex = PolyStokes(3, seed=5)
    spec = ex.spec(False)
    k = 2
    sol = solve(mesh, spec, SolverConfig(), [k] * mesh.n_elements)
    from hdgnefem.hdg import face_trace_values
    for e in range(mesh.n_elements):
        g = sol.geometry[e]
        rule = g.volume_rule(k + 2)
        src = rule.w @ spec.source(rule.x)
        flux = np.zeros(2)
        for l in range(3):
            f = int(mesh.conn.element_faces[e, l])
            er = g.edge_rule(l, k + 2)
            N = g.tabulate_edge(k, er)
            L = np.einsum("pn,nij->pij", N, sol.L[e])
            u = N @ sol.u[e]
            p = N @ sol.p[e]
            uh = face_trace_values(mesh, f, int(sol.face_degree[f]), er.t) @ sol.uhat[f]
            # trace of (nu L + p I) n + tau (u - uhat)
            tr = (spec.viscosity * np.einsum("pi,pij->pj", er.normal, L) + p[:, None] * er.normal
                  + sol.tau * (u - uh))
            flux += er.w @ tr
        # div(nu L + p I) = s
        assert np.allclose(flux - src, 0, atol=1e-9 * (1 + np.abs(src).max()))
