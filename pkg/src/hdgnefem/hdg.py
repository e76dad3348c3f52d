"""HDG discretisation of stationary Stokes flow.

Element unknowns are the velocity gradient ``L = -grad u`` (stored as
components ``L[i, j] = -d u_j / d x_i``), the velocity ``u`` and the pressure
``p``, all with the same nodal basis of degree ``k_e``, plus the Lagrange
multiplier ``zeta`` of the boundary-mean-pressure constraint.  The global
unknowns are the velocity trace on every non-Dirichlet face and one boundary
mean pressure ``rho_e`` per element.

Local vector layout (``n`` basis functions): ``L00, L01, L10, L11`` blocks,
then ``u0, u1``, then ``p``, then ``zeta`` -- size ``7n + 1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import approximation as ap
from .errors import DataError, SolverError
from .geometry import NEFEM, ElementGeometry, GeometryBackend, GeometryStrategy, iso_fixed
from .mesh import DIRICHLET, NEUMANN, TriMesh

VectorField = Callable[[np.ndarray], np.ndarray]


@dataclass
class ProblemSpec:
    """Stokes data.  ``traction(x, n)`` is the pseudo-traction ``n . (nu grad u - p I)``."""

    viscosity: float
    source: VectorField
    dirichlet: VectorField
    traction: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    pure_dirichlet: bool = True

    def __post_init__(self):
        if self.viscosity <= 0:
            raise ValueError("viscosity must be positive")


@dataclass
class SolverConfig:
    """``tau=None`` selects ``3 nu / diameter``; ``tau_scale`` multiplies it."""

    strategy: GeometryStrategy = NEFEM
    tau: float | None = None
    tau_scale: float = 1.0
    check_data: bool = True

    def tau_value(self, spec: ProblemSpec, mesh: TriMesh) -> float:
        tau = 3.0 * spec.viscosity / mesh.domain_diameter if self.tau is None else self.tau
        tau *= self.tau_scale
        if tau <= 0:
            raise ValueError("stabilisation parameter must be positive")
        return tau


def face_degrees(mesh: TriMesh, degrees: Sequence[int]) -> np.ndarray:
    """Trace degree per face: max of the neighbours (boundary: the element degree)."""
    fe = mesh.conn.face_elements
    k = np.asarray(degrees, dtype=int)
    left = k[fe[:, 0]]
    right = np.where(fe[:, 1] >= 0, k[np.maximum(fe[:, 1], 0)], 0)
    return np.maximum(left, right)


def face_trace_values(mesh: TriMesh, f: int, k_hat: int, t: np.ndarray) -> np.ndarray:
    bf = mesh.boundary.get(f)
    iv = bf.interval if bf is not None else None
    tb = ap.trace_basis(k_hat, iv)
    return tb(t if iv is None else iv.at(t))


@dataclass
class EdgeInfo:
    local_edge: int
    face: int
    k_hat: int
    tag: int | None
    slot: slice | None   # position in the element's trace vector (None on Dirichlet faces)


@dataclass(eq=False)
class LocalSystem:
    """Element matrices: ``A x = f0 + B uhat + e_zeta * rho`` and flux rows.

    ``Q x - tau_mass uhat`` gives the element's contribution to the weak flux
    of the trace test functions; ``compat`` holds the per-element
    ``<uhat . n, 1>`` row.
    """

    element: int
    k: int
    n: int
    edges: list[EdgeInfo]
    A: np.ndarray
    f0: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    tau_mass: np.ndarray
    neumann_load: np.ndarray
    compat: np.ndarray
    compat_rhs: float
    p_boundary: np.ndarray

    def block(self, rows: str, cols: str) -> np.ndarray:
        return self.A[_SLICES[rows](self.n), _SLICES[cols](self.n)]

    @property
    def n_trace(self) -> int:
        return self.B.shape[1]


_SLICES = {
    "L": lambda n: slice(0, 4 * n),
    "u": lambda n: slice(4 * n, 6 * n),
    "p": lambda n: slice(6 * n, 7 * n),
    "zeta": lambda n: slice(7 * n, 7 * n + 1),
}


def _edge_level(k: int, k_hat: int) -> int:
    return max(k, k_hat)


def assemble_local(geom: ElementGeometry, k: int, edges: Sequence[EdgeInfo],
                   spec: ProblemSpec, tau: float) -> LocalSystem:
    """Discrete local problem of one element."""
    mesh = geom.mesh
    nu = spec.viscosity
    rule = geom.volume_rule(k)
    N, dN = geom.tabulate(k, rule)
    n = N.shape[1]
    w = rule.w
    M = N.T @ (w[:, None] * N)
    C = [dN[:, :, i].T @ (w[:, None] * N) for i in range(2)]   # C_i[a, b] = (d_i N_a, N_b)
    src = np.asarray(spec.source(rule.x))
    fs = [N.T @ (w * src[:, j]) for j in range(2)]

    Bd = [np.zeros((n, n)) for _ in range(2)]   # <N_a, n_i N_b>
    E = np.zeros((n, n))                         # <N_a, N_b>
    d = np.zeros(n)                              # <N_a, 1>
    dbnd = np.zeros(n)                           # <N_a, 1> on the domain boundary
    nt = sum(2 * (e.k_hat + 1) for e in edges if e.slot is not None)
    size = 7 * n + 1
    f0 = np.zeros(size)
    Bm = np.zeros((size, nt))
    Q = np.zeros((nt, size))
    tmass = np.zeros((nt, nt))
    gneu = np.zeros(nt)
    compat = np.zeros(nt)
    compat_rhs = 0.0
    sL = lambda i, j: slice((2 * i + j) * n, (2 * i + j + 1) * n)
    su = lambda j: slice((4 + j) * n, (5 + j) * n)
    sp_ = slice(6 * n, 7 * n)

    for info in edges:
        er = geom.edge_rule(info.local_edge, _edge_level(k, info.k_hat))
        Ne = geom.tabulate_edge(k, er)
        we, nrm = er.w, er.normal
        for i in range(2):
            Bd[i] += Ne.T @ ((we * nrm[:, i])[:, None] * Ne)
        E += Ne.T @ (we[:, None] * Ne)
        d += Ne.T @ we
        if info.tag is not None:
            dbnd += Ne.T @ we
        if info.slot is None:
            # Dirichlet face: data enter the right-hand side
            ud = np.asarray(spec.dirichlet(er.x))
            for i in range(2):
                for j in range(2):
                    f0[sL(i, j)] += Ne.T @ (we * nrm[:, i] * ud[:, j])
            for j in range(2):
                f0[su(j)] += tau * (Ne.T @ (we * ud[:, j]))
            udn = np.einsum("pi,pi->p", ud, nrm)
            f0[sp_] += Ne.T @ (we * udn)
            compat_rhs -= float(we @ udn)
            continue
        Nh = face_trace_values(mesh, info.face, info.k_hat, er.t)
        m = info.k_hat + 1
        s0 = info.slot.start
        comp = [slice(s0 + j * m, s0 + (j + 1) * m) for j in range(2)]
        F = [Ne.T @ ((we * nrm[:, i])[:, None] * Nh) for i in range(2)]   # <N_a, n_i Nh_b>
        G = Ne.T @ (we[:, None] * Nh)
        Mh = Nh.T @ (we[:, None] * Nh)
        for j in range(2):
            for i in range(2):
                Bm[sL(i, j), comp[j]] += F[i]
                Q[comp[j], sL(i, j)] += nu * F[i].T
            Bm[su(j), comp[j]] += tau * G
            Bm[sp_, comp[j]] += F[j]
            Q[comp[j], su(j)] += tau * G.T
            Q[comp[j], sp_] += F[j].T
            tmass[comp[j], comp[j]] += tau * Mh
            compat[comp[j]] += Nh.T @ (we * nrm[:, j])
        if info.tag == NEUMANN:
            if spec.traction is None:
                raise DataError("Neumann face without traction data")
            tr = np.asarray(spec.traction(er.x_data, er.n_data))
            for j in range(2):
                gneu[comp[j]] -= Nh.T @ (we * tr[:, j])

    A = np.zeros((size, size))
    for i in range(2):
        for j in range(2):
            A[sL(i, j), sL(i, j)] = -M
            A[sL(i, j), su(j)] = C[i]
    for j in range(2):
        for i in range(2):
            A[su(j), sL(i, j)] = -nu * C[i] + nu * Bd[i]
        A[su(j), su(j)] = tau * E
        A[su(j), sp_] = -C[j] + Bd[j]
        A[sp_, su(j)] = C[j]
        f0[su(j)] += fs[j]
    A[sp_, 7 * n] = d
    A[7 * n, sp_] = d
    return LocalSystem(geom.element, k, n, list(edges), A, f0, Bm, Q, tmass, gneu,
                       compat, compat_rhs, dbnd)


@dataclass(eq=False)
class CondensedElement:
    """Element contribution to the global system and its recovery map.

    ``x = x0 + X @ [uhat_local; rho_e]``.
    """

    local: LocalSystem
    x0: np.ndarray
    X: np.ndarray
    K: np.ndarray
    rhs: np.ndarray


def condense(local: LocalSystem) -> CondensedElement:
    size = local.A.shape[0]
    rhs = np.zeros((size, local.n_trace + 2))
    rhs[:, 0] = local.f0
    rhs[:, 1:-1] = local.B
    rhs[-1, -1] = 1.0
    try:
        lu = sla.lu_factor(local.A, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SolverError(f"element {local.element}: local factorisation failed") from exc
    piv = np.abs(np.diag(lu[0]))
    if piv.min() <= 1e-13 * piv.max():
        cond = np.linalg.cond(local.A)
        raise SolverError(f"element {local.element}: singular local matrix "
                          f"(condition estimate {cond:.3e})")
    sol = sla.lu_solve(lu, rhs)
    x0, X = sol[:, 0], sol[:, 1:]
    K = local.Q @ X
    K[:, :-1] -= local.tau_mass
    return CondensedElement(local, x0, X, K, local.neumann_load - local.Q @ x0)


@dataclass
class DofMap:
    face_offset: np.ndarray      # -1 for Dirichlet faces
    face_degree: np.ndarray
    n_trace: int
    n_elements: int

    @property
    def size(self) -> int:
        return self.n_trace + self.n_elements

    def rho(self, e: int) -> int:
        return self.n_trace + e

    def face_dofs(self, f: int) -> np.ndarray:
        m = self.face_degree[f] + 1
        return self.face_offset[f] + np.arange(2 * m)


def build_dofmap(mesh: TriMesh, fdeg: np.ndarray) -> DofMap:
    offset = np.full(mesh.n_faces, -1, dtype=int)
    pos = 0
    for f in range(mesh.n_faces):
        if mesh.face_tag(f) == DIRICHLET:
            continue
        offset[f] = pos
        pos += 2 * (int(fdeg[f]) + 1)
    return DofMap(offset, fdeg, pos, mesh.n_elements)


def element_edges(mesh: TriMesh, e: int, fdeg: np.ndarray) -> list[EdgeInfo]:
    out, pos = [], 0
    for l in range(3):
        f = int(mesh.conn.element_faces[e, l])
        tag = mesh.face_tag(f)
        kh = int(fdeg[f])
        if tag == DIRICHLET:
            out.append(EdgeInfo(l, f, kh, tag, None))
        else:
            out.append(EdgeInfo(l, f, kh, tag, slice(pos, pos + 2 * (kh + 1))))
            pos += 2 * (kh + 1)
    return out


def local_to_global(dofs: DofMap, edges: Sequence[EdgeInfo]) -> np.ndarray:
    idx = [dofs.face_dofs(e.face) for e in edges if e.slot is not None]
    return np.concatenate(idx) if idx else np.zeros(0, dtype=int)


@dataclass(eq=False)
class GlobalSystem:
    K: sp.csr_matrix
    f: np.ndarray
    dofs: DofMap
    constraint_row: int | None


def assemble_global(mesh: TriMesh, dofs: DofMap, condensed: Sequence[CondensedElement],
                    pure_dirichlet: bool) -> GlobalSystem:
    """Sparse trace / mean-pressure system.

    Rows: weak flux balance per trace dof, one compatibility row per element.
    For pure Dirichlet problems the last element's compatibility row (linearly
    dependent on the others) is replaced by the zero-mean boundary pressure
    constraint.
    """
    rows, cols, vals = [], [], []
    f = np.zeros(dofs.size)
    ne = mesh.n_elements
    crow = dofs.rho(ne - 1) if pure_dirichlet else None
    constraint = np.zeros(dofs.size)
    constraint_rhs = 0.0
    for ce in condensed:
        loc = ce.local
        e = loc.element
        g = local_to_global(dofs, loc.edges)
        allc = np.concatenate([g, [dofs.rho(e)]])
        if g.size:
            rows.append(np.repeat(g, allc.size))
            cols.append(np.tile(allc, g.size))
            vals.append(ce.K.ravel())
            np.add.at(f, g, ce.rhs)
        if e != ne - 1 or not pure_dirichlet:
            if g.size:
                rows.append(np.full(g.size, dofs.rho(e)))
                cols.append(g)
                vals.append(loc.compat)
            f[dofs.rho(e)] += loc.compat_rhs
        if pure_dirichlet and np.any(loc.p_boundary):
            ps = _SLICES["p"](loc.n)
            row = loc.p_boundary @ ce.X[ps]
            np.add.at(constraint, allc, row)
            constraint_rhs -= float(loc.p_boundary @ ce.x0[ps])
    if pure_dirichlet:
        nz = np.flatnonzero(constraint)
        rows.append(np.full(nz.size, crow))
        cols.append(nz)
        vals.append(constraint[nz])
        f[crow] = constraint_rhs
    cat = lambda parts, dtype: np.concatenate(parts) if parts else np.zeros(0, dtype)
    K = sp.csr_matrix((cat(vals, float), (cat(rows, int), cat(cols, int))),
                      shape=(dofs.size, dofs.size))
    K.sum_duplicates()
    empty = np.flatnonzero(np.diff(K.indptr) == 0)
    if empty.size:
        raise SolverError(f"global system has empty rows {empty[:10].tolist()} "
                          "(missing pressure constraint?)")
    return GlobalSystem(K, f, dofs, crow)


@dataclass(eq=False)
class HdgSolution:
    """Elemental fields, traces and mean pressures of a solved problem."""

    mesh: TriMesh
    degrees: np.ndarray
    face_degree: np.ndarray
    geometry: list
    L: list            # per element (n, 2, 2): L[:, i, j]
    u: list            # per element (n, 2)
    p: list            # per element (n,)
    zeta: np.ndarray
    uhat: dict         # face -> (k_hat + 1, 2)
    rho: np.ndarray
    system: GlobalSystem | None = None
    residual: float = float("nan")
    spec: ProblemSpec | None = None
    tau: float = float("nan")

    @property
    def n_dofs(self) -> int:
        return 0 if self.system is None else self.system.dofs.size

    def fields_at(self, e: int, level: int):
        """Quadrature rule and (L, u, p, grad u) values on element ``e``."""
        geom = self.geometry[e]
        rule = geom.volume_rule(level)
        N, dN = geom.tabulate(int(self.degrees[e]), rule)
        L = np.einsum("pn,nij->pij", N, self.L[e])
        u = N @ self.u[e]
        p = N @ self.p[e]
        gu = np.einsum("pni,nj->pij", dN, self.u[e])
        return rule, L, u, p, gu


def _recover(ce: CondensedElement, dofs: DofMap, U: np.ndarray):
    loc = ce.local
    g = local_to_global(dofs, loc.edges)
    vec = np.concatenate([U[g], [U[dofs.rho(loc.element)]]])
    x = ce.x0 + ce.X @ vec
    n = loc.n
    L = np.stack([x[c * n:(c + 1) * n] for c in range(4)], axis=1).reshape(n, 2, 2)
    u = np.column_stack([x[4 * n:5 * n], x[5 * n:6 * n]])
    return L, u, x[6 * n:7 * n].copy(), float(x[7 * n])


def check_compatibility(spec: ProblemSpec, mesh: TriMesh,
                        geometry: Sequence[ElementGeometry] | None = None,
                        level: int = 6) -> float:
    """Boundary flux ``|<u_D . n, 1>|`` over the Dirichlet boundary.

    Raises :class:`DataError` for pure Dirichlet data whose residual exceeds
    ``1e-8 * diameter``.
    """
    if geometry is None:
        strategy = NEFEM if mesh.curved_faces() else iso_fixed(1)
        geometry = GeometryBackend(mesh, strategy).elements([1] * mesh.n_elements)
    total = 0.0
    fe = mesh.conn.face_elements
    for f, bf in mesh.boundary.items():
        if bf.tag != DIRICHLET:
            continue
        e, l = int(fe[f, 0]), int(mesh.conn.face_local[f, 0])
        er = geometry[e].edge_rule(l, level)
        ud = np.asarray(spec.dirichlet(er.x))
        total += float(er.w @ np.einsum("pi,pi->p", ud, er.normal))
    residual = abs(total)
    if spec.pure_dirichlet and residual > 1e-8 * mesh.domain_diameter:
        raise DataError(f"Dirichlet data violate the compatibility condition "
                        f"(net boundary flux {residual:.3e})")
    return residual


def discretise(mesh: TriMesh, spec: ProblemSpec, config: SolverConfig, degrees,
               backend: GeometryBackend | None = None):
    """Local systems and condensed pieces for all elements."""
    degrees = np.asarray(degrees, dtype=int)
    if degrees.shape != (mesh.n_elements,):
        raise ValueError("one degree per element is required")
    if degrees.min() < 1 or degrees.max() > ap.K_MAX:
        raise ValueError(f"degrees must lie in [1, {ap.K_MAX}]")
    if backend is None:
        backend = GeometryBackend(mesh, config.strategy)
    geometry = backend.elements(degrees)
    fdeg = face_degrees(mesh, degrees)
    dofs = build_dofmap(mesh, fdeg)
    tau = config.tau_value(spec, mesh)
    locals_ = [assemble_local(geometry[e], int(degrees[e]), element_edges(mesh, e, fdeg),
                              spec, tau) for e in range(mesh.n_elements)]
    return geometry, fdeg, dofs, tau, locals_


def solve(mesh: TriMesh, spec: ProblemSpec, config: SolverConfig, degrees,
          backend: GeometryBackend | None = None) -> HdgSolution:
    """Assemble, condense, solve the global system and recover element fields."""
    degrees = np.asarray(degrees, dtype=int)
    if spec.pure_dirichlet != mesh.pure_dirichlet:
        raise DataError("pure_dirichlet flag does not match the mesh boundary tags")
    geometry, fdeg, dofs, tau, locals_ = discretise(mesh, spec, config, degrees, backend)
    if config.check_data and spec.pure_dirichlet:
        check_compatibility(spec, mesh, geometry)
    condensed = [condense(loc) for loc in locals_]
    system = assemble_global(mesh, dofs, condensed, spec.pure_dirichlet)
    U = solve_sparse(system.K, system.f)
    res = float(np.linalg.norm(system.K @ U - system.f))
    fnorm = float(np.linalg.norm(system.f))
    if not np.isfinite(res) or res > 1e-9 * max(fnorm, 1e-300) and res > 1e-13:
        raise SolverError(f"global solve residual {res:.3e} exceeds tolerance "
                          f"(|f| = {fnorm:.3e})")
    Ls, us, ps, zetas = [], [], [], []
    for ce in condensed:
        L, u, p, z = _recover(ce, dofs, U)
        Ls.append(L)
        us.append(u)
        ps.append(p)
        zetas.append(z)
    uhat = {}
    fe = mesh.conn.face_elements
    for f in range(mesh.n_faces):
        if dofs.face_offset[f] >= 0:
            m = fdeg[f] + 1
            uhat[f] = U[dofs.face_dofs(f)].reshape(2, m).T
        else:
            e, l = int(fe[f, 0]), int(mesh.conn.face_local[f, 0])
            uhat[f] = _dirichlet_trace(mesh, geometry[e], l, f, int(fdeg[f]), spec)
    return HdgSolution(mesh, degrees, fdeg, geometry, Ls, us, ps, np.array(zetas), uhat,
                       U[dofs.n_trace:].copy(), system, res, spec, tau)


def _dirichlet_trace(mesh, geom, l, f, k_hat, spec) -> np.ndarray:
    """Interpolant of the Dirichlet data at the face nodes (least squares on the edge rule)."""
    er = geom.edge_rule(l, k_hat + 2)
    Nh = face_trace_values(mesh, f, k_hat, er.t)
    ud = np.asarray(spec.dirichlet(er.x))
    Mh = Nh.T @ (er.w[:, None] * Nh)
    return np.linalg.solve(Mh, Nh.T @ (er.w[:, None] * ud))


def solve_sparse(K: sp.spmatrix, f: np.ndarray) -> np.ndarray:
    try:
        lu = spla.splu(sp.csc_matrix(K))
    except RuntimeError as exc:
        raise SolverError(f"sparse factorisation failed: {exc}") from exc
    diag = np.abs(lu.U.diagonal())
    if diag.min() <= 1e-14 * diag.max():
        worst = int(np.argmin(diag))
        raise SolverError(f"global matrix is numerically singular (pivot {worst}: "
                          f"{diag[worst]:.3e}, max {diag.max():.3e})")
    return lu.solve(f)
