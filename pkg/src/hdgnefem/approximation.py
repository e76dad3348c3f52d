"""Polynomial bases and element mappings.

Reference triangle: vertices (0, 0), (1, 0), (0, 1).  Barycentric
coordinates of a reference point ``(xi, eta)`` are ``(1 - xi - eta, xi, eta)``
and refer to local vertices 0, 1, 2.

Two families of Lagrange bases are provided:

* reference bases (isoparametric elements): orthonormal Dubiner modes on the
  reference triangle, inverted at warp-and-blend nodes;
* physical bases (NEFEM elements): tensor Legendre modes of total degree
  ``k`` scaled to the element bounding box, inverted at a physical nodal set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import eval_jacobi, gammaln

from .errors import BasisError, GeometryError
from .nurbs import NurbsCurve, ParamInterval

K_MAX = 8
VANDERMONDE_COND_MAX = 1e12

# optimised blending parameters of the warp-and-blend construction
_ALPHA_OPT = (0.0000, 0.0000, 1.4152, 0.1001, 0.2751, 0.9800, 1.0999, 1.2832,
              1.3648, 1.4773, 1.4959, 1.5743, 1.5770, 1.6223, 1.6258)


def n_nodes(k: int) -> int:
    return (k + 1) * (k + 2) // 2


# -- 1D polynomials ------------------------------------------------------------

def jacobi_normalized(x, n: int, alpha: float, beta: float):
    """Jacobi polynomial normalised to unit norm w.r.t. its weight on [-1, 1]."""
    logh = ((alpha + beta + 1) * math.log(2.0) - math.log(2 * n + alpha + beta + 1)
            + gammaln(n + alpha + 1) + gammaln(n + beta + 1)
            - gammaln(n + alpha + beta + 1) - gammaln(n + 1))
    return eval_jacobi(n, alpha, beta, x) / math.exp(0.5 * logh)


def jacobi_normalized_deriv(x, n: int, alpha: float, beta: float):
    if n == 0:
        return np.zeros_like(np.asarray(x, dtype=float))
    return math.sqrt(n * (n + alpha + beta + 1)) * jacobi_normalized(x, n - 1, alpha + 1, beta + 1)


@lru_cache(maxsize=None)
def gll_points(k: int) -> np.ndarray:
    """Gauss-Lobatto-Legendre points on [-1, 1] (``k + 1`` points)."""
    if k < 1:
        raise ValueError("GLL rule needs k >= 1")
    inner = np.polynomial.legendre.Legendre.basis(k).deriv().roots()
    pts = np.concatenate([[-1.0], np.sort(inner.real), [1.0]])
    pts.setflags(write=False)
    return pts


# -- nodal distributions ---------------------------------------------------------

def _warp_factor(k: int, rout: np.ndarray) -> np.ndarray:
    lgl = gll_points(k)
    req = np.linspace(-1.0, 1.0, k + 1)
    veq = np.column_stack([jacobi_normalized(req, i, 0, 0) for i in range(k + 1)])
    pmat = np.vstack([jacobi_normalized(rout, i, 0, 0) for i in range(k + 1)])
    lmat = np.linalg.solve(veq.T, pmat)
    warp = lmat.T @ (lgl - req)
    zerof = (np.abs(rout) < 1.0 - 1e-10).astype(float)
    sf = 1.0 - (zerof * rout) ** 2
    return warp / sf + warp * (zerof - 1.0)


@lru_cache(maxsize=None)
def warp_blend_nodes(k: int) -> np.ndarray:
    """Warp-and-blend nodes of degree ``k`` on the reference triangle."""
    nodes, order = _warp_blend_lattice(k)
    nodes = nodes[order]
    nodes.setflags(write=False)
    return nodes


@lru_cache(maxsize=None)
def _warp_blend_lattice(k: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes in lattice order ``(n, m)`` and the permutation to canonical order."""
    if k < 1:
        raise ValueError("nodal degree must be >= 1")
    if k == 1:
        return np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]), np.array([0, 2, 1])
    alpha = _ALPHA_OPT[k - 1] if k <= len(_ALPHA_OPT) else 5.0 / 3.0
    l1, l3 = [], []
    for n in range(k + 1):
        for m in range(k + 1 - n):
            l1.append(n / k)
            l3.append(m / k)
    L1, L3 = np.array(l1), np.array(l3)
    L2 = 1.0 - L1 - L3
    x = -L2 + L3
    y = (-L2 - L3 + 2.0 * L1) / math.sqrt(3.0)
    blend1, blend2, blend3 = 4 * L2 * L3, 4 * L1 * L3, 4 * L1 * L2
    w1 = blend1 * _warp_factor(k, L3 - L2) * (1 + (alpha * L1) ** 2)
    w2 = blend2 * _warp_factor(k, L1 - L3) * (1 + (alpha * L2) ** 2)
    w3 = blend3 * _warp_factor(k, L2 - L1) * (1 + (alpha * L3) ** 2)
    x = x + w1 + math.cos(2 * math.pi / 3) * w2 + math.cos(4 * math.pi / 3) * w3
    y = y + math.sin(2 * math.pi / 3) * w2 + math.sin(4 * math.pi / 3) * w3
    # equilateral -> barycentric -> unit reference triangle
    b1 = (math.sqrt(3.0) * y + 1.0) / 3.0
    b2 = (-3.0 * x - math.sqrt(3.0) * y + 2.0) / 6.0
    b3 = (3.0 * x - math.sqrt(3.0) * y + 2.0) / 6.0
    r, s = -b2 + b3 - b1, -b2 - b3 + b1
    nodes = np.column_stack([(r + 1) / 2, (s + 1) / 2])
    nodes[np.abs(nodes) < 1e-14] = 0.0
    # vertices first, then edge nodes along local edges 0, 1, 2, then interior
    order = _canonical_order(barycentric(nodes), k)
    return nodes, order


@lru_cache(maxsize=None)
def lattice_triangles(k: int) -> np.ndarray:
    """Counter-clockwise sub-triangles of the degree-``k`` nodal set (node indices)."""
    nodes, order = _warp_blend_lattice(k)
    canon = np.empty_like(order)
    canon[order] = np.arange(order.size)
    idx, pos = {}, 0
    for n in range(k + 1):
        for m in range(k + 1 - n):
            idx[n, m] = pos
            pos += 1
    tris = []
    for n in range(k):
        for m in range(k - n):
            tris.append((idx[n, m], idx[n + 1, m], idx[n, m + 1]))
            if n + m < k - 1:
                tris.append((idx[n + 1, m], idx[n + 1, m + 1], idx[n, m + 1]))
    tris = np.array(tris)
    p = nodes[tris]
    area = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
            - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    tris[area < 0] = tris[area < 0][:, [0, 2, 1]]
    out = canon[tris]
    out.setflags(write=False)
    return out


def barycentric(ref_points: np.ndarray) -> np.ndarray:
    p = np.atleast_2d(ref_points)
    return np.column_stack([1.0 - p[:, 0] - p[:, 1], p[:, 0], p[:, 1]])


def _canonical_order(bary: np.ndarray, k: int) -> np.ndarray:
    tol = 1e-10
    on = bary < tol
    verts = [int(np.argmax(bary[:, i])) for i in range(3)]
    order = list(verts)
    for l in range(3):
        opp = (l + 2) % 3
        # edge l joins vertex l and l+1; coordinate of vertex l+1 increases
        idx = [i for i in np.flatnonzero(on[:, opp]) if i not in verts]
        idx.sort(key=lambda i: bary[i, (l + 1) % 3])
        order += idx
    order += [i for i in range(bary.shape[0]) if not on[i].any()]
    if len(order) != n_nodes(k):
        raise AssertionError("nodal set classification failed")
    return np.array(order)


def edge_node_indices(k: int, l: int) -> np.ndarray:
    """Indices of the ``k + 1`` nodes on local edge ``l`` ordered from vertex l."""
    inner = np.arange(3 + l * (k - 1), 3 + (l + 1) * (k - 1))
    return np.concatenate([[l], inner, [(l + 1) % 3]])


# -- modal families -----------------------------------------------------------------

def dubiner(k: int, ref_points) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal Dubiner modes and reference gradients, shapes (np, n), (np, n, 2)."""
    p = np.atleast_2d(np.asarray(ref_points, dtype=float))
    r, s = 2 * p[:, 0] - 1, 2 * p[:, 1] - 1
    denom = 1.0 - s
    safe = np.abs(denom) > 1e-14
    a = np.where(safe, 2 * (1 + r) / np.where(safe, denom, 1.0) - 1, -1.0)
    b = s
    vals, gr, gs = [], [], []
    for i in range(k + 1):
        fa = jacobi_normalized(a, i, 0, 0)
        dfa = jacobi_normalized_deriv(a, i, 0, 0)
        for j in range(k + 1 - i):
            gb = jacobi_normalized(b, j, 2 * i + 1, 0)
            dgb = jacobi_normalized_deriv(b, j, 2 * i + 1, 0)
            hb = 0.5 * (1 - b)
            vals.append(math.sqrt(2.0) * fa * gb * (2 * hb) ** i)
            dr = dfa * gb * (hb ** (i - 1) if i > 0 else 1.0)
            ds = dfa * gb * 0.5 * (1 + a) * (hb ** (i - 1) if i > 0 else 1.0)
            tmp = dgb * hb ** i
            if i > 0:
                tmp = tmp - 0.5 * i * gb * hb ** (i - 1)
            ds = ds + fa * tmp
            scale = 2.0 ** (i + 0.5)
            # d/dxi = 2 d/dr
            gr.append(2 * scale * dr)
            gs.append(2 * scale * ds)
    V = np.column_stack(vals)
    G = np.stack([np.column_stack(gr), np.column_stack(gs)], axis=2)
    return V, G


@dataclass(frozen=True, eq=False)
class ScaledLegendre:
    """Tensor Legendre modes ``P_a(X) P_b(Y)``, ``a + b <= k``, on a bounding box."""

    k: int
    center: np.ndarray
    half: np.ndarray

    @classmethod
    def for_points(cls, k: int, points: np.ndarray) -> "ScaledLegendre":
        lo, hi = points.min(axis=0), points.max(axis=0)
        return cls(k, 0.5 * (lo + hi), 0.5 * (hi - lo))

    def __call__(self, points) -> tuple[np.ndarray, np.ndarray]:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        X = (p[:, 0] - self.center[0]) / self.half[0]
        Y = (p[:, 1] - self.center[1]) / self.half[1]
        px = [jacobi_normalized(X, a, 0, 0) for a in range(self.k + 1)]
        py = [jacobi_normalized(Y, b, 0, 0) for b in range(self.k + 1)]
        dpx = [jacobi_normalized_deriv(X, a, 0, 0) / self.half[0] for a in range(self.k + 1)]
        dpy = [jacobi_normalized_deriv(Y, b, 0, 0) / self.half[1] for b in range(self.k + 1)]
        vals, gx, gy = [], [], []
        for a in range(self.k + 1):
            for b in range(self.k + 1 - a):
                vals.append(px[a] * py[b])
                gx.append(dpx[a] * py[b])
                gy.append(px[a] * dpy[b])
        V = np.column_stack(vals)
        G = np.stack([np.column_stack(gx), np.column_stack(gy)], axis=2)
        return V, G


# -- nodal bases ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NodalBasis:
    """Lagrange basis of total degree ``k`` through ``nodes``.

    ``physical`` tells whether nodes and evaluation points are Cartesian
    coordinates (NEFEM) or reference coordinates (isoparametric).
    """

    k: int
    nodes: np.ndarray
    modes: object
    vinv: np.ndarray
    cond: float
    physical: bool

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    def __call__(self, points) -> tuple[np.ndarray, np.ndarray]:
        V, G = self.modes(points)
        return V @ self.vinv, np.einsum("pmd,mn->pnd", G, self.vinv)

    def values(self, points) -> np.ndarray:
        return self.modes(points)[0] @ self.vinv

    def interpolate(self, func) -> np.ndarray:
        """Nodal coefficients of ``func`` evaluated at the nodes."""
        return np.asarray(func(self.nodes))


def _nodal_basis(k, nodes, modes, physical, what) -> NodalBasis:
    V, _ = modes(nodes)
    if V.shape[0] != V.shape[1]:
        raise BasisError(f"{what}: need {V.shape[1]} nodes, got {V.shape[0]}")
    cond = float(np.linalg.cond(V))
    if not np.isfinite(cond) or cond > VANDERMONDE_COND_MAX:
        raise BasisError(f"{what}: Vandermonde condition number {cond:.3e} "
                         "(clustered or degenerate nodal set)")
    return NodalBasis(k, np.asarray(nodes, dtype=float), modes, np.linalg.inv(V), cond, physical)


@lru_cache(maxsize=None)
def reference_basis(k: int) -> NodalBasis:
    if not 1 <= k <= K_MAX:
        raise ValueError(f"degree must be in [1, {K_MAX}], got {k}")
    return _nodal_basis(k, warp_blend_nodes(k), lambda p: dubiner(k, p), False,
                        f"reference basis k={k}")


def reference_shape_functions(k: int, point) -> tuple[np.ndarray, np.ndarray]:
    """Values (n_en,) and reference gradients (n_en, 2) at one reference point."""
    pt = np.asarray(point, dtype=float).reshape(1, 2)
    b = barycentric(pt)[0]
    if np.any(b < -1e-12):
        raise GeometryError(f"point {pt[0].tolist()} outside the reference triangle")
    V, G = reference_basis(k)(pt)
    return V[0], G[0]


def physical_basis(nodes: np.ndarray, k: int) -> NodalBasis:
    """Cartesian Lagrange basis of total degree ``k`` through physical ``nodes``."""
    nodes = np.asarray(nodes, dtype=float)
    if nodes.shape[0] != n_nodes(k):
        raise BasisError(f"physical basis k={k} needs {n_nodes(k)} nodes, got {nodes.shape[0]}")
    modes = ScaledLegendre.for_points(k, nodes)
    return _nodal_basis(k, nodes, modes, True, f"physical basis k={k}")


@dataclass(frozen=True, eq=False)
class NodalBasis1D:
    """Lagrange basis on ``[a, b]`` through Gauss-Lobatto nodes."""

    k: int
    a: float
    b: float
    nodes: np.ndarray
    vinv: np.ndarray

    def _modes(self, s):
        X = 2 * (np.asarray(s, dtype=float) - self.a) / (self.b - self.a) - 1
        V = np.column_stack([jacobi_normalized(X, i, 0, 0) for i in range(self.k + 1)])
        D = np.column_stack([jacobi_normalized_deriv(X, i, 0, 0) for i in range(self.k + 1)])
        return V, D * 2 / (self.b - self.a)

    def __call__(self, s) -> np.ndarray:
        return self._modes(np.atleast_1d(s))[0] @ self.vinv

    def derivatives(self, s) -> np.ndarray:
        return self._modes(np.atleast_1d(s))[1] @ self.vinv


@lru_cache(maxsize=None)
def _segment_basis(k: int, a: float, b: float) -> NodalBasis1D:
    if k < 1:
        raise ValueError("trace degree must be >= 1")
    nodes = a + 0.5 * (gll_points(k) + 1) * (b - a)
    X = gll_points(k)
    V = np.column_stack([jacobi_normalized(X, i, 0, 0) for i in range(k + 1)])
    nodes.setflags(write=False)
    return NodalBasis1D(k, a, b, nodes, np.linalg.inv(V))


def trace_basis(k_hat: int, interval: ParamInterval | None = None) -> NodalBasis1D:
    """Face basis on the curve-parameter interval (curved face) or on [0, 1]."""
    if interval is None:
        return _segment_basis(k_hat, 0.0, 1.0)
    return _segment_basis(k_hat, float(interval.lambda_a), float(interval.lambda_b))


# -- isoparametric mapping ------------------------------------------------------------

def isoparametric_map(geom_nodes: np.ndarray, q: int, ref_points) -> tuple[np.ndarray, np.ndarray]:
    """Physical points and Jacobians ``J[p, a, b] = d x_a / d xi_b``."""
    pts = np.atleast_2d(np.asarray(ref_points, dtype=float))
    V, G = reference_basis(q)(pts)
    x = V @ geom_nodes
    J = np.einsum("pnb,na->pab", G, geom_nodes)
    det = np.linalg.det(J)
    if np.any(det <= 0):
        raise GeometryError("isoparametric map is inverted (non-positive Jacobian)")
    return x, J


def affine_nodes(vertices: np.ndarray, k: int) -> np.ndarray:
    return barycentric(warp_blend_nodes(k)) @ vertices


# -- NEFEM chart ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NefemElementChart:
    """Map from ``[lambda_a, lambda_b] x [0, 1]`` onto an element with one curved edge.

    ``x = (1 - l2) C(l1) + l2 x_I``.  ``orientation`` is +1 when the element
    traverses its curved edge with increasing curve parameter.
    """

    element: int
    curve: NurbsCurve
    interval: ParamInterval
    interior_vertex: np.ndarray
    local_edge: int
    orientation: int
    cond_estimate: float = field(default=float("nan"))

    def map(self, lam1, lam2) -> tuple[np.ndarray, np.ndarray]:
        lam1 = np.atleast_1d(np.asarray(lam1, dtype=float))
        lam2 = np.atleast_1d(np.asarray(lam2, dtype=float))
        lam1, lam2 = np.broadcast_arrays(lam1, lam2)
        c, dc = self.curve.point_and_tangent(lam1.ravel())
        l2 = lam2.ravel()[:, None]
        x = (1 - l2) * c + l2 * self.interior_vertex
        J = np.empty((x.shape[0], 2, 2))
        J[:, :, 0] = (1 - l2) * dc
        J[:, :, 1] = self.interior_vertex - c
        return x, J

    def from_reference(self, ref_points) -> tuple[np.ndarray, np.ndarray]:
        """Rectangle coordinates (lambda1, lambda2) of reference-triangle points."""
        bary = barycentric(ref_points)
        l = self.local_edge
        bA, bB, bI = bary[:, l], bary[:, (l + 1) % 3], bary[:, (l + 2) % 3]
        tot = bA + bB
        s = np.where(tot > 1e-14, bB / np.where(tot > 1e-14, tot, 1.0), 0.5)
        if self.orientation > 0:
            lam_A, lam_B = self.interval.lambda_a, self.interval.lambda_b
        else:
            lam_A, lam_B = self.interval.lambda_b, self.interval.lambda_a
        return lam_A + s * (lam_B - lam_A), bI


def nefem_map(chart: NefemElementChart, lam1, lam2) -> tuple[np.ndarray, np.ndarray]:
    return chart.map(lam1, lam2)


def make_chart(element: int, vertices: np.ndarray, local_edge: int, curve: NurbsCurve,
               interval: ParamInterval, orientation: int) -> NefemElementChart:
    """Chart of an element whose local edge ``local_edge`` lies on ``curve``."""
    xi = vertices[(local_edge + 2) % 3]
    chart = NefemElementChart(element, curve, interval, np.asarray(xi, dtype=float),
                              local_edge, orientation)
    # positivity of the Jacobian on a probing grid
    g = np.linspace(0.0, 1.0, 9)
    l1 = interval.at(g)
    L1, L2 = np.meshgrid(l1, np.linspace(0.0, 0.95, 6), indexing="ij")
    _, J = chart.map(L1.ravel(), L2.ravel())
    det = np.linalg.det(J) * orientation
    if np.any(det <= 0):
        raise GeometryError(f"element {element}: NEFEM chart has non-positive Jacobian")
    return chart


def nefem_nodal_set(chart: NefemElementChart, k: int) -> np.ndarray:
    """Warp-and-blend nodes transplanted to the chart rectangle and mapped."""
    l1, l2 = chart.from_reference(warp_blend_nodes(k))
    x, _ = chart.map(l1, l2)
    return x


def nefem_basis(chart: NefemElementChart, k: int) -> NodalBasis:
    return physical_basis(nefem_nodal_set(chart, k), k)
