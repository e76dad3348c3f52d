"""Element geometry backends.

An element geometry provides what the discretisation needs from an element:
volume quadrature with tabulated bases, edge quadrature with outward normals,
and physical nodal coordinates.  Three strategies decide how curved
boundary elements are represented:

``iso-fixed:q``  polynomial geometry of degree ``q``, never changed;
``iso-regen``    polynomial geometry with ``q = k_e``, regenerated on the curve;
``nefem``        exact NURBS boundary with Cartesian bases.

Straight-sided elements are always affine.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from . import approximation as ap
from .errors import GeometryError
from .mesh import TriMesh
from .quadrature import gauss_segment, nefem_element_rule, nefem_face_rule, triangle_rule

_REF_VERTS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass(frozen=True)
class GeometryStrategy:
    kind: str
    q: int = 1

    def __post_init__(self):
        if self.kind not in ("iso-fixed", "iso-regen", "nefem"):
            raise ValueError(f"unknown geometry strategy {self.kind!r}")
        if self.q < 1:
            raise ValueError("geometric degree must be >= 1")

    @classmethod
    def parse(cls, text: str) -> "GeometryStrategy":
        name, _, q = text.partition(":")
        return cls(name, int(q) if q else 1)

    def __str__(self) -> str:
        return f"{self.kind}:{self.q}" if self.kind == "iso-fixed" else self.kind


ISO_REGEN = GeometryStrategy("iso-regen")
NEFEM = GeometryStrategy("nefem")


def iso_fixed(q: int) -> GeometryStrategy:
    return GeometryStrategy("iso-fixed", q)


@dataclass(frozen=True, eq=False)
class VolumeRule:
    x: np.ndarray
    w: np.ndarray
    ref: np.ndarray | None = None
    jinv: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class EdgeRule:
    """Quadrature on a local edge; ``t`` is the face coordinate in [0, 1].

    ``x_data``/``n_data`` are where boundary data attached to the exact
    boundary is sampled; they differ from ``x``/``normal`` only on curved faces
    approximated by polynomials.
    """

    t: np.ndarray
    x: np.ndarray
    w: np.ndarray
    normal: np.ndarray
    x_data: np.ndarray
    n_data: np.ndarray
    ref: np.ndarray | None = None


def _outward(tangent: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    speed = np.linalg.norm(tangent, axis=1)
    return np.column_stack([tangent[:, 1], -tangent[:, 0]]) / speed[:, None], speed


class ElementGeometry:
    """Common interface; see :class:`IsoElement` and :class:`NefemElement`."""

    mesh: TriMesh
    element: int

    def __init__(self, mesh: TriMesh, element: int):
        self.mesh = mesh
        self.element = element
        self.vertices = mesh.vertices[mesh.elements[element]]
        self._cache: dict = {}

    def _cached(self, key, make):
        v = self._cache.get(key)
        if v is None:
            v = self._cache[key] = make()
        return v

    def orientation(self, l: int) -> int:
        return self.mesh.edge_orientation(self.element, l)

    def interval(self, l: int):
        bf = self.mesh.boundary.get(int(self.mesh.conn.element_faces[self.element, l]))
        return None if bf is None else bf.interval

    def area(self) -> float:
        return float(self.volume_rule(2).w.sum())

    def tabulate(self, k: int, rule: VolumeRule) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def volume_rule(self, level: int) -> VolumeRule:
        raise NotImplementedError

    def edge_rule(self, l: int, level: int) -> EdgeRule:
        raise NotImplementedError

    def tabulate_edge(self, k: int, edge: EdgeRule) -> np.ndarray:
        raise NotImplementedError

    def nodes(self, k: int) -> np.ndarray:
        raise NotImplementedError

    def _data_on_curve(self, l: int, t: np.ndarray, x: np.ndarray, normal: np.ndarray):
        iv = self.interval(l)
        if iv is None:
            return x, normal
        curve = self.mesh.curves[iv.curve_id]
        xc, dc = curve.point_and_tangent(iv.at(t))
        n, _ = _outward(dc * self.orientation(l))
        return xc, n


class IsoElement(ElementGeometry):
    """Element mapped from the reference triangle by degree-``q`` geometry nodes."""

    def __init__(self, mesh: TriMesh, element: int, geom_nodes: np.ndarray, q: int):
        super().__init__(mesh, element)
        self.q = q
        self.geom_nodes = np.asarray(geom_nodes, dtype=float)
        self.geom_nodes.setflags(write=False)

    def _extra(self) -> int:
        return 3 * (self.q - 1)

    def map(self, ref):
        return ap.isoparametric_map(self.geom_nodes, self.q, ref)

    def volume_rule(self, level: int) -> VolumeRule:
        def make():
            r = triangle_rule(2 * level + 1 + self._extra())
            x, J = self.map(r.points)
            det = np.linalg.det(J)
            return VolumeRule(x, r.weights * det, r.points, np.linalg.inv(J))
        return self._cached(("vol", level), make)

    def tabulate(self, k: int, rule: VolumeRule):
        def make():
            V, G = ap.reference_basis(k)(rule.ref)
            return V, np.einsum("pnb,pba->pna", G, rule.jinv)
        return self._cached(("tab", k, id(rule)), make)

    def edge_rule(self, l: int, level: int) -> EdgeRule:
        def make():
            g = gauss_segment(level + 2 + self.q - 1)
            t = g.points
            te = t if self.orientation(l) > 0 else 1.0 - t
            va, vb = _REF_VERTS[l], _REF_VERTS[(l + 1) % 3]
            ref = np.outer(1.0 - te, va) + np.outer(te, vb)
            x, J = self.map(ref)
            tangent = J @ (vb - va)
            n, speed = _outward(tangent)
            xd, nd = self._data_on_curve(l, t, x, n)
            return EdgeRule(t, x, g.weights * speed, n, xd, nd, ref)
        return self._cached(("edge", l, level), make)

    def tabulate_edge(self, k: int, edge: EdgeRule) -> np.ndarray:
        return self._cached(("tabe", k, id(edge)),
                            lambda: ap.reference_basis(k).values(edge.ref))

    def nodes(self, k: int) -> np.ndarray:
        return self._cached(("nodes", k),
                            lambda: self.map(ap.warp_blend_nodes(k))[0])

    def basis(self, k: int) -> ap.NodalBasis:
        return ap.reference_basis(k)


class NefemElement(ElementGeometry):
    """Element with one edge on the exact NURBS boundary."""

    def __init__(self, mesh: TriMesh, element: int, chart: ap.NefemElementChart):
        super().__init__(mesh, element)
        self.chart = chart

    def basis(self, k: int) -> ap.NodalBasis:
        return self._cached(("basis", k), lambda: ap.nefem_basis(self.chart, k))

    def volume_rule(self, level: int) -> VolumeRule:
        def make():
            r = nefem_element_rule(self.chart, level)
            return VolumeRule(r.points, r.weights)
        return self._cached(("vol", level), make)

    def tabulate(self, k: int, rule: VolumeRule):
        return self._cached(("tab", k, id(rule)), lambda: self.basis(k)(rule.x))

    def edge_rule(self, l: int, level: int) -> EdgeRule:
        def make():
            iv = self.interval(l)
            if iv is not None and l == self.chart.local_edge:
                r = nefem_face_rule(self.chart.curve, iv, level)
                t = (r.params - iv.lambda_a) / iv.length
                n, _ = _outward(r.tangents * self.orientation(l))
                return EdgeRule(t, r.points, r.weights, n, r.points, n)
            g = gauss_segment(level + 2)
            t = g.points
            te = t if self.orientation(l) > 0 else 1.0 - t
            a, b = self.vertices[l], self.vertices[(l + 1) % 3]
            x = np.outer(1.0 - te, a) + np.outer(te, b)
            n, speed = _outward(np.tile(b - a, (t.size, 1)))
            return EdgeRule(t, x, g.weights * speed, n, x, n)
        return self._cached(("edge", l, level), make)

    def tabulate_edge(self, k: int, edge: EdgeRule) -> np.ndarray:
        return self._cached(("tabe", k, id(edge)), lambda: self.basis(k).values(edge.x))

    def nodes(self, k: int) -> np.ndarray:
        return self.basis(k).nodes


# -- geometry node generation --------------------------------------------------------

def project_to_curve(curve, lam_lo: float, lam_hi: float, point: np.ndarray) -> float:
    """Parameter of the closest curve point to ``point`` within ``[lam_lo, lam_hi]``."""
    lo, hi = min(lam_lo, lam_hi), max(lam_lo, lam_hi)

    def g(lam):
        c, dc = curve.point_and_tangent(lam)
        return float(np.dot(dc[0], c[0] - point))

    ga, gb = g(lo), g(hi)
    if ga == 0.0:
        return lo
    if gb == 0.0:
        return hi
    if ga * gb > 0:
        raise GeometryError(
            f"cannot bracket the projection of {point.tolist()} on [{lo}, {hi}]")
    return brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def curved_element_nodes(mesh: TriMesh, e: int, q: int) -> np.ndarray:
    """Degree-``q`` geometry nodes of an element with one curved edge.

    Nodes on the curved edge are the closest-point projections of the
    corresponding chord points; the remaining nodes are blended linearly
    towards the opposite vertex.
    """
    edges = mesh.curved_local_edges(e)
    verts = mesh.vertices[mesh.elements[e]]
    if not edges or q == 1:
        return ap.affine_nodes(verts, q)
    if len(edges) > 1:
        raise GeometryError(f"element {e} has more than one curved edge")
    l = edges[0]
    f = int(mesh.conn.element_faces[e, l])
    iv = mesh.boundary[f].interval
    curve = mesh.curves[iv.curve_id]
    if mesh.edge_orientation(e, l) > 0:
        lam_A, lam_B = iv.lambda_a, iv.lambda_b
    else:
        lam_A, lam_B = iv.lambda_b, iv.lambda_a
    A, B, I = verts[l], verts[(l + 1) % 3], verts[(l + 2) % 3]
    bary = ap.barycentric(ap.warp_blend_nodes(q))
    bA, bB, bI = bary[:, l], bary[:, (l + 1) % 3], bary[:, (l + 2) % 3]
    out = np.empty((bary.shape[0], 2))
    memo: dict[float, np.ndarray] = {}
    for i in range(bary.shape[0]):
        tot = bA[i] + bB[i]
        if tot < 1e-14:
            out[i] = I
            continue
        s = round(float(bB[i] / tot), 14)
        if s not in memo:
            if s <= 0.0:
                memo[s] = A
            elif s >= 1.0:
                memo[s] = B
            else:
                chord = (1 - s) * A + s * B
                memo[s] = curve(project_to_curve(curve, lam_A, lam_B, chord))
        out[i] = tot * memo[s] + bI[i] * I
    return out


def element_chart(mesh: TriMesh, e: int) -> ap.NefemElementChart:
    edges = mesh.curved_local_edges(e)
    if len(edges) != 1:
        raise GeometryError(f"element {e} needs exactly one curved edge for a NEFEM chart")
    l = edges[0]
    iv = mesh.boundary[int(mesh.conn.element_faces[e, l])].interval
    return ap.make_chart(e, mesh.vertices[mesh.elements[e]], l, mesh.curves[iv.curve_id],
                         iv, mesh.edge_orientation(e, l))


class GeometryBackend:
    """Per-element geometry for a mesh under one strategy.

    Element geometries are cached; ``elements(degrees)`` returns the list of
    element geometries matching a degree map (only ``iso-regen`` depends on
    the degrees).
    """

    def __init__(self, mesh: TriMesh, strategy: GeometryStrategy):
        self.mesh = mesh
        self.strategy = strategy
        self._straight: dict[int, IsoElement] = {}
        self._curved: dict[tuple[int, int], ElementGeometry] = {}
        self.curved = np.array([bool(mesh.curved_local_edges(e))
                                for e in range(mesh.n_elements)])

    def geometric_degree(self, e: int, k: int) -> int:
        if not self.curved[e]:
            return 1
        if self.strategy.kind == "iso-fixed":
            return self.strategy.q
        if self.strategy.kind == "iso-regen":
            return k
        return 0

    def element(self, e: int, k: int) -> ElementGeometry:
        if not self.curved[e]:
            g = self._straight.get(e)
            if g is None:
                g = self._straight[e] = IsoElement(
                    self.mesh, e, self.mesh.vertices[self.mesh.elements[e]], 1)
            return g
        q = self.geometric_degree(e, k)
        key = (e, q)
        g = self._curved.get(key)
        if g is None:
            if self.strategy.kind == "nefem":
                g = NefemElement(self.mesh, e, element_chart(self.mesh, e))
            else:
                g = IsoElement(self.mesh, e, curved_element_nodes(self.mesh, e, q), q)
            self._curved[key] = g
        return g

    def elements(self, degrees: Sequence[int]) -> list[ElementGeometry]:
        return [self.element(e, int(k)) for e, k in enumerate(degrees)]
