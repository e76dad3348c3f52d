"""Triangular meshes with face connectivity and curved boundary edges.

Local edge ``l`` of an element runs from its vertex ``l`` to vertex
``(l + 1) % 3``; with counter-clockwise elements the outward normal of a
traversed edge with tangent ``(tx, ty)`` is ``(ty, -tx)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import GeometryError, TopologyError
from .nurbs import NurbsCurve, ParamInterval, check_interval

DIRICHLET = 1
NEUMANN = 2
_TAGS = {DIRICHLET: "Dirichlet", NEUMANN: "Neumann"}


@dataclass(frozen=True)
class BoundaryFace:
    """Boundary condition tag and, for curved faces, the curve interval.

    For curved faces the face's first vertex is ``C(lambda_a)``.
    """

    tag: int
    interval: ParamInterval | None = None

    @property
    def curved(self) -> bool:
        return self.interval is not None


@dataclass(frozen=True, eq=False)
class Connectivity:
    faces: np.ndarray          # (nf, 2) oriented vertex pairs
    face_elements: np.ndarray  # (nf, 2) left/right element, -1 if none
    face_local: np.ndarray     # (nf, 2) local edge in left/right element
    element_faces: np.ndarray  # (ne, 3) face of each local edge

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    @property
    def interior(self) -> np.ndarray:
        return self.face_elements[:, 1] >= 0


def signed_areas(vertices: np.ndarray, elements: np.ndarray) -> np.ndarray:
    a, b, c = (vertices[elements[:, i]] for i in range(3))
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                  - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def build_connectivity(elements, boundary_orientation=None) -> Connectivity:
    """Faces in order of first appearance over elements and local edges.

    ``boundary_orientation`` optionally maps a sorted vertex pair to the
    preferred ``(v_start, v_end)`` orientation of a boundary face.
    """
    elements = np.asarray(elements, dtype=int)
    ne = elements.shape[0]
    lookup: dict[tuple[int, int], int] = {}
    faces, fel, floc = [], [], []
    element_faces = np.empty((ne, 3), dtype=int)
    for e in range(ne):
        for l in range(3):
            a, b = int(elements[e, l]), int(elements[e, (l + 1) % 3])
            key = (a, b) if a < b else (b, a)
            f = lookup.get(key)
            if f is None:
                f = len(faces)
                lookup[key] = f
                faces.append([a, b])
                fel.append([e, -1])
                floc.append([l, -1])
            else:
                if fel[f][1] >= 0:
                    raise TopologyError(
                        f"edge {key} shared by three or more elements "
                        f"({fel[f][0]}, {fel[f][1]}, {e})")
                if faces[f] == [a, b]:
                    raise TopologyError(
                        f"elements {fel[f][0]} and {e} traverse edge {key} in the same "
                        "direction (inconsistent orientation)")
                fel[f][1] = e
                floc[f][1] = l
            element_faces[e, l] = f
    faces = np.array(faces, dtype=int).reshape(-1, 2)
    if boundary_orientation:
        for f in range(faces.shape[0]):
            if fel[f][1] < 0:
                a, b = faces[f]
                key = (a, b) if a < b else (b, a)
                if key in boundary_orientation:
                    faces[f] = boundary_orientation[key]
    return Connectivity(faces, np.array(fel, dtype=int).reshape(-1, 2),
                        np.array(floc, dtype=int).reshape(-1, 2), element_faces)


class TriMesh:
    """Immutable triangulation with boundary tags and curved boundary faces."""

    def __init__(self, vertices, elements, boundary: Sequence[tuple],
                 curves: Sequence[NurbsCurve] = (), parent=None):
        self.vertices = np.array(vertices, dtype=float).reshape(-1, 2)
        self.elements = np.array(elements, dtype=int).reshape(-1, 3)
        self.curves = tuple(curves)
        self.parent = None if parent is None else np.asarray(parent, dtype=int)
        areas = signed_areas(self.vertices, self.elements)
        bad = np.flatnonzero(areas <= 0)
        if bad.size:
            raise GeometryError(f"elements {bad.tolist()} are not counter-clockwise "
                                "or have zero area")
        orient, entries = {}, {}
        for item in boundary:
            vs, ve, tag = int(item[0]), int(item[1]), int(item[2])
            interval = item[3] if len(item) > 3 else None
            if tag not in _TAGS:
                raise ValueError(f"unknown boundary tag {tag}")
            key = (vs, ve) if vs < ve else (ve, vs)
            orient[key] = (vs, ve)
            if interval is not None:
                if not 0 <= interval.curve_id < len(self.curves):
                    raise GeometryError(f"unknown curve id {interval.curve_id}")
                check_interval(self.curves[interval.curve_id], interval)
            entries[key] = BoundaryFace(tag, interval)
        self.conn = build_connectivity(self.elements, orient)
        self.boundary: dict[int, BoundaryFace] = {}
        for f in np.flatnonzero(~self.conn.interior):
            a, b = self.conn.faces[f]
            key = (a, b) if a < b else (b, a)
            if key not in entries:
                raise TopologyError(f"boundary edge {key} has no boundary condition")
            self.boundary[int(f)] = entries.pop(key)
        if entries:
            raise TopologyError(f"boundary entries {sorted(entries)} are not mesh boundary edges")
        for f, bf in self.boundary.items():
            if bf.curved:
                c = self.curves[bf.interval.curve_id]
                a, b = self.conn.faces[f]
                for v, lam in ((a, bf.interval.lambda_a), (b, bf.interval.lambda_b)):
                    if np.linalg.norm(c(lam) - self.vertices[v]) > 1e-9:
                        raise GeometryError(
                            f"curved face {f}: vertex {v} is not C({lam})")
        self.areas = areas
        self.domain_diameter = self._diameter()

    # -- basic queries -----------------------------------------------------
    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return self.conn.n_faces

    @property
    def faces(self) -> np.ndarray:
        return self.conn.faces

    def is_boundary(self, f: int) -> bool:
        return self.conn.face_elements[f, 1] < 0

    def face_tag(self, f: int) -> int | None:
        bf = self.boundary.get(f)
        return None if bf is None else bf.tag

    def curved_faces(self) -> list[int]:
        return [f for f, bf in self.boundary.items() if bf.curved]

    def curved_local_edges(self, e: int) -> list[int]:
        return [l for l in range(3)
                if (bf := self.boundary.get(int(self.conn.element_faces[e, l])))
                and bf.curved]

    def edge_orientation(self, e: int, l: int) -> int:
        """+1 if element ``e`` traverses its local edge ``l`` along the face orientation."""
        f = self.conn.element_faces[e, l]
        return 1 if self.elements[e, l] == self.faces[f, 0] else -1

    @property
    def pure_dirichlet(self) -> bool:
        return all(bf.tag == DIRICHLET for bf in self.boundary.values())

    def element_size(self, e: int) -> float:
        """Longest chord edge of ``e`` divided by the domain diameter."""
        if self.areas[e] <= 1e-14 * self.domain_diameter ** 2:
            raise GeometryError(f"element {e} is degenerate (zero area)")
        p = self.vertices[self.elements[e]]
        edges = np.linalg.norm(p - np.roll(p, -1, axis=0), axis=1)
        return float(edges.max() / self.domain_diameter)

    def boundary_points(self, samples_per_curved_face: int = 16) -> np.ndarray:
        pts = [self.vertices[np.unique(self.faces[list(self.boundary)])]]
        for f in self.curved_faces():
            iv = self.boundary[f].interval
            lam = iv.at(np.linspace(0.0, 1.0, samples_per_curved_face + 1)[1:-1])
            pts.append(self.curves[iv.curve_id](lam))
        return np.vstack(pts)

    def _diameter(self) -> float:
        pts = self.boundary_points()
        d = 0.0
        for i in range(0, pts.shape[0], 512):
            block = pts[i:i + 512]
            dist = np.linalg.norm(block[:, None, :] - pts[None, :, :], axis=2)
            d = max(d, float(dist.max()))
        return d

    def boundary_list(self) -> list[tuple]:
        out = []
        for f in sorted(self.boundary):
            bf = self.boundary[f]
            a, b = self.faces[f]
            out.append((int(a), int(b), bf.tag) + ((bf.interval,) if bf.curved else ()))
        return out

    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_faces + self.n_elements


def element_size(mesh: TriMesh, e: int) -> float:
    return mesh.element_size(e)


def nested_refine(mesh: TriMesh) -> TriMesh:
    """Split every triangle into four at edge midpoints.

    Curved boundary edges are split at the parametric midpoint and the new
    vertex is placed on the curve.  Children of element ``e`` are
    ``4e .. 4e + 3``; child ``4e + 3`` is the central one and shares the
    parent's centroid.
    """
    verts = [p for p in mesh.vertices]
    mid = np.empty(mesh.n_faces, dtype=int)
    for f, (a, b) in enumerate(mesh.faces):
        bf = mesh.boundary.get(f)
        if bf is not None and bf.curved:
            p = mesh.curves[bf.interval.curve_id](bf.interval.midpoint)
        else:
            p = 0.5 * (mesh.vertices[a] + mesh.vertices[b])
        mid[f] = len(verts)
        verts.append(p)
    ef = mesh.conn.element_faces
    elems, parent = [], []
    for e, (a, b, c) in enumerate(mesh.elements):
        mab, mbc, mca = mid[ef[e, 0]], mid[ef[e, 1]], mid[ef[e, 2]]
        elems += [(a, mab, mca), (mab, b, mbc), (mca, mbc, c), (mab, mbc, mca)]
        parent += [e] * 4
    boundary = []
    for f, bf in mesh.boundary.items():
        a, b = mesh.faces[f]
        m = mid[f]
        if bf.curved:
            lo, hi = bf.interval.split()
            boundary += [(a, m, bf.tag, lo), (m, b, bf.tag, hi)]
        else:
            boundary += [(a, m, bf.tag), (m, b, bf.tag)]
    return TriMesh(np.array(verts), elems, boundary, mesh.curves, parent=parent)


def rectangle_mesh(nx: int, ny: int, x0: float = 0.0, x1: float = 1.0,
                   y0: float = 0.0, y1: float = 1.0, tags=DIRICHLET,
                   diagonal: str = "right") -> TriMesh:
    """Structured triangulation of a rectangle.

    ``tags`` is one tag for the whole boundary or four tags for the bottom,
    right, top and left sides.
    """
    if nx < 1 or ny < 1:
        raise ValueError("need at least one cell in each direction")
    side_tags = [tags] * 4 if np.isscalar(tags) else list(tags)
    xs, ys = np.linspace(x0, x1, nx + 1), np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    vid = lambda i, j: j * (nx + 1) + i
    elems = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            if diagonal == "right" or (diagonal == "alternate" and (i + j) % 2):
                elems += [(a, b, c), (a, c, d)]
            else:
                elems += [(a, b, d), (b, c, d)]
    boundary = [(vid(i, 0), vid(i + 1, 0), side_tags[0]) for i in range(nx)]
    boundary += [(vid(nx, j), vid(nx, j + 1), side_tags[1]) for j in range(ny)]
    boundary += [(vid(i + 1, ny), vid(i, ny), side_tags[2]) for i in range(nx)]
    boundary += [(vid(0, j + 1), vid(0, j), side_tags[3]) for j in range(ny)]
    return TriMesh(verts, elems, boundary)


# -- text mesh files ---------------------------------------------------------

def format_mesh(mesh: TriMesh) -> str:
    lines = ["VERTICES", str(mesh.n_vertices)]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines += ["ELEMENTS", str(mesh.n_elements)]
    lines += [" ".join(str(v) for v in el) for el in mesh.elements.tolist()]
    blist = mesh.boundary_list()
    lines += ["BOUNDARY", str(len(blist))]
    for item in blist:
        s = f"{item[0]} {item[1]} {item[2]}"
        if len(item) > 3:
            iv = item[3]
            s += f" {iv.curve_id} {iv.lambda_a!r} {iv.lambda_b!r}"
        lines.append(s)
    return "\n".join(lines) + "\n"


def parse_mesh(text: str, curves: Sequence[NurbsCurve] = ()) -> TriMesh:
    rows = [ln.split("#", 1)[0].split() for ln in text.splitlines()]
    rows = [r for r in rows if r]
    sections: dict[str, list[list[str]]] = {}
    i = 0
    while i < len(rows):
        name = rows[i][0].upper()
        if name not in ("VERTICES", "ELEMENTS", "BOUNDARY"):
            raise ValueError(f"unknown mesh section {rows[i][0]!r}")
        n = int(rows[i + 1][0])
        sections[name] = rows[i + 2: i + 2 + n]
        if len(sections[name]) != n:
            raise ValueError(f"section {name} truncated")
        i += 2 + n
    vertices = [[float(v) for v in r[:2]] for r in sections["VERTICES"]]
    elements = [[int(v) for v in r[:3]] for r in sections["ELEMENTS"]]
    boundary = []
    for r in sections.get("BOUNDARY", []):
        item = (int(r[0]), int(r[1]), int(r[2]))
        if len(r) >= 6:
            item += (ParamInterval(int(r[3]), float(r[4]), float(r[5])),)
        boundary.append(item)
    return TriMesh(vertices, elements, boundary, curves)


def write_mesh(path, mesh: TriMesh) -> None:
    Path(path).write_text(format_mesh(mesh))


def read_mesh(path, curves: Sequence[NurbsCurve] = ()) -> TriMesh:
    return parse_mesh(Path(path).read_text(), curves)
