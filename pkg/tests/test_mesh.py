import numpy as np
import pytest

from hdgnefem.errors import GeometryError, TopologyError
from hdgnefem.geometry import NEFEM, GeometryBackend
from hdgnefem.mesh import (DIRICHLET, NEUMANN, TriMesh, build_connectivity, element_size,
                           nested_refine, read_mesh, rectangle_mesh, write_mesh)
from support import quarter_disc, single_triangle


def test_one_triangle_faces():
    c = build_connectivity([(0, 1, 2)])
    assert c.n_faces == 3 and not c.interior.any()


def test_two_triangles_faces():
    c = build_connectivity([(0, 1, 2), (0, 2, 3)])
    assert c.n_faces == 5 and c.interior.sum() == 1


def test_euler_structured():
    m = rectangle_mesh(2, 2)
    assert m.n_elements == 8
    assert m.euler_characteristic() == 1


def test_non_manifold_edge():
    with pytest.raises(TopologyError):
        build_connectivity([(0, 1, 2), (1, 0, 3), (0, 1, 4)])


def test_clockwise_element_rejected():
    with pytest.raises(GeometryError):
        TriMesh([(0, 0), (0, 1), (1, 0)], [(0, 1, 2)], [])


def test_missing_boundary_condition():
    with pytest.raises(TopologyError):
        TriMesh([(0, 0), (1, 0), (0, 1)], [(0, 1, 2)], [(0, 1, DIRICHLET)])


def test_interior_faces_traversed_oppositely():
    m = rectangle_mesh(3, 2, diagonal="alternate")
    for f in np.flatnonzero(m.conn.interior):
        (e0, e1), (l0, l1) = m.conn.face_elements[f], m.conn.face_local[f]
        assert m.edge_orientation(e0, l0) == -m.edge_orientation(e1, l1)


def test_refine_single_triangle():
    m = nested_refine(single_triangle())
    assert m.n_elements == 4 and m.n_faces == 9
    assert np.allclose(m.areas, 0.125)
    assert m.euler_characteristic() == 1


def test_refine_halves_element_size():
    m = rectangle_mesh(2, 3, x1=2.0)
    r = nested_refine(m)
    for e in range(r.n_elements):
        assert np.isclose(r.element_size(e), 0.5 * m.element_size(r.parent[e]))


def test_element_size_definition():
    m = rectangle_mesh(2, 2)
    assert np.isclose(element_size(m, 0), 0.5)
    # equilateral triangles of side 0.1 inside a domain of unit diameter
    s = 0.1
    h = s * np.sqrt(3) / 2
    verts = [(0, 0), (s, 0), (s / 2, h), (1.0, 0.0)]
    m2 = TriMesh(verts, [(0, 1, 2), (1, 3, 2)],
                 [(0, 1, 1), (1, 3, 1), (3, 2, 1), (2, 0, 1)])
    assert np.isclose(m2.domain_diameter, 1.0)
    assert np.isclose(m2.element_size(0), 0.1)


def test_curved_refinement_intervals():
    m = quarter_disc()
    r = nested_refine(m)
    ivs = sorted((bf.interval.lambda_a, bf.interval.lambda_b)
                 for bf in r.boundary.values() if bf.curved)
    assert ivs == [(0.0, 0.5), (0.5, 1.0)]
    mid = r.curves[0](0.5)
    assert np.any(np.all(np.isclose(r.vertices, mid, atol=1e-15), axis=1))


def test_refinement_preserves_tags_and_intervals():
    m = quarter_disc(tag=NEUMANN)
    for _ in range(3):
        r = nested_refine(m)
        tags = lambda mesh: sorted(bf.tag for bf in mesh.boundary.values())
        assert tags(r).count(NEUMANN) == 2 * tags(m).count(NEUMANN)
        assert tags(r).count(DIRICHLET) == 2 * tags(m).count(DIRICHLET)
        total = sum(bf.interval.length for bf in r.boundary.values() if bf.curved)
        assert np.isclose(total, 1.0)
        m = r


def test_curved_area_invariant_under_refinement():
    m = quarter_disc()
    areas = []
    for _ in range(3):
        geo = GeometryBackend(m, NEFEM).elements([2] * m.n_elements)
        areas.append(sum(g.area() for g in geo))
        m = nested_refine(m)
    assert np.allclose(areas, np.pi / 4, rtol=1e-10)


def test_mesh_file_round_trip(tmp_path):
    m = nested_refine(quarter_disc(tag=NEUMANN))
    path = tmp_path / "mesh.txt"
    write_mesh(path, m)
    back = read_mesh(path, m.curves)
    assert np.array_equal(back.vertices, m.vertices)
    assert np.array_equal(back.elements, m.elements)
    assert back.boundary_list() == m.boundary_list()


def test_mesh_file_rejects_unknown_section():
    with pytest.raises(ValueError):
        from hdgnefem.mesh import parse_mesh
        parse_mesh("NODES\n1\n0 0\n")
