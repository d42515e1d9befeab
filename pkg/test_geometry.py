# test_geometry.py
import numpy as np
import pytest

from curvem.errors import GeometryError, MeshError, ParseError
from curvem.geometry import Curve, CurvedMesh, Edge, arc_length, close_loop, eval_curve
from curvem.mesh_io import load_mesh, read_mesh_file, save_mesh, write_mesh_file
from curvem.meshgen import MeshBuilder, generate_benchmark_mesh
from curvem.types import Domain, MeshFamily, MeshRequest


def quarter_disk():
    """One element: the unit quarter disk bounded by two segments and an arc"""
    circle = Curve.circle(0, (0.0, 0.0), 1.0)
    top = circle.points(np.pi / 2)[0]
    vertices = np.array([[0.0, 0.0], [1.0, 0.0], top])
    edges = [
        Edge(0, 0, 1, tuple(vertices[0]), tuple(vertices[1])),
        Edge(1, 1, 2, tuple(vertices[1]), tuple(vertices[2]), curve=circle, ta=0.0, tb=np.pi / 2),
        Edge(2, 2, 0, tuple(vertices[2]), tuple(vertices[0])),
    ]
    element = close_loop(0, [0, 1, 2], edges)
    return CurvedMesh(vertices, {0: circle}, edges, [element],
                      {'arc': (1,), 'axes': (0, 2)})


def unit_square(n=2):
    builder = MeshBuilder({})
    for i in range(n):
        for j in range(n):
            corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
            ids = [builder.vertex(c, (c[0] / n, c[1] / n)) for c in corners]
            builder.cell([(ids[p], ids[(p + 1) % 4], None) for p in range(4)])
    return builder.build(lambda edge: 'boundary')


@pytest.fixture
def quarter():
    return quarter_disk()


# ==================== CURVES ====================

def test_circle_needs_positive_radius():
    with pytest.raises(GeometryError):
        Curve.circle(0, (0.0, 0.0), 0.0)


def test_segment_needs_distinct_endpoints():
    with pytest.raises(GeometryError):
        Curve.segment(0, (1.0, 1.0), (1.0, 1.0))


def test_eval_curve_point_and_tangent():
    circle = Curve.circle(0, (1.0, 2.0), 3.0)
    point, tangent = eval_curve(circle, np.pi / 2)
    np.testing.assert_allclose(point, [1.0, 5.0], atol=1e-14)
    np.testing.assert_allclose(tangent, [-3.0, 0.0], atol=1e-14)


def test_eval_curve_rejects_parameter_outside_bounds():
    arc = Curve.circle(0, (0.0, 0.0), 1.0, 0.0, 1.0)
    with pytest.raises(GeometryError):
        eval_curve(arc, 1.5)


def test_parameter_of_unwraps_near_reference():
    circle = Curve.circle(0, (0.0, 0.0), 2.0)
    point = circle.points(2 * np.pi + 0.1)[0]
    assert circle.parameter_of(point, near=6.0) == pytest.approx(2 * np.pi + 0.1)
    assert circle.parameter_of(point) == pytest.approx(0.1)


def test_arc_length_of_quarter_circle(quarter):
    assert arc_length(quarter.edges[1]) == pytest.approx(np.pi / 2, rel=1e-12)
    assert arc_length(quarter.edges[0]) == pytest.approx(1.0)


# ==================== ELEMENTS ====================

def test_close_loop_orientations(quarter):
    element = quarter.elements[0]
    assert element.orientations == (1, 1, 1)
    assert element.vertices == (0, 1, 2)


def test_close_loop_rejects_open_loop(quarter):
    with pytest.raises(MeshError):
        close_loop(0, [0, 1], quarter.edges)


def test_quarter_disk_measures(quarter):
    measures = quarter.measures(0)
    assert measures.area == pytest.approx(np.pi / 4, rel=1e-12)
    expected = 4.0 / (3.0 * np.pi)
    np.testing.assert_allclose(measures.centroid, [expected, expected], rtol=1e-12)
    assert measures.diameter == pytest.approx(np.sqrt(2.0), rel=1e-3)


def test_outward_normal_on_arc(quarter):
    edge = quarter.edges[1]
    t = np.array([np.pi / 4])
    normal = quarter.elements[0].orientations[1] * edge.normals(t)
    np.testing.assert_allclose(normal[0], [np.sqrt(0.5), np.sqrt(0.5)], atol=1e-14)


def test_rectified_mesh_keeps_trace(quarter):
    chords = quarter.rectified()
    assert not chords.is_curved
    assert chords.area == pytest.approx(0.5)
    edge = chords.edges[1]
    on_curve = edge.trace_points(edge.params(np.array([0.5])))
    np.testing.assert_allclose(np.linalg.norm(on_curve, axis=1), 1.0)


def test_contains_points(quarter):
    inside = quarter.contains_points(0, np.array([[0.5, 0.5], [0.7, 0.7], [0.9, 0.9]]))
    assert inside.tolist() == [True, True, False]


def test_unknown_group_raises(quarter):
    with pytest.raises(MeshError):
        quarter.group_edges('missing')


# ==================== MESH VALIDATION ====================

def test_endpoint_mismatch_is_rejected():
    vertices = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    edges = [Edge(0, 0, 1, (0.0, 0.0), (1.0, 0.0)),
             Edge(1, 1, 2, (1.0, 0.0), (0.0, 1.0)),
             Edge(2, 2, 0, (0.0, 1.1), (0.0, 0.0))]
    element = close_loop(0, [0, 1, 2], edges)
    with pytest.raises(MeshError) as info:
        CurvedMesh(vertices, {}, edges, [element], {})
    assert info.value.edge == 2


def test_clockwise_loop_is_rejected():
    vertices = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    edges = [Edge(0, 0, 1, (0.0, 0.0), (0.0, 1.0)),
             Edge(1, 1, 2, (0.0, 1.0), (1.0, 0.0)),
             Edge(2, 2, 0, (1.0, 0.0), (0.0, 0.0))]
    element = close_loop(0, [0, 1, 2], edges)
    with pytest.raises(MeshError):
        CurvedMesh(vertices, {}, edges, [element], {})


def test_group_must_list_boundary_edges():
    mesh = unit_square(2)
    interior = next(eid for eid, owners in enumerate(mesh.edge_elements) if len(owners) == 2)
    with pytest.raises(MeshError):
        CurvedMesh(mesh.vertices, {}, mesh.edges, mesh.elements, {'bad': (interior,)})


def test_unit_square_builder():
    mesh = unit_square(3)
    assert mesh.n_elements == 9
    assert mesh.n_vertices == 16
    assert mesh.n_edges == 24
    assert len(mesh.groups['boundary']) == 12
    assert mesh.area == pytest.approx(1.0)


# ==================== BENCHMARK MESHES ====================

def test_disk_quad_mesh_is_exact():
    mesh = generate_benchmark_mesh(MeshRequest(Domain.DISK, MeshFamily.QUAD, 50))
    assert mesh.is_curved
    assert set(mesh.groups) == {'boundary'}
    assert mesh.area == pytest.approx(np.pi, rel=1e-11)


def test_annulus_272_is_8_by_34():
    mesh = generate_benchmark_mesh(MeshRequest(Domain.ANNULUS, MeshFamily.QUAD, 272))
    assert mesh.n_elements == 272
    assert set(mesh.groups) == {'inner', 'outer', 'bottom', 'left'}
    assert len(mesh.groups['inner']) == 34
    assert len(mesh.groups['bottom']) == 8
    assert mesh.area == pytest.approx(3.0 * np.pi, rel=1e-11)


def test_distorted_annulus_keeps_area():
    request = MeshRequest(Domain.ANNULUS, MeshFamily.QUAD, 64, distortion=0.3, seed=4)
    mesh = generate_benchmark_mesh(request)
    assert mesh.n_elements == 64
    assert mesh.area == pytest.approx(3.0 * np.pi, rel=1e-11)


def test_plate_quad_mesh():
    mesh = generate_benchmark_mesh(MeshRequest(Domain.PLATE, MeshFamily.QUAD, 100))
    assert set(mesh.groups) == {'hole', 'bottom', 'left', 'right', 'top'}
    assert mesh.area == pytest.approx(100.0 * 180.0 - 0.25 * np.pi * 50.0 ** 2, rel=1e-11)


@pytest.mark.parametrize("family", [MeshFamily.RHEX, MeshFamily.VORO])
def test_voronoi_disk_mesh(family):
    mesh = generate_benchmark_mesh(MeshRequest(Domain.DISK, family, 60, seed=1,
                                               lloyd_iterations=5))
    assert mesh.n_elements > 20
    assert mesh.area == pytest.approx(np.pi, rel=1e-10)
    for eid in mesh.groups['boundary']:
        assert mesh.edges[eid].is_curved


def test_voronoi_mesh_is_deterministic():
    request = MeshRequest(Domain.DISK, MeshFamily.VORO, 40, seed=7, lloyd_iterations=3)
    first = generate_benchmark_mesh(request)
    second = generate_benchmark_mesh(request)
    np.testing.assert_array_equal(first.vertices, second.vertices)


# ==================== MESH FILES ====================

def test_mesh_text_preserves_geometry(quarter):
    loaded = load_mesh(save_mesh(quarter))
    assert loaded.n_elements == 1
    assert loaded.groups == quarter.groups
    assert loaded.measures(0).area == pytest.approx(np.pi / 4, rel=1e-12)


def test_mesh_file_roundtrip(tmp_path):
    mesh = generate_benchmark_mesh(MeshRequest(Domain.ANNULUS, MeshFamily.QUAD, 16))
    path = tmp_path / "annulus.mesh"
    write_mesh_file(mesh, str(path))
    loaded = read_mesh_file(str(path))
    assert loaded.n_elements == 16
    assert loaded.area == pytest.approx(mesh.area, rel=1e-14)


def test_mesh_text_with_sparse_ids():
    text = """# curvem-mesh v1
vertex 10 0 0
vertex 20 1 0
vertex 30 0 1
edge 5 10 20
edge 6 20 30
edge 7 30 10
element 99 5 6 7
bgroup all 5 6 7
"""
    mesh = load_mesh(text)
    assert mesh.n_vertices == 3
    assert mesh.groups['all'] == (0, 1, 2)
    assert mesh.area == pytest.approx(0.5)


def test_unknown_vertex_reports_line():
    text = "vertex 0 0 0\nvertex 1 1 0\nedge 0 0 7\n"
    with pytest.raises(ParseError) as info:
        load_mesh(text)
    assert info.value.line == 3


def test_unknown_record_reports_line():
    with pytest.raises(ParseError) as info:
        load_mesh("vertex 0 0 0\nface 1 2 3\n")
    assert info.value.line == 2


def test_empty_mesh_text():
    with pytest.raises(ParseError):
        load_mesh("# curvem-mesh v1\n")


def test_missing_mesh_file(tmp_path):
    with pytest.raises(ParseError):
        read_mesh_file(str(tmp_path / "nope.mesh"))
