import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import goafem as gf
from goafem.mesh import DIRICHLET, NEUMANN


def test_initial_unit_square(square_mesh):
    assert square_mesh.n_vertices == 4
    assert square_mesh.n_triangles == 2
    assert square_mesh.boundary_edges.shape[0] == 4
    assert np.all(square_mesh.boundary_labels == DIRICHLET)
    assert gf.is_conforming(square_mesh)
    assert gf.min_angle(square_mesh) == pytest.approx(np.pi / 4)


def test_initial_zshape_boundary_labels(zshape_mesh):
    assert gf.is_conforming(zshape_mesh)
    # Dirichlet on conv{(-1,0),(0,0)} and conv{(0,0),(-1,-1)}, Neumann elsewhere
    dlabels = zshape_mesh.boundary_labels == DIRICHLET
    dedges = zshape_mesh.boundary_edges[dlabels]
    dcoords = {tuple(sorted(map(tuple, zshape_mesh.vertices[e]))) for e in dedges}
    assert dcoords == {
        ((-1.0, 0.0), (0.0, 0.0)),
        ((-1.0, -1.0), (0.0, 0.0)),
    }
    assert (zshape_mesh.boundary_labels == NEUMANN).sum() == 7


def test_unknown_domain():
    with pytest.raises(ValueError):
        gf.initial_mesh("pentagon")


def test_refine_empty_marking(square_mesh):
    out = gf.refine(square_mesh, [])
    assert out.n_triangles == square_mesh.n_triangles
    assert np.array_equal(out.triangles, square_mesh.triangles)


def test_refine_invalid_id(square_mesh):
    with pytest.raises(ValueError):
        gf.refine(square_mesh, [5])


def test_refine_one_triangle_hand_trace(square_mesh):
    # both refinement edges sit on the shared diagonal, so marking one
    # triangle bisects the neighbour too (closure removes the hanging node)
    out = gf.refine(square_mesh, [0])
    assert out.n_triangles == 4
    assert out.n_vertices == 5
    assert gf.is_conforming(out)


def test_refine_both_triangles_hand_trace(square_mesh):
    out = gf.refine(square_mesh, [0, 1])
    assert out.n_triangles == 4
    assert out.n_vertices == 5
    assert tuple(out.vertices[4]) == (0.5, 0.5)


def test_generation_and_parent_links(square_mesh):
    out = gf.refine(square_mesh, [0])
    assert np.all(out.parent >= 0)
    for child in range(out.n_triangles):
        assert out.generation[child] == square_mesh.generation[out.parent[child]] + 1


def test_bisection_halves_area(square_mesh):
    mesh = square_mesh
    rng = np.random.default_rng(3)
    for _ in range(4):
        marked = rng.choice(mesh.n_triangles, size=max(1, mesh.n_triangles // 3), replace=False)
        fine = gf.refine(mesh, marked)
        for child in range(fine.n_triangles):
            parent = fine.parent[child]
            dgen = fine.generation[child] - mesh.generation[parent]
            assert fine.areas[child] == pytest.approx(
                mesh.areas[parent] / 2.0 ** dgen, rel=1e-12)
        mesh = fine


def test_refined_count_grows(square_mesh):
    fine = gf.refine(square_mesh, [1])
    assert fine.n_triangles > square_mesh.n_triangles


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=10 ** 6), min_size=1, max_size=4),
       st.sampled_from(["unit-square", "zshape"]))
def test_conformity_under_random_marking(seeds, domain):
    mesh = gf.initial_mesh(domain)
    for seed in seeds:
        rng = np.random.default_rng(seed)
        marked = rng.choice(mesh.n_triangles,
                            size=rng.integers(1, mesh.n_triangles + 1), replace=False)
        mesh = gf.refine(mesh, marked)
        assert gf.is_conforming(mesh)
        assert gf.min_angle(mesh) >= np.pi / 4 - 1e-12


def test_hanging_node_detected(square_mesh):
    # bisect one triangle by hand without fixing the neighbour: the new
    # vertex hangs on the neighbour's diagonal edge
    v = np.vstack([square_mesh.vertices, [[0.5, 0.5]]])
    tri = np.array([[1, 2, 4], [0, 1, 4], [0, 2, 3]])
    bad = gf.Triangulation(
        vertices=v,
        triangles=tri.astype(np.int64),
        boundary_edges=square_mesh.boundary_edges,
        boundary_labels=square_mesh.boundary_labels,
        generation=np.zeros(3, dtype=np.int64),
        parent=-np.ones(3, dtype=np.int64),
    )
    assert not gf.is_conforming(bad)


def test_min_angle_uniform_refinements(square_mesh):
    # right isosceles triangles bisected at the hypotenuse reproduce the
    # same similarity class, so the minimum angle is pi/4 on every level
    mesh = square_mesh
    for _ in range(4):
        mesh = gf.uniform_refine(mesh)
        assert gf.min_angle(mesh) == pytest.approx(np.pi / 4)


def test_boundary_labels_preserved(zshape_mesh):
    fine = gf.uniform_refine(zshape_mesh, 2)
    assert gf.is_conforming(fine)
    for labels, mesh in ((fine.boundary_labels, fine),):
        dedges = mesh.boundary_edges[labels == DIRICHLET]
        pts = mesh.vertices[dedges]
        # all Dirichlet edges lie on the two cut segments y=0 (x<=0) or y=x (x<=0)
        on_cut = (np.all(np.abs(pts[:, :, 1]) < 1e-14, axis=1)
                  | np.all(np.abs(pts[:, :, 1] - pts[:, :, 0]) < 1e-14, axis=1))
        assert np.all(on_cut)
    total_d = np.sum(np.linalg.norm(
        fine.vertices[fine.boundary_edges[fine.boundary_labels == DIRICHLET, 1]]
        - fine.vertices[fine.boundary_edges[fine.boundary_labels == DIRICHLET, 0]], axis=1))
    assert total_d == pytest.approx(1.0 + np.sqrt(2.0))


def test_hierarchy_bookkeeping(square_mesh):
    hier = gf.MeshHierarchy(square_mesh)
    mesh = gf.refine(square_mesh, [0])
    hier.append(mesh)
    assert len(hier) == 2
    assert np.array_equal(hier.new_vertices[0], np.arange(4))
    assert np.array_equal(hier.new_vertices[1], np.array([4]))
    assert hier.new_vertex_edges[1].shape == (1, 2)
    assert set(hier.new_vertex_edges[1][0]) == {0, 2}


def test_export_import_roundtrip(tmp_path, zshape_mesh):
    mesh = gf.refine(zshape_mesh, [0, 3])
    path = tmp_path / "mesh.txt"
    gf.export_mesh(mesh, path)
    text = path.read_text().splitlines()
    assert text[0] == f"vertices {mesh.n_vertices}"
    assert text[1] == f"triangles {mesh.n_triangles}"
    assert text[2] == f"boundary {mesh.boundary_edges.shape[0]}"
    back = gf.load_mesh(path)
    assert np.array_equal(back.triangles, mesh.triangles)
    assert np.allclose(back.vertices, mesh.vertices)
    assert np.array_equal(back.boundary_labels, mesh.boundary_labels)
    assert gf.is_conforming(back)
