import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neoplate.geometry import (PLMap, Rect, TriangleMesh, affine_gradient,
                               distortion, hs_norm, identity_map, jacobian,
                               make_rect_mesh, read_mesh, unit_square,
                               write_mesh)


def test_rect_properties():
    r = Rect(-1.0, 1.0, -2.0, 2.0)
    assert r.width == 2.0
    assert r.height == 4.0
    assert r.area == 8.0
    assert np.allclose(r.center, [0.0, 0.0])
    assert r.diameter == pytest.approx(np.hypot(2.0, 4.0))
    assert r.contains(0.0, 0.0)
    assert not r.contains(1.5, 0.0)


def test_degenerate_rect_rejected():
    with pytest.raises(ValueError):
        Rect(1.0, 1.0, 0.0, 2.0)
    with pytest.raises(ValueError):
        Rect(0.0, 1.0, 3.0, 2.0)


def test_make_rect_mesh_counts_and_flags():
    mesh = make_rect_mesh(unit_square(), 3, 2)
    assert mesh.num_vertices == 4 * 3
    assert mesh.num_triangles == 2 * 3 * 2
    # corners carry two side tags
    corner_flags = [f for f in mesh.boundary_flags if len(f) == 2]
    assert len(corner_flags) == 4
    assert sum(1 for f in mesh.boundary_flags if f) == 2 * (3 + 2)


def test_mesh_areas_sum_to_domain():
    rect = Rect(0.0, 2.0, 0.0, 3.0)
    mesh = make_rect_mesh(rect, 4, 5)
    assert float(mesh.signed_areas().sum()) == pytest.approx(rect.area, abs=1e-12)
    assert np.all(mesh.signed_areas() > 0)


def test_mesh_validation_rejects_flipped_triangle():
    verts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    with pytest.raises(ValueError, match="nonpositive"):
        TriangleMesh(verts, [(0, 2, 1)], ["BL", "B", "L"])


def test_identity_map_gradients():
    mesh = make_rect_mesh(unit_square(), 2, 2)
    plmap = identity_map(mesh)
    grads = plmap.gradients()
    assert np.allclose(grads, np.eye(2)[None], atol=1e-14)
    assert plmap.orientation_preserving()


def test_affine_gradient_recovers_matrix():
    mesh = make_rect_mesh(unit_square(), 2, 3)
    M = np.array([[1.5, 0.25], [-0.5, 2.0]])
    plmap = PLMap(mesh, mesh.vertices @ M.T)
    for t in range(mesh.num_triangles):
        assert np.allclose(affine_gradient(mesh, plmap, t), M, atol=1e-13)


def test_affine_gradient_bad_index():
    mesh = make_rect_mesh(unit_square(), 1, 1)
    plmap = identity_map(mesh)
    with pytest.raises(IndexError):
        affine_gradient(mesh, plmap, 99)


def test_jacobian_and_norm():
    A = np.array([[2.0, 0.0], [0.0, 3.0]])
    assert jacobian(A) == 6.0
    assert hs_norm(A) == pytest.approx(np.sqrt(13.0))
    assert distortion(np.eye(2)) == pytest.approx(1.0)


def test_distortion_rejects_flip():
    with pytest.raises(ValueError):
        distortion(np.array([[1.0, 0.0], [0.0, -1.0]]))


@given(st.floats(0.1, 4.0), st.floats(-2.0, 2.0), st.floats(0.1, 4.0))
def test_distortion_at_least_one(s1, shear, s2):
    A = np.array([[s1, shear], [0.0, s2]])
    assert distortion(A) >= 1.0 - 1e-12


@settings(max_examples=25)
@given(st.integers(1, 6), st.integers(1, 6))
def test_mesh_area_property(nx, ny):
    rect = Rect(0.0, 1.5, -1.0, 2.0)
    mesh = make_rect_mesh(rect, nx, ny)
    assert mesh.num_triangles == 2 * nx * ny
    assert float(mesh.signed_areas().sum()) == pytest.approx(rect.area, rel=1e-12)


def test_mesh_roundtrip(tmp_path):
    mesh = make_rect_mesh(unit_square(), 3, 3)
    path = tmp_path / "mesh.txt"
    write_mesh(mesh, path)
    back = read_mesh(path, rect=unit_square())
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.triangles, mesh.triangles)
    assert back.boundary_flags == mesh.boundary_flags


def test_plmap_shape_mismatch():
    mesh = make_rect_mesh(unit_square(), 2, 2)
    with pytest.raises(ValueError):
        PLMap(mesh, mesh.vertices[:-1])
