import math

from hypothesis import given, strategies as st
import numpy as np
import pytest

from qtorsion.errors import DomainError, InconsistentMeshError
from qtorsion.geometry import ConvexBodyH, box, firey_p_sum, regular_polygon, scale
from qtorsion.mesh import check_mesh, morph, quality_bound, triangulate
from qtorsion.verify import random_polygon


def test_square_mesh_invariants():
    mesh = triangulate(box().polygon, 0.1)
    check_mesh(mesh)
    assert mesh.areas.sum() == pytest.approx(4.0, rel=1e-12)
    assert mesh.min_angle >= 20.0
    assert mesh.max_edge <= 0.1 * 2.5
    # boundary nodes come first and are tagged with the four facets
    assert set(mesh.boundary_facets.tolist()) == {0, 1, 2, 3}
    assert mesh.boundary_edges.max() < mesh.n_boundary


def test_boundary_lengths_per_facet():
    K = ConvexBodyH.from_angles([0.1, 1.9, 3.3, 4.6], [1.0, 0.8, 1.2, 0.9])
    mesh = triangulate(K.polygon, 0.05)
    be = mesh.boundary_edges
    L = np.linalg.norm(mesh.nodes[be[:, 1]] - mesh.nodes[be[:, 0]], axis=1)
    per = np.bincount(mesh.boundary_facets, weights=L, minlength=len(K))
    assert np.allclose(per[K.polygon.facet_ids], K.polygon.edge_lengths, rtol=1e-12)


def test_mesh_size_too_large():
    with pytest.raises(DomainError):
        triangulate(box().polygon, 5.0)


def test_sharp_corner_relaxes_angle_bound():
    K = ConvexBodyH.from_angles([0.0, math.pi / 2 + 0.3, math.pi + 0.25], [1.0, 0.2, 0.2])
    assert quality_bound(K.polygon) < 20.0
    check_mesh(triangulate(K.polygon, 0.02))


def test_firey_sum_with_tiny_facets_meshes():
    rng = np.random.default_rng(3)
    K, L = random_polygon(rng), random_polygon(rng)
    S = firey_p_sum(K, L, 1.0, 1.5)
    check_mesh(triangulate(S.polygon, 0.04))


def test_morph_onto_dilate_is_exact_scaling():
    mesh = triangulate(box().polygon, 0.1)
    moved = morph(mesh, scale(box(), 1.7).polygon)
    assert np.allclose(moved.nodes, 1.7 * mesh.nodes, atol=1e-12)
    assert moved.areas.sum() == pytest.approx(4 * 1.7 ** 2)


def test_morph_rejects_different_fan():
    mesh = triangulate(box().polygon, 0.2)
    with pytest.raises(InconsistentMeshError):
        morph(mesh, regular_polygon(5).polygon)


@given(st.integers(0, 10_000))
def test_random_polygon_meshes_are_valid(seed):
    K = random_polygon(np.random.default_rng(seed))
    mesh = triangulate(K.polygon, 0.1)
    check_mesh(mesh)
    assert mesh.areas.sum() == pytest.approx(K.polygon.area, rel=1e-10)


@given(st.integers(0, 10_000), st.floats(-0.05, 0.05))
def test_small_offset_changes_morph_cleanly(seed, t):
    K = random_polygon(np.random.default_rng(seed))
    mesh = triangulate(K.polygon, 0.1)
    L = ConvexBodyH.from_angles(K.angles, K.offsets * (1 + t * np.cos(np.arange(len(K)))))
    if len(L.polygon.facet_ids) != len(K.polygon.facet_ids):
        return
    moved = morph(mesh, L.polygon)
    assert moved.areas.sum() == pytest.approx(L.polygon.area, rel=1e-10)
