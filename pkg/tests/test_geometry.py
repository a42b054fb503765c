import math

from hypothesis import given, strategies as st
import numpy as np
import pytest

from qtorsion.errors import DomainError, InvalidBodyError
from qtorsion.geometry import (ConvexBodyH, DiscreteMeasure, UnitDirection, aleksandrov_body,
                               angular_distance, box, canonical_angle, contains, firey_p_sum,
                               hausdorff_distance, radial_function, regular_polygon, scale,
                               spanning_check, support, translate, uniform_angles)

angles = st.floats(0, 2 * math.pi, allow_nan=False)


@st.composite
def bodies(draw, min_facets=3, max_facets=9):
    m = draw(st.integers(min_facets, max_facets))
    base = np.sort(np.array(draw(st.lists(angles, min_size=m, max_size=m))))
    off = np.array(draw(st.lists(st.floats(0.5, 2.0), min_size=m, max_size=m)))
    try:
        return ConvexBodyH.from_angles(base, off)
    except InvalidBodyError:
        return regular_polygon(m)


def test_unit_square_from_normals():
    K = ConvexBodyH([[1, 0], [0, 1], [-1, 0], [0, -1]], [1, 1, 1, 1])
    assert K.polygon.area == pytest.approx(4.0)
    assert K.diameter == pytest.approx(2 * math.sqrt(2))
    assert support(K, [1 / math.sqrt(2), 1 / math.sqrt(2)]) == pytest.approx(math.sqrt(2))


def test_non_unit_normal_rejected():
    with pytest.raises(DomainError):
        UnitDirection.from_vector([1.0, 1e-4])


def test_half_circle_normals_unbounded():
    with pytest.raises(InvalidBodyError) as exc:
        ConvexBodyH.from_angles([0.0, 1.0, 2.0], [1, 1, 1])
    assert exc.value.invariant == "normals-spanning"


def test_redundant_constraint_flagged_degenerate():
    K = ConvexBodyH.from_angles([0, math.pi / 4, math.pi / 2, math.pi, 1.5 * math.pi],
                                [1, 5, 1, 1, 1])
    assert K.degenerate == frozenset({1})
    assert len(K.polygon.vertices) == 4
    assert K.support_numbers[1] == pytest.approx(math.sqrt(2))


def test_duplicate_normals_merge_tighter():
    K = ConvexBodyH.from_angles([0, 0, math.pi / 2, math.pi, 1.5 * math.pi], [2, 1, 1, 1, 1])
    assert len(K) == 4 and K.offsets[0] == 1


def test_canonical_angle_snaps_and_wraps():
    assert canonical_angle(2 * math.pi) == 0.0
    assert canonical_angle(-math.pi / 2) == pytest.approx(1.5 * math.pi)
    assert UnitDirection(0.1) == UnitDirection(0.1 + 2 * math.pi)


def test_box_translated():
    B = box((2, 1), center=(1, -1))
    assert support(B, 0.0) == pytest.approx(3.0)
    assert support(B, 1.5 * math.pi) == pytest.approx(2.0)


def test_radial_function_square():
    K = box()
    assert radial_function(K, math.pi / 4) == pytest.approx(math.sqrt(2))


def test_hausdorff_of_squares_hits_diagonal():
    # angle snapping moves vertices by ~1e-11
    assert hausdorff_distance(box(), box((1.5, 1.5))) == pytest.approx(0.5 * math.sqrt(2), abs=1e-10)
    # translation by y: max over directions of |d . y| = |y|
    assert hausdorff_distance(box(), box(center=(0.3, 0.4))) == pytest.approx(0.5, abs=1e-10)


def test_firey_sum_p1_of_squares_is_minkowski_sum():
    S = firey_p_sum(box(), box(), 1.0, 1.0)
    assert hausdorff_distance(S, box((2, 2))) < 1e-12


def test_firey_sum_rejects_small_p():
    with pytest.raises(DomainError):
        firey_p_sum(box(), box(), 1.0, 0.5)


def test_aleksandrov_body_of_disk_support():
    th = uniform_angles(64)
    K = aleksandrov_body(th, np.ones(64))
    assert hausdorff_distance(K, regular_polygon(64, 1 / math.cos(math.pi / 64))) < 1e-12


def test_measure_merges_and_validates():
    m = DiscreteMeasure([0.0, 2 * math.pi, math.pi], [1.0, 2.0, 3.0])
    assert len(m) == 2 and m.total_mass == 6.0
    with pytest.raises(DomainError):
        DiscreteMeasure([0.0], [-1.0])
    with pytest.raises(DomainError):
        DiscreteMeasure([0.0, 1.0], [0.0, 0.0])


def test_spanning_check():
    assert spanning_check(DiscreteMeasure(uniform_angles(3), [1, 1, 1]))
    assert not spanning_check(DiscreteMeasure([0.0, math.pi], [1, 1]))
    assert not spanning_check(DiscreteMeasure([0.0, 1.0, 2.0], [1, 1, 1]))


def test_arrays_are_read_only():
    K = box()
    with pytest.raises(ValueError):
        K.offsets[0] = 3.0


@given(bodies(), st.floats(-1, 1), st.floats(-1, 1))
def test_translation_shifts_support(K, x, y):
    th = uniform_angles(37)
    D = np.c_[np.cos(th), np.sin(th)]
    T = translate(K, (x, y))
    assert np.allclose(support(T, D), support(K, D) + D @ [x, y], atol=1e-9)


@given(bodies(), st.floats(0.1, 10))
def test_scaling_support_and_area(K, s):
    S = scale(K, s)
    th = uniform_angles(29)
    assert np.allclose(support(S, th), s * support(K, th), rtol=1e-9, atol=1e-12)
    assert S.polygon.area == pytest.approx(s * s * K.polygon.area, rel=1e-9)


@given(bodies())
def test_polygon_is_ccw_and_vertices_feasible(K):
    V = K.polygon.vertices
    assert K.polygon.area > 0
    assert np.all(V @ K.normals.T <= K.offsets + 1e-9 * max(1.0, K.diameter))
    assert contains(K, V.mean(axis=0), strict=True)
    assert np.all(K.support_numbers <= K.offsets + 1e-9)


@given(bodies(), bodies())
def test_hausdorff_is_symmetric_and_dominates_samples(K, L):
    d = hausdorff_distance(K, L)
    assert d == pytest.approx(hausdorff_distance(L, K), rel=1e-12, abs=1e-12)
    th = np.linspace(0, 2 * math.pi, 4001)
    assert d >= np.max(np.abs(support(K, th) - support(L, th))) - 1e-12


@given(angles, angles)
def test_angular_distance_bounds(a, b):
    d = angular_distance(a, b)
    assert 0 <= d <= math.pi + 1e-15
