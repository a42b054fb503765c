import math
import os
import subprocess
import sys

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from qtorsion.errors import DomainError, InconsistentMeshError
from qtorsion.geometry import ConvexBodyH, box, regular_polygon, scale, support, translate
from qtorsion.mesh import morph, triangulate
from qtorsion.torsion import (TorsionConfig, ball_torsion_analytic, compute_torsion,
                              homogeneity_degree, identity_residual, measure_degree,
                              mixed_torsion, solve_torsion, torsion_report, torsional_measure)
from qtorsion.verify import random_polygon

# Frozen independent oracles.
# Disk R=1: radial quadrature of |u'| = (r/2)^(1/(q-1)) (mpmath, 30 digits).
DISK = {1.5: (0.39633272976060110, 0.78539816339744831),
        2.0: (0.39269908169872415, 1.5707963267948966),
        3.0: (0.40284099596283096, 2.2214414690791836),
        5.0: (0.43655206933763916, 2.6417540005910613)}
# Square [-1,1]^2, q=2: double sine series of int u.
SQUARE_INT_U = 0.56230805982061486
# Equilateral triangle of side 2, q=2: closed form sqrt(3) a^4 / 320.
TRIANGLE_INT_U = 0.086602540378443865


@pytest.mark.parametrize("q", sorted(DISK))
def test_ball_closed_form_matches_quadrature(q):
    T, mass, u0 = ball_torsion_analytic(2, 1.0, q)
    assert T == pytest.approx(DISK[q][0], rel=1e-14)
    assert mass == pytest.approx(DISK[q][1], rel=1e-14)


def test_ball_closed_form_three_dimensions():
    # q=2, n=3: u = (R^2 - r^2)/6, int u = 4 pi R^5 / 45
    T, mass, u0 = ball_torsion_analytic(3, 1.0, 2.0)
    assert T == pytest.approx(4 * math.pi / 45, rel=1e-14)
    assert u0 == pytest.approx(1 / 6)
    assert mass == pytest.approx(4 * math.pi / 9)


@pytest.mark.parametrize("q,tol", [(1.5, 1e-3), (2.0, 1e-3), (3.0, 1.5e-3), (5.0, 3e-3)])
def test_disk_rigidity_and_mass(q, tol):
    rep = compute_torsion(regular_polygon(256), q, TorsionConfig(h=0.04))
    T, mass = DISK[q]
    assert rep.T_q == pytest.approx(T, rel=tol)
    assert rep.measure.total_mass == pytest.approx(mass, rel=tol)
    # rotational symmetry of the measure
    w = rep.measure.weights
    assert w.std() / w.mean() < 0.05


def test_square_series_oracle():
    rep = compute_torsion(box(), 2.0, TorsionConfig(h=0.02))
    assert rep.T_q == pytest.approx(SQUARE_INT_U, rel=1e-3)
    # equal atoms by symmetry
    w = rep.measure.weights
    assert np.ptp(w) / w.mean() < 1e-3


def test_equilateral_triangle_oracle():
    K = regular_polygon(3, 2 / math.sqrt(3))
    rep = compute_torsion(K, 2.0, TorsionConfig(h=0.01))
    assert rep.T_q == pytest.approx(TRIANGLE_INT_U, rel=2e-3)


@pytest.mark.parametrize("q", [1.5, 2.0, 3.0, 5.0])
def test_discrete_energy_identity(q):
    sol = solve_torsion(triangulate(box().polygon, 0.05), q)
    # int |grad u|^q = int u for the exact discrete minimizer
    assert sol.integral_grad_q == pytest.approx(sol.integral_u, rel=1e-8)
    assert sol.rayleigh_discrepancy < 1e-8
    assert sol.energy == pytest.approx((1 / q - 1) * sol.integral_u, rel=1e-8)
    assert sol.u.min() >= 0.0


def test_picard_scheme_agrees_with_newton():
    mesh = triangulate(box().polygon, 0.1)
    a = solve_torsion(mesh, 3.0, tol=1e-10, scheme="newton")
    # lagged diffusivity converges linearly; a loose tolerance keeps this quick
    b = solve_torsion(mesh, 3.0, tol=1e-5, scheme="picard", max_iters=2000)
    assert b.integral_u == pytest.approx(a.integral_u, rel=1e-5)
    assert b.iterations > a.iterations


def test_adjacent_measure_is_first_order_approximation():
    K = box()
    cfg = TorsionConfig(h=0.02)
    flux = compute_torsion(K, 2.0, cfg)
    adj = compute_torsion(K, 2.0, TorsionConfig(h=0.02, measure_method="adjacent"))
    assert flux.identity_residual < adj.identity_residual
    assert adj.measure.total_mass == pytest.approx(flux.measure.total_mass, rel=0.1)


def test_invalid_exponent():
    with pytest.raises(DomainError):
        compute_torsion(box(), 1.0)
    with pytest.raises(DomainError):
        solve_torsion(triangulate(box().polygon, 0.5), 2.0, scheme="bogus")


def test_measure_requires_matching_mesh():
    sol = solve_torsion(triangulate(box().polygon, 0.2), 2.0)
    with pytest.raises(InconsistentMeshError):
        torsional_measure(sol, scale(box(), 2.0))


def test_translation_invariance():
    K = regular_polygon(5)
    a = torsion_report(K, 2.0, TorsionConfig(h=0.04))
    b = torsion_report(translate(K, (0.3, -0.2)), 2.0, TorsionConfig(h=0.04))
    assert b.T_q == pytest.approx(a.T_q, rel=5e-3)
    assert np.allclose(b.measure.weights, a.measure.weights, rtol=2e-2)


def test_mixed_torsion_with_itself_is_rigidity():
    K = regular_polygon(6)
    cfg = TorsionConfig(h=0.04)
    rep = torsion_report(K, 2.0, cfg)
    assert mixed_torsion(K, K, 2.0, cfg) == pytest.approx(rep.T_q, rel=1e-2)


def test_degrees():
    assert homogeneity_degree(2.0) == 4.0
    assert measure_degree(2.0, 0.5) == 3.5
    assert measure_degree(3.0, 1.0) == pytest.approx(2.5)


@settings(max_examples=8)
@given(st.integers(0, 10_000), st.sampled_from([1.5, 2.0, 3.0]))
def test_identity_and_gradient_bound_on_random_polygons(seed, q):
    K = random_polygon(np.random.default_rng(seed))
    rep = compute_torsion(K, q, TorsionConfig(h=0.06))
    assert rep.identity_residual < 2e-2
    assert rep.grad_max <= 1.05 * K.diameter
    assert np.all(rep.measure.weights > 0)


@settings(max_examples=6)
@given(st.integers(0, 10_000), st.sampled_from([1.5, 2.0, 3.0]), st.floats(0.5, 2.0))
def test_dilation_on_morphed_mesh_is_exact(seed, q, s):
    # a dilated mesh carries the exactly dilated discrete solution
    K = random_polygon(np.random.default_rng(seed))
    mesh = triangulate(K.polygon, 0.1)
    a = solve_torsion(mesh, q)
    b = solve_torsion(morph(mesh, scale(K, s).polygon), q)
    Ta, Tb = a.integral_u ** (q - 1), b.integral_u ** (q - 1)
    assert Tb / Ta == pytest.approx(s ** homogeneity_degree(q), rel=1e-7)


def test_identity_residual_helper():
    K = box()
    rep = compute_torsion(K, 2.0, TorsionConfig(h=0.05))
    r = identity_residual(rep.T_q, rep.measure, K, 2.0)
    rhs = 0.25 * float(support(K, K.normals) @ rep.measure.weights)
    assert r == pytest.approx(abs(rep.T_q - rhs) / rep.T_q)


def test_pure_python_backend_gives_same_rigidity():
    code = ("from qtorsion import kernels, compute_torsion, TorsionConfig;"
            "from qtorsion.geometry import regular_polygon;"
            "r = compute_torsion(regular_polygon(6), 3.0, TorsionConfig(h=0.08));"
            "print(kernels.BACKEND, repr(r.T_q))")
    env = dict(os.environ, QTORSION_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True).stdout.split()
    assert out[0] == "numpy"
    here = compute_torsion(regular_polygon(6), 3.0, TorsionConfig(h=0.08)).T_q
    assert float(out[1]) == pytest.approx(here, rel=1e-10)
