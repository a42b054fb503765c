import math

import numpy as np
import pytest

from qtorsion.errors import DomainError
from qtorsion.geometry import box, regular_polygon, scale
from qtorsion.torsion import TorsionConfig, torsion_report
from qtorsion.verify import (CheckResult, Corpus, aleksandrov_convergence_check,
                             check_gradient_bound, check_homogeneity, check_identity,
                             check_lp_inequalities, fan_p_sum, fd_derivative, random_polygon,
                             seeded_pentagon, variational_derivative)

CFG = TorsionConfig(h=0.06)


@pytest.fixture(scope="module")
def small():
    return Corpus.generate(3, n_bodies=3, n_pairs=2)


def test_check_result_serialization():
    r = CheckResult("x", 2, 0.5, 1.0, [{"a": 1}])
    assert r.pass_
    d = r.to_dict()
    assert d["pass"] is True and "pass_" not in d
    assert not CheckResult("y", 1, math.inf, 1.0).pass_


def test_corpus_is_reproducible():
    a, b = Corpus.generate(5, 4, 2), Corpus.generate(5, 4, 2)
    for K, L in zip(a.bodies, b.bodies):
        assert np.array_equal(K.offsets, L.offsets) and np.array_equal(K.angles, L.angles)
    assert not np.array_equal(Corpus.generate(6, 1, 0).bodies[0].offsets, a.bodies[0].offsets)


def test_random_polygon_constraints():
    rng = np.random.default_rng(0)
    for _ in range(50):
        K = random_polygon(rng)
        assert 4 <= len(K) <= 12 and not K.degenerate
        assert K.polygon.edge_lengths.min() > 0.05 and 1.0 <= K.diameter <= 3.0


def test_single_body_checks_pass(small):
    for r in (check_identity(small, 2.0, CFG), check_homogeneity(small, 3.0, cfg=CFG),
              check_gradient_bound(small, 1.5, CFG)):
        assert r.pass_, r
        assert r.samples == 3


def test_homogeneity_details_report_exponent(small):
    r = check_homogeneity(small, 2.0, cfg=CFG)
    for d in r.details:
        assert d["exponent"] == pytest.approx(4.0, abs=0.03)


def test_lp_inequalities_need_p_above_one(small):
    with pytest.raises(DomainError):
        check_lp_inequalities(small, 1.0, 2.0)


def test_fan_p_sum_at_zero_is_body():
    K = regular_polygon(5)
    assert np.allclose(fan_p_sum(K, box(), 0.0, 1.5).offsets, K.support_numbers)


def test_variational_derivative_on_dilation_curve():
    # T(K +_p t.K) = T((1+t)^(1/p) K): derivative d/p T(K) at t = 0
    K = regular_polygon(6)
    cfg = TorsionConfig(h=0.04)
    T = torsion_report(K, 2.0, cfg).T_q
    assert variational_derivative(K, K, 2.0, 2.0, cfg) == pytest.approx(4.0 / 2.0 * T, rel=5e-3)
    assert fd_derivative(K, K, 2.0, 2.0, cfg=cfg) == pytest.approx(4.0 / 2.0 * T, rel=1e-4)


def test_fd_derivative_richardson_agrees():
    K, L = regular_polygon(5), scale(box(), 0.5)
    cfg = TorsionConfig(h=0.06)
    a = fd_derivative(K, L, 1.5, 2.0, cfg=cfg)
    b = fd_derivative(K, L, 1.5, 2.0, cfg=cfg, richardson=True)
    assert b == pytest.approx(a, rel=1e-4)


@pytest.mark.parametrize("kind", ["inflation", "oscillation"])
def test_aleksandrov_checks(kind):
    r = aleksandrov_convergence_check(regular_polygon(7), kind=kind)
    assert r.pass_
    d = [x["hausdorff"] for x in r.details]
    assert all(b < a for a, b in zip(d, d[1:]))


def test_seeded_pentagon_is_reproducible_and_asymmetric():
    P = seeded_pentagon(7)
    assert np.array_equal(P.offsets, seeded_pentagon(7).offsets)
    assert len(P) == 5 and np.ptp(P.polygon.edge_lengths) > 0.1
