import math

import numpy as np
import pytest

from metagibbs.bernstein_lab import (
    BernsteinEstimate,
    curvature_gap,
    curvature_sweep,
    estimate_pi_star,
    lemma1_gap,
    random_candidate_family,
    verify_meta_bernstein,
    verify_within_task_bernstein,
)
from metagibbs.environments import DiscreteEnvironment, GaussianEnvironment
from metagibbs.errors import DomainError, UnsupportedEnvironment
from metagibbs.meta_level import FinitePriorFamily
from metagibbs.numerics import RandomStream


def test_curvature_examples():
    assert curvature_gap(0.8, 0.8, 0.5, 1.0) == (0.0, 0.0)
    lhs, rhs = curvature_gap(1.0, math.exp(-0.5), 0.5, 1.0)
    f_mid = -math.log((1 + math.exp(-0.5)) / 2) / 0.5
    assert lhs == pytest.approx(1.0, abs=1e-15)
    assert rhs == pytest.approx(16 * math.e * (0.5 - f_mid), rel=1e-13)
    assert rhs >= lhs
    assert lemma1_gap is curvature_gap


def test_curvature_domain():
    with pytest.raises(DomainError):
        curvature_gap(0.1, 0.9, 0.5, 1.0)
    with pytest.raises(DomainError):
        curvature_gap(0.9, 1.1, 0.5, 1.0)
    with pytest.raises(DomainError):
        curvature_gap(0.9, 0.9, 0.0, 1.0)


def test_curvature_sweep_no_violations():
    for C in (0.5, 1.0, 2.0):
        assert curvature_sweep(C, 10_000, RandomStream(0, "sweep").child(C)) == 0


def _two_candidates(M, star):
    dirac = np.full(M, -np.inf)
    dirac[star] = 0.0
    return FinitePriorFamily(np.stack([np.full(M, -math.log(M)), dirac]))


def test_pi_star_picks_concentrated_prior():
    env = DiscreteEnvironment(8, support=(0,), flip_prob=0.3)
    ps = estimate_pi_star(env, _two_candidates(8, 0), 0.05, 20, 2000, RandomStream(1, "ps"))
    assert abs(ps.estimates[0] - ps.estimates[1]) >= 5 * max(ps.ses)
    assert ps.index == 1


def test_pi_star_single_and_duplicates():
    env = DiscreteEnvironment(4, support=(0,), flip_prob=0.3)
    one = FinitePriorFamily(np.log(np.full((1, 4), 0.25)))
    assert estimate_pi_star(env, one, 0.1, 10, 100, RandomStream(0, "one")).index == 0
    fam = _two_candidates(4, 0)
    dup = FinitePriorFamily(np.concatenate([fam.log_priors[[1]], fam.log_priors[[1]], fam.log_priors[[0]]]))
    assert estimate_pi_star(env, dup, 0.1, 10, 500, RandomStream(0, "dup")).index == 0


def test_pi_star_validation():
    env = DiscreteEnvironment(4)
    fam = _two_candidates(4, 0)
    with pytest.raises(DomainError):
        estimate_pi_star(env, fam, 0.1, 10, 10, RandomStream(0, "x"))
    with pytest.raises(UnsupportedEnvironment):
        estimate_pi_star(GaussianEnvironment(1, [0.0]), fam, 0.1, 10, 100, RandomStream(0, "x"))


def test_verify_reference_against_itself_is_zero():
    env = DiscreteEnvironment(8, support=(0,), flip_prob=0.3)
    fam = _two_candidates(8, 0)
    ps = estimate_pi_star(env, fam, 0.05, 20, 500, RandomStream(2, "ps"))
    est = verify_meta_bernstein(env, fam, 0.05, 20, 500, RandomStream(2, "v"), candidates=[ps.index], pi_star=ps)[0]
    assert est.lhs == 0.0 and est.rhs == 0.0 and est.passed
    assert est.c_used == pytest.approx(8 * math.e)
    assert est.c_used == pytest.approx(21.7463, abs=1e-4)


def test_verify_random_candidates_pass():
    env = DiscreteEnvironment(8, support=(0,), flip_prob=0.3)
    alpha = 1 / (1 + 8 * math.e)
    fam = random_candidate_family(8, 21, RandomStream(3, "fam"))
    out = verify_meta_bernstein(env, fam, alpha, 20, 2000, RandomStream(3, "v"))
    assert len(out) == 20
    assert all(e.passed for e in out)
    assert all(e.reference == out[0].reference for e in out)


def test_estimate_validation():
    with pytest.raises(DomainError):
        BernsteinEstimate(0, 0.0, 0.0, 0.0, 0.0, 1, 1.0, True, 0)
    with pytest.raises(DomainError):
        BernsteinEstimate(0, 0.0, 0.0, -1.0, 0.0, 10, 1.0, True, 0)


def test_candidate_family_layout():
    fam = random_candidate_family(6, 5, RandomStream(0, "c"), anchor=2)
    assert fam.size == 5
    assert np.exp(fam.log_priors[0]).tolist() == [0, 0, 1, 0, 0, 0]
    np.testing.assert_allclose(np.exp(fam.log_priors[1]), 1 / 6)
    with pytest.raises(DomainError):
        random_candidate_family(6, 1, RandomStream(0, "c"))


def test_within_task_report():
    env = DiscreteEnvironment(4, support=(0,), flip_prob=0.3)
    rep = verify_within_task_bernstein(env, range(4), ceiling=10.0)
    assert rep.passed and rep.constant == pytest.approx(0.8 / 0.6)
    zero = verify_within_task_bernstein(DiscreteEnvironment(4, flip_prob=0.0), [0])
    assert zero.constant == 0.0 and zero.passed
