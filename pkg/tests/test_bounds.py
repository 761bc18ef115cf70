import math

import numpy as np
import pytest

from metagibbs.bounds import (
    BoundParams,
    bernstein_prefactor,
    concurrent_priors_bound,
    discrete_meta_bound,
    gaussian_G,
    gaussian_isolation_bound,
    gaussian_meta_bound,
    isolation_bound,
    meta_learning_bound,
    mixture_meta_bound,
    default_constants,
    prior_mass_bound,
)
from metagibbs.errors import DomainError


def test_default_constants():
    c, beta = default_constants(1.0)
    assert c == pytest.approx(21.7463, abs=1e-4)
    assert c == 8 * math.e
    assert beta == 1 / (1 + 8 * math.e)
    assert beta == pytest.approx(0.04396, abs=1e-5)
    p = BoundParams()
    assert p.c == c and p.alpha == beta and p.beta == beta
    with pytest.raises(DomainError):
        default_constants(0.0)


def test_default_prefactor_is_two():
    for C in (0.5, 1.0, 7.0, 50.0):
        p = BoundParams(C=C)
        assert bernstein_prefactor(p.alpha, p.c, p.C) == pytest.approx(2.0, rel=1e-14)


def test_isolation_bound_examples():
    p = BoundParams()
    assert isolation_bound(p, 0.3).value == pytest.approx(0.6, rel=1e-14)
    C = 2.0
    alpha = 0.08 / C**2
    q = BoundParams(C=C, alpha=alpha, bernstein=False)
    assert isolation_bound(q, 0.0).value == pytest.approx(0.01, rel=1e-14)
    assert meta_learning_bound(p, 0.3).value == pytest.approx(1.2, rel=1e-14)


def test_prefactor_domain():
    with pytest.raises(DomainError):
        bernstein_prefactor(1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        bernstein_prefactor(0.5, 10.0, 1.0)
    assert bernstein_prefactor(0.9, 100.0, 1.0, bernstein=False) == 1.0


def test_terms_sum_to_value(rng):
    for _ in range(200):
        p = BoundParams(
            C=float(rng.uniform(0.2, 5)), n=int(rng.integers(5, 500)), T=int(rng.integers(2, 2000)),
            d=int(rng.integers(1, 5)), sigma=float(rng.uniform(0, 2)), mu_star_sq=float(rng.uniform(0, 2)),
            ref_xi2=float(rng.uniform(0.1, 3)), ref_shape=float(rng.uniform(1.5, 4)),
            ref_rate=float(rng.uniform(0.5, 4)), K=int(rng.integers(1, 3)), sigma_K=float(rng.uniform(0, 1)))
        for rep in (isolation_bound(p, float(rng.uniform())), meta_learning_bound(p, float(rng.uniform())),
                    gaussian_meta_bound(p), gaussian_isolation_bound(p), mixture_meta_bound(p)):
            assert rep.value == pytest.approx(math.fsum(rep.terms.values()), abs=1e-15 * max(1, abs(rep.value)))


def test_prior_mass_examples():
    p = BoundParams(alpha=math.e, n=1, d_pi=1.0, kappa_pi=1.0)
    rep = prior_mass_bound(p)
    assert rep.value == pytest.approx(2 / math.e, abs=1e-15)
    assert rep.terms["mass"] == 0.0
    assert prior_mass_bound(p.with_(kappa_pi=3.0)).terms["mass"] == pytest.approx(2 * math.log(3) / math.e)
    with pytest.raises(DomainError):
        prior_mass_bound(p.with_(d_pi=10.0))
    general = prior_mass_bound(BoundParams(n=100, bernstein=False))
    assert general.regime == "general" and general.value > 0


def test_prior_mass_monotone_in_n(rng):
    for _ in range(1000):
        d = float(rng.uniform(0.5, 5))
        alpha = float(rng.uniform(0.01, 1))
        n = int(math.ceil(math.e * d / alpha)) + int(rng.integers(0, 1000))
        p = BoundParams(alpha=alpha, n=n, d_pi=d, kappa_pi=float(rng.uniform(1, 10)))
        assert prior_mass_bound(p.with_(n=2 * n)).value < prior_mass_bound(p).value


def test_concurrent_examples():
    assert concurrent_priors_bound([0.05], 1, 0.3, 10).value == pytest.approx(0.2)
    assert concurrent_priors_bound([0.1, 0.2], 2, 1.0, 4).value == pytest.approx(0.4 + math.log(2), abs=1e-15)
    assert concurrent_priors_bound([0.2, 0.1], 2, 1.0, 4).value == concurrent_priors_bound([0.1, 0.2], 2, 1.0, 4).value
    with pytest.raises(DomainError):
        concurrent_priors_bound([], 2, 1.0, 4)


def test_discrete_examples():
    rep = discrete_meta_bound(2, 8, 1.0, 1.0, 100, 100)
    assert rep.value == pytest.approx(4 * math.log(2) / 100 + 8 * math.log(8 * math.e) / 100, abs=1e-15)
    one = discrete_meta_bound(1, 8, 0.5, 0.25, 40, 100)
    assert one.terms["within_task"] == 0.0
    assert one.value == pytest.approx(4 * math.log(2 * math.e * 8) / 25, abs=1e-15)
    full = discrete_meta_bound(8, 8, 0.5, 0.25, 40, 10**6)
    assert full.terms["within_task"] == pytest.approx(full.extras["isolation_4"])
    assert full.terms["meta"] == pytest.approx(4 * 8 * math.log(2 * math.e) / (0.25 * 10**6))
    with pytest.raises(DomainError):
        discrete_meta_bound(9, 8, 1.0, 1.0, 1, 1)


def test_gaussian_large_T_vanishes():
    p = BoundParams(n=50, T=10**9, d=2, sigma=0.0)
    assert gaussian_meta_bound(p).value <= 1e-6


def test_gaussian_sigma_enters_linearly():
    p = BoundParams(n=50, T=100, d=2, sigma=3.0, ref_xi2=0.5)
    q = p.with_(sigma=6.0)
    a, b = gaussian_meta_bound(p), gaussian_meta_bound(q)
    assert a.regime == b.regime == "unfavorable"
    shape, rate = p.ref_shape, p.ref_rate
    inc = rate * 3.0 / ((shape - 1) * p.alpha * p.n)
    assert b.extras["unfavorable_branch"] - a.extras["unfavorable_branch"] == pytest.approx(inc, rel=1e-12)
    assert b.extras["favorable_branch"] == a.extras["favorable_branch"]


def test_gaussian_domain():
    with pytest.raises(DomainError):
        BoundParams(d=0)
    assert np.isfinite(gaussian_meta_bound(BoundParams(d=1, n=10, T=10)).value)
    with pytest.raises(DomainError):
        gaussian_meta_bound(BoundParams(ref_shape=1.0))


def test_gaussian_G_can_be_negative():
    # small reference variance and a large loss bound drive the printed constant below zero
    p = BoundParams(C=50.0, n=50, T=800, d=2, ref_xi2=0.05)
    assert gaussian_G(p) < 0
    rep = gaussian_meta_bound(p)
    assert rep.extras["G"] == gaussian_G(p)


def test_gaussian_isolation_bound_formula():
    p = BoundParams(n=20, d=3, sigma=0.4, mu_star_sq=0.1)
    k = 2 * p.alpha * 20 * 1.0
    expected = 2 * (3 * math.log1p(k) / (2 * p.alpha * 20) + 0.5 / (1 + k))
    assert gaussian_isolation_bound(p).value == pytest.approx(expected, rel=1e-14)


def test_mixture_examples():
    p = BoundParams(n=50, T=100, d=2, K=1, sigma_K=0.0, mu_star_sq=1.0)
    rep = mixture_meta_bound(p)
    assert rep.regime == "favorable"
    assert rep.terms["gaussian"] == pytest.approx(8 * 2 / 100 + 4 / (p.alpha * 100), rel=1e-14)
    big = mixture_meta_bound(p.with_(sigma_K=5.0))
    an = p.alpha * 50
    assert big.regime == "unfavorable"
    assert big.terms["gaussian"] == pytest.approx(2 * 2 * math.log1p(4 * an) / an + 4 * 5.0 / an, rel=1e-14)
    unk = mixture_meta_bound(p, known_K=False, K_grid=[1])
    assert unk.value == pytest.approx(rep.value + 2 * math.log(100) / (p.beta * 100), rel=1e-14)


def test_mixture_unknown_k_takes_infimum():
    p = BoundParams(n=50, T=100, d=2, tau_sq=(9.0, 9.0, 0.0, 0.0))
    sig = {1: 9.0, 2: 0.0, 4: 0.0}
    rep = mixture_meta_bound(p, known_K=False, K_grid=[1, 2, 4], sigma_K=sig)
    vals = {K: mixture_meta_bound(p.with_(K=K, sigma_K=sig[K])).value for K in (1, 2, 4)}
    best = min(vals, key=vals.get)
    assert rep.extras["K"] == best
    assert rep.value == pytest.approx(vals[best] + 2 * math.log(100) / (p.beta * 100), rel=1e-14)
    with pytest.raises(DomainError):
        mixture_meta_bound(p.with_(K=200))
