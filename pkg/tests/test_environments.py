import math

import numpy as np
import pytest

from metagibbs.environments import (
    ClippedSquaredLoss,
    DiscreteEnvironment,
    DiscreteTask,
    GaussianEnvironment,
    GaussianTask,
    MixtureEnvironment,
    ZeroOneLoss,
    bernstein_constant_estimate,
    gaussian_expected_risk,
    sample_dataset,
    sample_discrete_risks,
    sample_gaussian_stats,
    sample_task,
)
from metagibbs.errors import DomainError
from metagibbs.numerics import RandomStream


def test_losses():
    assert ZeroOneLoss()(np.array([1, 2]), 2).tolist() == [1.0, 0.0]
    loss = ClippedSquaredLoss(4.0)
    assert loss(np.array([0.0, 1.0]), np.array([0.0, 0.0])) == pytest.approx(1.0)
    assert loss(np.array([5.0]), np.array([0.0])) == pytest.approx(4.0)
    with pytest.raises(DomainError):
        ClippedSquaredLoss(0.0)


def test_discrete_env_validation():
    with pytest.raises(DomainError):
        DiscreteEnvironment(1)
    with pytest.raises(DomainError):
        DiscreteEnvironment(4, support=(4,))
    with pytest.raises(DomainError):
        DiscreteEnvironment(4, flip_prob=1.0)


def test_singleton_support_gives_same_minimiser():
    env = DiscreteEnvironment(6, support=(2,))
    s = RandomStream(1, "env")
    assert {sample_task(env, s.child(i)).theta_star for i in range(50)} == {2}


def test_gaussian_without_spread_has_fixed_mean():
    env = GaussianEnvironment(2, [0.5, -1.0], spread2=0.0)
    s = RandomStream(1, "env")
    for i in range(10):
        np.testing.assert_array_equal(sample_task(env, s.child(i)).mean, env.mu_star)
    assert env.sigma == 0.0


def test_gaussian_spread_matches_dispersion():
    env = GaussianEnvironment(2, [0.0, 0.0], spread2=0.5)
    mu, _, _ = sample_gaussian_stats(env, 100_000, 10, RandomStream(2, "spread"))
    dev = np.sum(mu**2, axis=1)
    se = dev.std(ddof=1) / math.sqrt(dev.size)
    assert abs(dev.mean() - env.sigma) <= 3 * se
    assert env.sigma == pytest.approx(1.0)


def test_noiseless_observations():
    s = RandomStream(3, "obs")
    task = DiscreteTask(5, 3, 0.0)
    assert set(sample_dataset(task, 100, s).observations.tolist()) == {3}
    g = GaussianTask(np.array([1.0, 2.0]), 0.0, 50.0)
    obs = sample_dataset(g, 20, s).observations
    np.testing.assert_array_equal(obs, np.broadcast_to([1.0, 2.0], obs.shape))


def test_discrete_observation_frequency():
    task = DiscreteTask(4, 1, 0.3)
    z = sample_dataset(task, 100_000, RandomStream(4, "freq")).observations
    hit = (z == 1).astype(float)
    assert abs(hit.mean() - 0.7) <= 3 * hit.std(ddof=1) / math.sqrt(hit.size)


def test_task_risks():
    task = DiscreteTask(4, 0, 0.3)
    assert task.risk(0) == pytest.approx(0.3)
    assert task.risk(2) == pytest.approx(1 - 0.1)
    assert task.min_risk == pytest.approx(0.3)
    np.testing.assert_allclose(task.risk_vector(), [0.3, 0.9, 0.9, 0.9])
    g = GaussianTask(np.array([0.5]), 0.0, 10.0)
    assert g.risk(np.array([0.5])) == 0.0
    g = GaussianTask(np.array([0.0]), 1.0, 100.0)
    assert g.risk(np.array([0.0])) == pytest.approx(1.0, abs=1e-6)


def test_gaussian_expected_risk_against_monte_carlo():
    rng = np.random.default_rng(5)
    # clipping active: compare the exact integral with plain Monte Carlo
    m, v, mu, noise2, clip = np.array([0.5, -0.2]), 0.3, np.array([0.0, 0.0]), 1.0, 2.0
    x = m + math.sqrt(v + noise2) * rng.standard_normal((1_000_000, 2)) - mu
    vals = np.minimum(clip, np.sum(x * x, axis=1))
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(gaussian_expected_risk(m, v, mu, noise2, clip) - vals.mean()) <= 3 * se
    # negligible clipping: the quadratic closed form
    assert gaussian_expected_risk(m, v, mu, noise2, 1e4) == pytest.approx(0.29 + 2 * 1.3, rel=1e-14)


def test_sample_discrete_risks_consistent_with_counts():
    env = DiscreteEnvironment(5, support=(0, 3), flip_prob=0.4)
    risks, stars = sample_discrete_risks(env, 200, 30, RandomStream(6, "risks"))
    assert risks.shape == (200, 5)
    np.testing.assert_allclose(risks.sum(axis=1), 5 - 1, atol=1e-12)  # counts sum to n
    assert set(stars.tolist()) <= {0, 3}
    counts = np.rint((1 - risks) * 30)
    np.testing.assert_allclose(counts, (1 - risks) * 30, atol=1e-9)


def test_sample_discrete_risks_means():
    env = DiscreteEnvironment(4, support=(0,), flip_prob=0.3)
    risks, _ = sample_discrete_risks(env, 20_000, 10, RandomStream(7, "mean"))
    se = risks.std(axis=0, ddof=1) / math.sqrt(risks.shape[0])
    expected = DiscreteTask(4, 0, 0.3).risk_vector()
    assert np.all(np.abs(risks.mean(axis=0) - expected) <= 3 * se)


def test_gaussian_stats_moments():
    env = GaussianEnvironment(3, [1.0, 0.0, -1.0], spread2=0.0, noise2=2.0)
    n = 8
    _, zbar, spread = sample_gaussian_stats(env, 50_000, n, RandomStream(8, "stats"))
    expected_spread = 2.0 * 3 * (n - 1) / n
    se = spread.std(ddof=1) / math.sqrt(spread.size)
    assert abs(spread.mean() - expected_spread) <= 3 * se
    v = zbar[:, 0]
    assert abs(v.var(ddof=1) - 2.0 / n) < 0.01


def test_mixture_env():
    env = MixtureEnvironment([[3.0, 0.0], [-3.0, 0.0]], spread2=0.1)
    assert env.K == 2 and env.d == 2
    assert env.sigma_k == pytest.approx(0.2)
    assert env.clip > 0


def test_bernstein_constant_discrete_enumeration():
    env = DiscreteEnvironment(4, support=(0,), flip_prob=0.3)
    task = DiscreteTask(4, 0, 0.3)
    z = np.arange(4)
    pz = np.array([0.7, 0.1, 0.1, 0.1])
    worst = 0.0
    for theta in range(1, 4):
        diff = (z != theta).astype(float) - (z != 0).astype(float)
        worst = max(worst, float(pz @ diff**2) / (task.risk(theta) - task.min_risk))
    assert bernstein_constant_estimate(env, range(4)) == pytest.approx(worst, abs=1e-14)


def test_bernstein_constant_zero_variance():
    env = DiscreteEnvironment(4, support=(0,), flip_prob=0.0)
    assert bernstein_constant_estimate(env, [0]) == 0.0


def test_bernstein_constant_gaussian_is_finite():
    env = GaussianEnvironment(1, [0.0], noise2=1.0)
    val = bernstein_constant_estimate(env, [[-1.0], [0.5], [2.0]], reps=5, stream=RandomStream(9, "b"))
    assert np.isfinite(val) and val > 0
