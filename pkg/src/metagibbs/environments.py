"""Bounded losses and synthetic task environments with exact oracle risks.

Three settings are provided:

* ``DiscreteEnvironment``: finite parameter set {0, ..., M-1}, zero-one loss.
  A task has a label ``theta_star`` drawn uniformly from ``support``; an
  observation equals ``theta_star`` with probability ``1 - p`` and is uniform
  over the other ``M - 1`` labels otherwise.
* ``GaussianEnvironment``: parameters in R^d, clipped squared loss. A task has
  mean ``mu_P ~ N(mu_star, spread2 I)`` and observations ``N(mu_P, noise2 I)``.
* ``MixtureEnvironment``: as above but ``mu_P`` is drawn around one of ``K``
  centers chosen uniformly.

Tasks carry their own risk evaluators so excess risks never need nested
Monte-Carlo when a closed form exists.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, optimize, stats

from .errors import DomainError, UnsupportedEnvironment
from .numerics import RandomStream

__all__ = [
    "ZeroOneLoss",
    "ClippedSquaredLoss",
    "DiscreteEnvironment",
    "GaussianEnvironment",
    "MixtureEnvironment",
    "DiscreteTask",
    "GaussianTask",
    "TaskSample",
    "sample_task",
    "sample_dataset",
    "true_risk",
    "gaussian_expected_risk",
    "chernoff_tail",
    "bernstein_constant_estimate",
    "sample_discrete_risks",
    "sample_gaussian_stats",
]

# Clipping is treated as inactive when P(loss > C) is below this.
CLIP_NEGLIGIBLE = 1e-12


@dataclass(frozen=True)
class ZeroOneLoss:
    bound: float = 1.0
    kind: str = "zero-one"

    def __call__(self, z, theta):
        return (np.asarray(z) != np.asarray(theta)).astype(float)


@dataclass(frozen=True)
class ClippedSquaredLoss:
    """min(C, ||theta - z||^2) over the last axis."""

    bound: float
    kind: str = "clipped-squared"

    def __post_init__(self):
        if not self.bound > 0:
            raise DomainError("clip level must be positive")

    def __call__(self, z, theta):
        diff = np.asarray(theta, dtype=float) - np.asarray(z, dtype=float)
        return np.minimum(self.bound, np.sum(diff * diff, axis=-1))


def _default_clip(d, noise2, offset):
    return 25.0 * (noise2 * d + offset**2)


@dataclass(frozen=True)
class DiscreteEnvironment:
    M: int
    support: tuple = (0,)
    flip_prob: float = 0.3

    def __post_init__(self):
        sup = tuple(int(s) for s in self.support)
        if self.M < 2:
            raise DomainError("need at least two labels")
        if not sup or len(set(sup)) != len(sup) or min(sup) < 0 or max(sup) >= self.M:
            raise DomainError("support must be distinct labels in [0, M)")
        if not 0.0 <= self.flip_prob < 1.0:
            raise DomainError("flip probability must lie in [0, 1)")
        object.__setattr__(self, "support", sup)

    @property
    def m_star(self) -> int:
        return len(self.support)

    @property
    def loss(self) -> ZeroOneLoss:
        return ZeroOneLoss()

    @property
    def parameters(self) -> np.ndarray:
        return np.arange(self.M)

    @property
    def other_prob(self) -> float:
        return self.flip_prob / (self.M - 1)

    @property
    def gap(self) -> float:
        return 1.0 - self.other_prob - self.flip_prob


@dataclass(frozen=True)
class GaussianEnvironment:
    d: int
    mu_star: np.ndarray
    spread2: float = 0.0
    noise2: float = 1.0
    clip: float | None = None
    L: float = 1.0

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu_star, dtype=float))
        if self.d < 1 or mu.shape != (self.d,):
            raise DomainError("mu_star must have length d >= 1")
        if self.spread2 < 0 or self.noise2 < 0:
            raise DomainError("variances must be nonnegative")
        object.__setattr__(self, "mu_star", mu)
        if self.clip is None:
            offset = np.linalg.norm(mu) + 3.0 * np.sqrt(self.d * self.spread2)
            object.__setattr__(self, "clip", _default_clip(self.d, self.noise2, offset))

    @property
    def loss(self) -> ClippedSquaredLoss:
        return ClippedSquaredLoss(self.clip)

    @property
    def sigma(self) -> float:
        """Dispersion E||mu_P - mu_star||^2 = d * spread2."""
        return self.d * self.spread2


@dataclass(frozen=True)
class MixtureEnvironment:
    centers: np.ndarray
    spread2: float = 0.0
    noise2: float = 1.0
    clip: float | None = None
    L: float = 1.0

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        if self.spread2 < 0 or self.noise2 < 0:
            raise DomainError("variances must be nonnegative")
        object.__setattr__(self, "centers", c)
        if self.clip is None:
            offset = np.max(np.linalg.norm(c, axis=1)) + 3.0 * np.sqrt(c.shape[1] * self.spread2)
            object.__setattr__(self, "clip", _default_clip(c.shape[1], self.noise2, offset))

    @property
    def K(self) -> int:
        return self.centers.shape[0]

    @property
    def d(self) -> int:
        return self.centers.shape[1]

    @property
    def loss(self) -> ClippedSquaredLoss:
        return ClippedSquaredLoss(self.clip)

    @property
    def sigma_k(self) -> float:
        """Dispersion around the generating centers; upper-bounds the K-center optimum."""
        return self.d * self.spread2


# ----------------------------------------------------------------------------
# tasks


@dataclass(frozen=True)
class DiscreteTask:
    M: int
    theta_star: int
    flip_prob: float

    @property
    def other_prob(self) -> float:
        return self.flip_prob / (self.M - 1)

    @property
    def min_risk(self) -> float:
        return self.flip_prob

    @property
    def loss(self) -> ZeroOneLoss:
        return ZeroOneLoss()

    def risk(self, theta):
        theta = np.asarray(theta)
        return np.where(theta == self.theta_star, self.flip_prob, 1.0 - self.other_prob)

    def risk_vector(self) -> np.ndarray:
        return self.risk(np.arange(self.M)).astype(float)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        flip = rng.random(n) < self.flip_prob
        other = rng.integers(0, self.M - 1, n)
        other = other + (other >= self.theta_star)
        return np.where(flip, other, self.theta_star)


@dataclass(frozen=True)
class GaussianTask:
    mean: np.ndarray
    noise2: float
    clip: float

    @property
    def d(self) -> int:
        return self.mean.size

    @property
    def theta_star(self) -> np.ndarray:
        return self.mean

    @property
    def loss(self) -> ClippedSquaredLoss:
        return ClippedSquaredLoss(self.clip)

    @property
    def min_risk(self) -> float:
        return float(gaussian_expected_risk(self.mean, 0.0, self.mean, self.noise2, self.clip))

    def risk(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.ndim == 1:
            return float(gaussian_expected_risk(theta, 0.0, self.mean, self.noise2, self.clip))
        return np.array([gaussian_expected_risk(t, 0.0, self.mean, self.noise2, self.clip) for t in theta])

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.mean + np.sqrt(self.noise2) * rng.standard_normal((n, self.d))


@dataclass(frozen=True)
class TaskSample:
    observations: np.ndarray
    task: object = field(repr=False)

    def __post_init__(self):
        if len(self.observations) < 1:
            raise DomainError("a sample needs n >= 1 observations")

    @property
    def n(self) -> int:
        return len(self.observations)


def sample_task(env, stream: RandomStream):
    rng = stream.generator()
    if isinstance(env, DiscreteEnvironment):
        star = env.support[int(rng.integers(env.m_star))]
        return DiscreteTask(env.M, star, env.flip_prob)
    if isinstance(env, GaussianEnvironment):
        mean = env.mu_star + np.sqrt(env.spread2) * rng.standard_normal(env.d)
        return GaussianTask(mean, env.noise2, env.clip)
    if isinstance(env, MixtureEnvironment):
        k = int(rng.integers(env.K))
        mean = env.centers[k] + np.sqrt(env.spread2) * rng.standard_normal(env.d)
        return GaussianTask(mean, env.noise2, env.clip)
    raise UnsupportedEnvironment(type(env).__name__)


def sample_dataset(task, n: int, stream: RandomStream) -> TaskSample:
    if n < 1:
        raise DomainError("n must be >= 1")
    return TaskSample(task.sample(n, stream.generator()), task)


def true_risk(task, theta):
    return task.risk(theta)


# ----------------------------------------------------------------------------
# clipped squared risk under Gaussian parameter uncertainty


def chernoff_tail(delta, scales, level) -> float:
    """Chernoff bound on P(sum_i (delta_i + sqrt(s_i) g_i)^2 >= level)."""
    delta = np.asarray(delta, dtype=float)
    s = np.asarray(scales, dtype=float)
    mean = np.sum(delta**2 + s)
    if level <= mean:
        return 1.0
    smax = s.max()
    if smax == 0:
        return 0.0

    def log_mgf_gap(t):
        denom = 1.0 - 2.0 * t * s
        return -t * level + np.sum(-0.5 * np.log(denom) + t * delta**2 / denom)

    res = optimize.minimize_scalar(log_mgf_gap, bounds=(0.0, 0.5 / smax * (1 - 1e-9)), method="bounded")
    return float(min(1.0, np.exp(min(0.0, res.fun))))


def gaussian_expected_risk(m, v, mu, noise2, clip, mc_draws: int = 200_000) -> float:
    """E min(C, ||theta - Z||^2) for theta ~ N(m, v I), Z ~ N(mu, noise2 I).

    ``v`` may be a scalar or a per-coordinate vector. The closed form
    ``||m - mu||^2 + sum(v + noise2)`` is used when the clipping probability
    is below ``CLIP_NEGLIGIBLE``; otherwise an isotropic total variance is
    integrated exactly against the noncentral chi-square tail, and an
    anisotropic one falls back to a fixed-seed Monte-Carlo average.
    """
    m = np.asarray(m, dtype=float)
    delta = m - np.asarray(mu, dtype=float)
    s = np.broadcast_to(np.asarray(v, dtype=float) + noise2, delta.shape)
    d2 = float(np.sum(delta**2))
    if chernoff_tail(delta, s, clip) < CLIP_NEGLIGIBLE:
        return d2 + float(np.sum(s))
    if np.all(s == s[0]):
        scale = float(s[0])
        if scale == 0:
            return min(clip, d2)
        lam = d2 / scale
        dist = stats.ncx2(delta.size, lam) if lam > 0 else stats.chi2(delta.size)
        upper = clip / scale
        val, _ = integrate.quad(dist.sf, 0.0, upper, limit=200, epsabs=1e-12, epsrel=1e-10)
        return scale * val
    rng = np.random.default_rng(0)
    x = delta + np.sqrt(s) * rng.standard_normal((mc_draws, delta.size))
    return float(np.mean(np.minimum(clip, np.sum(x * x, axis=1))))


# ----------------------------------------------------------------------------
# within-task Bernstein constant


def bernstein_constant_estimate(env, grid: Sequence, reps: int = 20, stream: RandomStream | None = None,
                                mc_draws: int = 100_000) -> float:
    """Estimate sup V(theta, theta*) / (R(theta) - R*) over sampled tasks and grid points.

    V is the second moment of the loss difference. Discrete environments are
    exact; Gaussian ones use the unclipped closed form ``||delta||^2 + 4 noise2``
    when clipping is negligible and Monte-Carlo otherwise. Grid points that
    coincide with a task's minimizer are skipped. Returns ``inf`` if some point
    has zero excess but nonzero variance.
    """
    grid = list(grid)
    if not grid:
        raise DomainError("empty grid")
    stream = stream or RandomStream(0, "bernstein-constant")
    worst = 0.0
    if isinstance(env, DiscreteEnvironment):
        p, q = env.flip_prob, env.other_prob
        pts = [int(g) for g in grid]
        # every task looks the same up to relabelling
        if any(g not in env.support or env.m_star > 1 for g in pts):
            var = (1.0 - p) + q
            excess = env.gap
            if excess < 1e-12:
                return np.inf if var > 0 else 0.0
            worst = var / excess
        return float(worst)
    for r in range(reps):
        task = sample_task(env, stream.child("task", r))
        for g in grid:
            theta = np.asarray(g, dtype=float)
            delta = theta - task.mean
            d2 = float(delta @ delta)
            if d2 == 0.0:
                continue
            if chernoff_tail(delta, np.full(env.d, env.noise2), env.clip) < CLIP_NEGLIGIBLE:
                worst = max(worst, d2 + 4.0 * env.noise2)
                continue
            rng = stream.child("mc", r).generator()
            z = task.sample(mc_draws, rng)
            diff = task.loss(z, theta) - task.loss(z, task.mean)
            excess = task.risk(theta) - task.min_risk
            var = float(np.mean(diff**2))
            if excess < 1e-12:
                if var > 0:
                    return np.inf
                continue
            worst = max(worst, var / excess)
    return float(worst)


# ----------------------------------------------------------------------------
# batched sampling used by the experiment drivers


def sample_discrete_risks(env: DiscreteEnvironment, T: int, n: int, stream: RandomStream):
    """Empirical zero-one risks of T fresh tasks with n observations each.

    Returns ``(risks, stars)`` with ``risks`` of shape (T, M). Counts are drawn
    from the exact multinomial law of the observation model.
    """
    rng = stream.generator()
    stars = np.asarray(env.support)[rng.integers(env.m_star, size=T)]
    flips = rng.binomial(n, env.flip_prob, size=T)
    others = rng.multinomial(flips, np.full(env.M - 1, 1.0 / (env.M - 1)))
    counts = np.zeros((T, env.M))
    rows = np.arange(T)
    # shift the M-1 "other" cells around the star label
    idx = np.arange(env.M - 1)[None, :]
    labels = idx + (idx >= stars[:, None])
    np.put_along_axis(counts, labels, others.astype(float), axis=1)
    counts[rows, stars] = n - flips
    return 1.0 - counts / n, stars


def sample_gaussian_stats(env, T: int, n: int, stream: RandomStream):
    """Task means and sufficient statistics for T Gaussian-noise tasks.

    Returns ``(mu_P, zbar, spread)`` where ``zbar`` is the sample mean and
    ``spread = (1/n) sum_i ||Z_i - zbar||^2``; both are drawn from their exact
    joint law (independent normal and scaled chi-square).
    """
    rng = stream.generator()
    d = env.d
    if isinstance(env, GaussianEnvironment):
        centers = np.broadcast_to(env.mu_star, (T, d))
    elif isinstance(env, MixtureEnvironment):
        centers = env.centers[rng.integers(env.K, size=T)]
    else:
        raise UnsupportedEnvironment(type(env).__name__)
    mu = centers + np.sqrt(env.spread2) * rng.standard_normal((T, d))
    zbar = mu + np.sqrt(env.noise2 / n) * rng.standard_normal((T, d))
    spread = env.noise2 * rng.chisquare(d * (n - 1), size=T) / n if n > 1 else np.zeros(T)
    return mu, zbar, spread
