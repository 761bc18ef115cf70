"""Empirical checks of the Bernstein-type inequalities.

* :func:`curvature_gap` evaluates both sides of the curvature inequality for
  ``f(u) = -log(u) / tau`` on ``[exp(-C tau), 1]``.
* :func:`estimate_pi_star` approximates the prior minimising the expected
  optimal free energy over a finite candidate set.
* :func:`verify_meta_bernstein` checks ``E[D^2] <= c E[D]`` where ``D`` is the
  paired difference of optimal free energies between a candidate prior and
  the estimated best one, with ``c = 8 e C``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .environments import DiscreteEnvironment, bernstein_constant_estimate, sample_discrete_risks
from .errors import DomainError, UnsupportedEnvironment
from .meta_level import FinitePriorFamily, meta_empirical_risk_matrix
from .numerics import RandomStream

__all__ = [
    "BernsteinEstimate",
    "PiStarEstimate",
    "WithinTaskReport",
    "curvature_gap",
    "curvature_sweep",
    "lemma1_gap",
    "estimate_pi_star",
    "verify_meta_bernstein",
    "verify_within_task_bernstein",
    "random_candidate_family",
    "meta_bernstein_study",
    "SE_MARGIN",
]

SE_MARGIN = 3.0
MIN_REPS = 100


def curvature_gap(x, y, tau: float, C: float):
    """Both sides of (f(x) - f(y))^2 <= (8 e^{2 C tau} / tau) (mean of f - f of mean).

    Vectorised over ``x`` and ``y``. Arguments must lie in [exp(-C tau), 1].
    """
    if not (tau > 0 and C > 0):
        raise DomainError("tau and C must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lo = math.exp(-C * tau)
    # allow one ulp of slack at the lower end, where exp/log round-trip
    if np.any(x < lo * (1 - 1e-15)) or np.any(y < lo * (1 - 1e-15)) or np.any(x > 1) or np.any(y > 1):
        raise DomainError(f"arguments must lie in [{lo:.6g}, 1]")
    fx, fy = -np.log(x) / tau, -np.log(y) / tau
    fm = -np.log(0.5 * (x + y)) / tau
    lhs = (fx - fy) ** 2
    rhs = 8.0 * math.exp(2.0 * C * tau) / tau * (0.5 * (fx + fy) - fm)
    if lhs.ndim == 0:
        return float(lhs), float(rhs)
    return lhs, rhs


# name used by the published interface
lemma1_gap = curvature_gap


def curvature_sweep(C: float, pairs: int, stream: RandomStream, tau: float | None = None) -> int:
    """Number of violations of lhs <= rhs over uniformly drawn pairs (tau = 1/(2C) by default)."""
    tau = 1.0 / (2.0 * C) if tau is None else tau
    lo = math.exp(-C * tau)
    u = stream.generator().uniform(lo, 1.0, size=(2, pairs))
    lhs, rhs = curvature_gap(u[0], u[1], tau, C)
    return int(np.count_nonzero(lhs > rhs))


class PiStarEstimate(NamedTuple):
    index: int
    estimates: np.ndarray
    ses: np.ndarray
    reps: int


@dataclass(frozen=True)
class BernsteinEstimate:
    candidate: int
    lhs: float
    rhs: float
    se_lhs: float
    se_rhs: float
    reps: int
    c_used: float
    passed: bool
    reference: int
    sensitivity_passed: bool | None = None

    def __post_init__(self):
        if self.reps < 2:
            raise DomainError("need at least two replications")
        if self.se_lhs < 0 or self.se_rhs < 0:
            raise DomainError("standard errors must be nonnegative")


class WithinTaskReport(NamedTuple):
    constant: float
    ceiling: float | None
    passed: bool


def _check_env(env):
    if not isinstance(env, DiscreteEnvironment):
        raise UnsupportedEnvironment("the meta-level check needs a finite parameter set")


def _free_energies(env, family: FinitePriorFamily, alpha, n, reps, stream):
    risks, _ = sample_discrete_risks(env, reps, n, stream)
    return meta_empirical_risk_matrix(risks, family, alpha, n)


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.shape[0]))


def estimate_pi_star(env, family: FinitePriorFamily, alpha: float, n: int, reps: int,
                     stream: RandomStream) -> PiStarEstimate:
    """Argmin over candidates of the MC mean optimal free energy (lowest index on ties)."""
    _check_env(env)
    if reps < MIN_REPS:
        raise DomainError(f"need reps >= {MIN_REPS}")
    F = _free_energies(env, family, alpha, n, reps, stream)
    est = F.mean(axis=0)
    se = F.std(axis=0, ddof=1) / math.sqrt(reps)
    return PiStarEstimate(int(np.argmin(est)), est, se, reps)


def _paired(F, j, ref, c):
    delta = F[:, j] - F[:, ref]
    reps = delta.shape[0]
    lhs, se_lhs = _mean_se(delta**2)
    mean, se_mean = _mean_se(delta)
    rhs, se_rhs = c * mean, c * se_mean
    passed = lhs <= rhs + SE_MARGIN * (se_lhs + se_rhs)
    return lhs, rhs, se_lhs, se_rhs, reps, passed


def verify_meta_bernstein(env, family: FinitePriorFamily, alpha: float, n: int, reps: int, stream: RandomStream,
                          C: float = 1.0, candidates: Sequence[int] | None = None,
                          pi_star: PiStarEstimate | None = None) -> list[BernsteinEstimate]:
    """Check E[D^2] <= 8 e C E[D] for each candidate against the estimated best prior.

    The best prior is estimated on an independent child stream unless given.
    Each report also carries the outcome against the second-best candidate
    (``sensitivity_passed``).
    """
    _check_env(env)
    if reps < MIN_REPS:
        raise DomainError(f"need reps >= {MIN_REPS}")
    c = 8.0 * math.e * C
    if pi_star is None:
        pi_star = estimate_pi_star(env, family, alpha, n, reps, stream.child("pi-star"))
    ref = pi_star.index
    order = np.argsort(pi_star.estimates, kind="stable")
    second = int(order[1]) if order.size > 1 else ref
    F = _free_energies(env, family, alpha, n, reps, stream.child("verify"))
    cands = [j for j in range(family.size) if j != ref] if candidates is None else list(candidates)
    out = []
    for j in cands:
        lhs, rhs, se_l, se_r, r, ok = _paired(F, j, ref, c)
        sens = None
        if second != ref and j != second:
            sens = bool(_paired(F, j, second, c)[-1])
        out.append(BernsteinEstimate(int(j), lhs, rhs, se_l, se_r, r, c, bool(ok), ref, sens))
    return out


def verify_within_task_bernstein(env, grid, reps: int = 20, ceiling: float | None = None,
                                 stream: RandomStream | None = None) -> WithinTaskReport:
    """Estimated within-task Bernstein constant and whether it stays below ``ceiling``."""
    const = bernstein_constant_estimate(env, grid, reps, stream)
    passed = bool(np.isfinite(const)) if ceiling is None else bool(const <= ceiling)
    return WithinTaskReport(float(const), ceiling, passed)


def random_candidate_family(M: int, count: int, stream: RandomStream, anchor: int = 0) -> FinitePriorFamily:
    """Candidate priors: a point mass at ``anchor``, the uniform prior, then Dirichlet(1) draws."""
    if count < 2:
        raise DomainError("need at least two candidates")
    rng = stream.generator()
    rows = np.full((count, M), -np.inf)
    rows[0, anchor] = 0.0
    rows[1] = -math.log(M)
    w = rng.dirichlet(np.ones(M), size=count - 2)
    with np.errstate(divide="ignore"):
        rows[2:] = np.log(w)
    return FinitePriorFamily(rows)


def meta_bernstein_study(env, alpha: float, n: int, C: float, candidates: int, tested: int, reps: int,
                         seeds: Sequence[int], label: str = "meta-bernstein") -> list[tuple[int, BernsteinEstimate]]:
    """The meta-level check over several seeds.

    Per seed: draw ``candidates`` priors, estimate the best one, pick
    ``tested`` others at random and verify each on an independent stream.
    Returns (seed, estimate) pairs.
    """
    _check_env(env)
    out = []
    for seed in seeds:
        s = RandomStream(seed, label)
        fam = random_candidate_family(env.M, candidates, s.child("candidates"), anchor=env.support[0])
        ps = estimate_pi_star(env, fam, alpha, n, reps, s.child("pi-star"))
        others = [j for j in range(fam.size) if j != ps.index]
        pick = sorted(int(j) for j in s.child("pick").generator().choice(others, tested, replace=False))
        out.extend((seed, est) for est in verify_meta_bernstein(env, fam, alpha, n, reps, s, C=C,
                                                                candidates=pick, pi_star=ps))
    return out
