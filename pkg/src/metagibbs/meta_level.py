"""Hyper-posteriors over priors.

Finite families (an explicit list of priors on a finite parameter set, or the
family of uniform priors on nonempty subsets) get the exact Gibbs
hyper-posterior ``Pi(j) ∝ Lambda(j) exp(-beta sum_t F_t(j))`` where ``F_t(j)``
is the optimal within-task free energy of task t under prior j.

Continuous families are parametrised as Normal x Gamma hyper-distributions
over Gaussian priors ``N(mu_bar, s2_bar I)`` (one block, or K blocks plus a
Dirichlet over mixture weights). Their fits use the squared-loss surrogate,
which is exact whenever clipping of the loss is inactive: with
``k = 2 alpha n s2_bar`` the optimal free energy of a task with sample mean
``zbar`` and spread ``s2`` is

    s2 + d log(1 + k) / (2 alpha n) + ||mu_bar - zbar||^2 / (1 + k).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import optimize, special
from scipy.cluster.vq import kmeans, vq

from .divergences import (
    CategoricalDist,
    DiagGaussian,
    GammaDist,
    GaussianMixture,
    kl_categorical,
    kl_diag_gaussian,
    kl_gamma,
    kl_hyper_gaussian_gamma,
    kl_multinomial_vs_uniform,
)
from .errors import DomainError, OptimizationFailure
from .numerics import RandomStream, log_sum_exp
from .within_task import log_partition_free_energy

__all__ = [
    "FinitePriorFamily",
    "SubsetPriorFamily",
    "subset_family",
    "meta_empirical_risk_matrix",
    "meta_column_sums",
    "gibbs_expected_values",
    "meta_gibbs_finite",
    "finite_meta_objective",
    "empirical_meta_objective",
    "HyperReference",
    "GaussianGammaHyper",
    "MixtureHyper",
    "UnknownKHyper",
    "GaussianTaskStats",
    "GaussianFit",
    "optimal_sigma2",
    "sigma2_objective",
    "optimal_rate_b",
    "rate_b_objective",
    "optimal_xi2_mixture",
    "xi2_mixture_objective",
    "gamma_expectation",
    "surrogate_moments",
    "gaussian_hyper_objective",
    "population_gaussian_objective",
    "fit_gaussian_hyperposterior",
    "mixture_hyper_objective",
    "fit_mixture_hyperposterior",
    "fit_unknownK_hyperposterior",
    "sample_prior",
]

SUBSET_CAP = 20


# ----------------------------------------------------------------------------
# finite families


@dataclass(frozen=True)
class FinitePriorFamily:
    """J priors on a finite set of size M, stored as a (J, M) log-weight array."""

    log_priors: np.ndarray
    log_lambda: np.ndarray | None = None

    def __post_init__(self):
        lp = np.atleast_2d(np.asarray(self.log_priors, dtype=float))
        if lp.shape[0] < 1:
            raise DomainError("a family needs at least one prior")
        lp = lp - log_sum_exp(lp)[:, None]
        ll = np.full(lp.shape[0], -math.log(lp.shape[0])) if self.log_lambda is None else np.asarray(
            self.log_lambda, dtype=float)
        if ll.shape != (lp.shape[0],):
            raise DomainError("one Lambda weight per prior")
        CategoricalDist(np.exp(ll))  # validates the simplex
        object.__setattr__(self, "log_priors", lp)
        object.__setattr__(self, "log_lambda", ll)

    @property
    def size(self) -> int:
        return self.log_priors.shape[0]

    @property
    def M(self) -> int:
        return self.log_priors.shape[1]

    @property
    def lam(self) -> CategoricalDist:
        return CategoricalDist.from_log(self.log_lambda)


@dataclass(frozen=True)
class SubsetPriorFamily:
    """Uniform priors on every nonempty subset A of {0..M-1}.

    Subset j corresponds to the bitmask j + 1. Lambda draws the cardinality m
    with probability 2^(M-m) / (2^M - 1), then a subset of that size uniformly:
    Lambda(A) = 2^(M-m) / (2^M - 1) / C(M, m).
    """

    M: int
    indicators: np.ndarray = field(repr=False)
    sizes: np.ndarray = field(repr=False)
    log_lambda: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.indicators.shape[0]

    @property
    def lam(self) -> CategoricalDist:
        return CategoricalDist.from_log(self.log_lambda)

    @property
    def log_priors(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.where(self.indicators, -np.log(self.sizes)[:, None], -np.inf)

    def as_finite(self) -> FinitePriorFamily:
        return FinitePriorFamily(self.log_priors, self.log_lambda)


def subset_family(M: int) -> SubsetPriorFamily:
    if not 1 <= M <= SUBSET_CAP:
        raise DomainError(f"subset enumeration supports 1 <= M <= {SUBSET_CAP}, got {M}")
    masks = np.arange(1, 2**M, dtype=np.int64)
    ind = ((masks[:, None] >> np.arange(M)[None, :]) & 1).astype(bool)
    sizes = ind.sum(axis=1)
    log_binom = special.gammaln(M + 1) - special.gammaln(sizes + 1) - special.gammaln(M - sizes + 1)
    log_lam = (M - sizes) * math.log(2.0) - math.log(2.0**M - 1) - log_binom
    return SubsetPriorFamily(M, ind, sizes, log_lam)


def _subset_free_energies(risks, fam: SubsetPriorFamily, an):
    risks = np.atleast_2d(risks)
    mn = risks.min(axis=1, keepdims=True)
    shifted = -an * (risks - mn)
    sums = np.exp(shifted) @ fam.indicators.T.astype(float)
    tiny = sums < 1e-250
    with np.errstate(divide="ignore"):
        logs = np.log(sums)
    if np.any(tiny):
        for t, j in zip(*np.nonzero(tiny)):
            logs[t, j] = log_sum_exp(np.where(fam.indicators[j], shifted[t], -np.inf))
    return mn - (logs - np.log(fam.sizes)[None, :]) / an


def meta_empirical_risk_matrix(risks, family, alpha: float, n: int, chunk: int = 64) -> np.ndarray:
    """(T, J) matrix of optimal within-task free energies.

    ``risks`` is the (T, M) array of empirical risks, one row per task.
    """
    risks = np.atleast_2d(np.asarray(risks, dtype=float))
    an = alpha * n
    if not an > 0:
        raise DomainError("alpha and n must be positive")
    out = np.empty((risks.shape[0], family.size))
    for s in range(0, risks.shape[0], chunk):
        blk = risks[s:s + chunk]
        if isinstance(family, SubsetPriorFamily):
            out[s:s + chunk] = _subset_free_energies(blk, family, an)
        else:
            out[s:s + chunk] = log_partition_free_energy(family.log_priors[None, :, :], blk[:, None, :], alpha, n)
    return out


def meta_column_sums(risks, family, alpha: float, n: int, chunk: int = 64) -> np.ndarray:
    """Column sums of the meta matrix without materialising all of it."""
    risks = np.atleast_2d(np.asarray(risks, dtype=float))
    total = np.zeros(family.size)
    for s in range(0, risks.shape[0], chunk):
        total += meta_empirical_risk_matrix(risks[s:s + chunk], family, alpha, n, chunk).sum(axis=0)
    return total


def gibbs_expected_values(empirical, values, family, alpha: float, n: int) -> np.ndarray:
    """E_{theta ~ rho_j}[values(theta)] for every prior j of the family.

    ``rho_j`` is the Gibbs posterior of prior j given empirical risks. Used to
    evaluate true risks of all posteriors at once.
    """
    empirical = np.asarray(empirical, dtype=float)
    values = np.asarray(values, dtype=float)
    an = alpha * n
    logw = -an * (empirical - empirical.min())
    if isinstance(family, SubsetPriorFamily):
        w = np.exp(logw)
        ind = family.indicators.T.astype(float)
        den = w @ ind
        num = (w * values) @ ind
        bad = den < 1e-250
        out = np.divide(num, den, out=np.zeros_like(num), where=~bad)
        for j in np.nonzero(bad)[0]:
            lw = np.where(family.indicators[j], logw, -np.inf)
            p = np.exp(lw - log_sum_exp(lw))
            out[j] = p @ values
        return out
    lw = family.log_priors + logw[None, :]
    lw = lw - log_sum_exp(lw)[:, None]
    return np.exp(lw) @ values


def meta_gibbs_finite(matrix, log_lambda, beta: float) -> CategoricalDist:
    """Pi(j) ∝ Lambda(j) exp(-beta sum_t matrix[t, j]).

    ``matrix`` may also be given directly as its 1-d vector of column sums.
    """
    if not beta > 0:
        raise DomainError("beta must be positive")
    m = np.asarray(matrix, dtype=float)
    sums = m if m.ndim == 1 else m.sum(axis=0)
    return CategoricalDist.from_log(np.asarray(log_lambda, dtype=float) - beta * sums)


def finite_meta_objective(probs, matrix, lam: CategoricalDist, beta: float) -> float:
    """(1/T) sum_t E_{j ~ Pi}[matrix[t, j]] + KL(Pi || Lambda) / (beta T)."""
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    T = m.shape[0]
    pi = CategoricalDist(probs)
    return float(np.mean(m @ pi.probs) + kl_categorical(pi, lam) / (beta * T))


def empirical_meta_objective(probs, matrix, lam: CategoricalDist, beta: float, proxy) -> float:
    """Average excess free energy over the per-task proxy plus KL(Pi || Lambda)/(beta T).

    ``proxy[t]`` is the task's best achievable empirical risk, min_theta R_hat_t
    on a finite set, or the empirical risk at the oracle minimiser.
    """
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    proxy = np.asarray(proxy, dtype=float)
    if proxy.shape != (m.shape[0],):
        raise DomainError("one proxy value per task")
    return finite_meta_objective(probs, m - proxy[:, None], lam, beta)


# ----------------------------------------------------------------------------
# continuous hyper families


@dataclass(frozen=True)
class HyperReference:
    """Reference (Lambda) parameters: N(0, xi2) x Gamma(shape, rate) per block."""

    xi2: np.ndarray
    shape: np.ndarray
    rate: np.ndarray

    def __post_init__(self):
        for name in ("xi2", "shape", "rate"):
            v = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if np.any(~(v > 0)):
                raise DomainError(f"reference {name} must be positive")
            object.__setattr__(self, name, v)

    def block(self, k: int) -> "HyperReference":
        pick = lambda v: np.broadcast_to(v, (k,)).copy()  # noqa: E731
        return HyperReference(pick(self.xi2), pick(self.shape), pick(self.rate))

    @property
    def mean_variance(self) -> float:
        return float(self.shape[0] / self.rate[0])


@dataclass(frozen=True)
class GaussianGammaHyper:
    """K blocks of N(tau_k, xi2_k I_d) x Gamma(shape_k, rate_k)."""

    tau: np.ndarray
    xi2: np.ndarray
    shape: np.ndarray
    rate: np.ndarray

    def __post_init__(self):
        tau = np.atleast_2d(np.asarray(self.tau, dtype=float))
        k = tau.shape[0]
        object.__setattr__(self, "tau", tau)
        for name in ("xi2", "shape", "rate"):
            v = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (k,)).copy()
            if np.any(~(v > 0)):
                raise DomainError(f"{name} must be positive")
            object.__setattr__(self, name, v)

    @property
    def K(self) -> int:
        return self.tau.shape[0]

    @property
    def d(self) -> int:
        return self.tau.shape[1]

    def kl(self, ref: HyperReference) -> float:
        r = ref.block(self.K)
        return kl_hyper_gaussian_gamma(self.tau, self.xi2, self.shape, self.rate, r.xi2, r.shape, r.rate).value


@dataclass(frozen=True)
class MixtureHyper:
    """Dir(delta) over weights plus a K-block Normal x Gamma; optional distribution over K."""

    delta: np.ndarray
    block: GaussianGammaHyper
    k_probs: np.ndarray | None = None

    def __post_init__(self):
        delta = np.atleast_1d(np.asarray(self.delta, dtype=float))
        if delta.shape != (self.block.K,) or np.any(~(delta > 0)):
            raise DomainError("delta must be positive with one entry per component")
        object.__setattr__(self, "delta", delta)

    @property
    def K(self) -> int:
        return self.block.K

    def kl(self, ref: HyperReference) -> float:
        r = ref.block(self.K)
        b = self.block
        return kl_hyper_gaussian_gamma(b.tau, b.xi2, b.shape, b.rate, r.xi2, r.shape, r.rate,
                                       delta=self.delta, k_probs=self.k_probs).value


@dataclass(frozen=True)
class UnknownKHyper:
    """Distribution over the number of components, with a fitted hyper for each K."""

    fits: dict
    k_probs: np.ndarray
    selected: int
    objectives: dict


@dataclass(frozen=True)
class GaussianTaskStats:
    """Per-task sufficient statistics for Gaussian-noise tasks."""

    zbar: np.ndarray
    spread: np.ndarray
    n: int

    def __post_init__(self):
        z = np.atleast_2d(np.asarray(self.zbar, dtype=float))
        s = np.asarray(self.spread, dtype=float)
        if s.shape != (z.shape[0],):
            raise DomainError("one spread value per task")
        object.__setattr__(self, "zbar", z)
        object.__setattr__(self, "spread", s)

    @classmethod
    def from_samples(cls, samples) -> "GaussianTaskStats":
        zb, sp = [], []
        n = samples[0].n
        for s in samples:
            z = np.asarray(s.observations, dtype=float)
            if len(z) != n:
                raise DomainError("all tasks must share n")
            m = z.mean(axis=0)
            zb.append(m)
            sp.append(np.mean(np.sum((z - m) ** 2, axis=1)))
        return cls(np.array(zb), np.array(sp), n)

    @property
    def T(self) -> int:
        return self.zbar.shape[0]

    @property
    def d(self) -> int:
        return self.zbar.shape[1]

    def noise_per_coordinate(self) -> float:
        """Pooled unbiased estimate of the observation variance per coordinate."""
        if self.n < 2:
            return 0.0
        return float(np.mean(self.spread) * self.n / ((self.n - 1) * self.d))

    def dispersion(self, centers=None) -> float:
        """Plug-in estimate of E min_k ||mu_P - tau_k||^2, corrected for sampling noise."""
        if centers is None:
            raw = np.sum((self.zbar - self.zbar.mean(axis=0)) ** 2, axis=1).mean()
            raw *= self.T / max(self.T - 1, 1)
        else:
            d2 = np.sum((self.zbar[:, None, :] - np.atleast_2d(centers)[None]) ** 2, axis=-1)
            raw = d2.min(axis=1).mean()
        return float(max(0.0, raw - self.d * self.noise_per_coordinate() / self.n))


class GaussianFit(NamedTuple):
    hyper: GaussianGammaHyper
    regime: str
    sigma_hat: float
    eps: float
    objective: float


# closed-form scalar optimisers and the objectives they minimise


def optimal_sigma2(s2_bar, alpha, L, n):
    return s2_bar / (2.0 * alpha * L * s2_bar * n + 1.0)


def sigma2_objective(s2, s2_bar, alpha, L, n):
    return L * s2 + (s2 / s2_bar - 1.0 - np.log(s2 / s2_bar)) / (2.0 * alpha * n)


def optimal_rate_b(a, alpha, L, n, eps):
    if not a > 1:
        raise DomainError("the closed form needs shape a > 1")
    return math.sqrt(alpha * L * a * (a - 1.0) * n / eps)


def rate_b_objective(b, a, alpha, L, n, eps):
    return b * eps / ((a - 1.0) * alpha * n) + L * a / b


def optimal_xi2_mixture(ref_xi2, b, alpha, beta, n, T):
    return ref_xi2 / (1.0 + 4.0 * b * ref_xi2 * beta * T / (alpha * n))


def xi2_mixture_objective(xi2, ref_xi2, b, alpha, beta, n, T, d=1):
    return b * d * xi2 / (alpha * n) + d / (4.0 * beta * T) * (xi2 / ref_xi2 - 1.0 - np.log(xi2 / ref_xi2))


def gamma_expectation(fn, shape, rate, nodes: int = 48):
    """E[fn(X)] for X ~ Gamma(shape, rate) by generalised Gauss-Laguerre quadrature."""
    x, w = special.roots_genlaguerre(nodes, shape - 1.0)
    w = w / math.exp(special.gammaln(shape))
    return np.sum(w * fn(x / rate))


def surrogate_moments(shape, rate, an, L=1.0):
    """E[log(1+k)] and E[1/(1+k)] for k = 2 alpha n L s2_bar, s2_bar ~ Gamma(shape, rate)."""
    c = 2.0 * an * L
    e_log = gamma_expectation(lambda s: np.log1p(c * s), shape, rate)
    e_inv = gamma_expectation(lambda s: 1.0 / (1.0 + c * s), shape, rate)
    return float(e_log), float(e_inv)


def gaussian_hyper_objective(hyper: GaussianGammaHyper, stats: GaussianTaskStats, alpha: float, beta: float,
                             ref: HyperReference) -> float:
    """Meta objective of a one-block hyper under the squared-loss surrogate (exact in mu_bar, quadrature in s2_bar)."""
    if hyper.K != 1:
        raise DomainError("single-block hyper expected")
    an = alpha * stats.n
    d, T = stats.d, stats.T
    e_log, e_inv = surrogate_moments(hyper.shape[0], hyper.rate[0], an)
    fit = np.sum((stats.zbar - hyper.tau[0]) ** 2, axis=1).mean() + d * hyper.xi2[0]
    inner = stats.spread.mean() + d * e_log / (2.0 * an) + fit * e_inv
    return float(inner + hyper.kl(ref) / (beta * T))


def population_gaussian_objective(hyper: GaussianGammaHyper, mu_star, sigma: float, alpha: float, beta: float,
                                  n: int, T: int, ref: HyperReference, L: float = 1.0) -> float:
    """Population meta objective of a one-block hyper for unclipped squared loss.

    E over a new task of the optimal excess free energy
    ``d log(1+k)/(2 alpha n) + ||mu_bar - mu_P||^2 / (1+k)``, averaged over the
    hyper, plus KL(hyper || reference) / (beta T). ``sigma`` is the dispersion
    E||mu_P - mu_star||^2.
    """
    if hyper.K != 1:
        raise DomainError("single-block hyper expected")
    an = alpha * n
    mu_star = np.asarray(mu_star, dtype=float)
    d = mu_star.size
    e_log, e_inv = surrogate_moments(hyper.shape[0], hyper.rate[0], an, L)
    fit = float(np.sum((mu_star - hyper.tau[0]) ** 2)) + sigma + d * hyper.xi2[0]
    return float(d * e_log / (2.0 * an) + fit * e_inv + hyper.kl(ref) / (beta * T))


def _tau_closed_form(stats, shape, rate, alpha, beta, ref_xi2):
    _, e_inv = surrogate_moments(shape, rate, alpha * stats.n)
    return 2.0 * e_inv * stats.zbar.mean(axis=0) / (2.0 * e_inv + 1.0 / (ref_xi2 * beta * stats.T))


def fit_gaussian_hyperposterior(stats: GaussianTaskStats, alpha: float, beta: float, ref: HyperReference,
                                L: float = 1.0, mode: str = "closed-form", eps: float | None = None,
                                threshold: float | None = None, budget: int = 200) -> GaussianFit:
    """Fit the Normal x Gamma hyper-posterior for single-Gaussian priors.

    Regime split: the plug-in dispersion estimate is compared with
    ``threshold`` (default n/T). In the favourable regime ``xi2 = eps`` and
    ``b = sqrt(alpha L a (a-1) n / eps)`` with ``eps`` defaulting to n/T^2; in
    the unfavourable regime ``xi2``, ``a`` and ``b`` stay at the reference values.
    ``a`` is the reference shape in both. ``tau`` is the exact minimiser of the
    surrogate objective given the other parameters. ``mode="stochastic"``
    then refines all parameters by L-BFGS on the surrogate objective and keeps
    the result only if it does not increase the objective.
    """
    T, n, d = stats.T, stats.n, stats.d
    eps = n / T**2 if eps is None else eps
    threshold = n / T if threshold is None else threshold
    a_ref, b_ref, xi_ref = float(ref.shape[0]), float(ref.rate[0]), float(ref.xi2[0])
    if not a_ref > 1:
        raise DomainError("closed-form mode needs reference shape > 1")
    sigma_hat = stats.dispersion()
    if sigma_hat <= threshold:
        regime, xi2, a, b = "favorable", eps, a_ref, optimal_rate_b(a_ref, alpha, L, n, eps)
    else:
        regime, xi2, a, b = "unfavorable", xi_ref, a_ref, b_ref
    tau = _tau_closed_form(stats, a, b, alpha, beta, xi_ref)
    hyper = GaussianGammaHyper(tau[None, :], xi2, a, b)
    obj = gaussian_hyper_objective(hyper, stats, alpha, beta, ref)
    if mode == "closed-form":
        return GaussianFit(hyper, regime, sigma_hat, eps, obj)
    if mode != "stochastic":
        raise DomainError(f"unknown fit mode {mode!r}")

    def unpack(x):
        return GaussianGammaHyper(x[:d][None, :], math.exp(x[d]), 1.0 + math.exp(x[d + 1]), math.exp(x[d + 2]))

    def f(x):
        try:
            return gaussian_hyper_objective(unpack(x), stats, alpha, beta, ref)
        except (DomainError, OverflowError, FloatingPointError):
            return np.inf

    x0 = np.concatenate([tau, [math.log(xi2), math.log(a - 1.0), math.log(b)]])
    with np.errstate(all="ignore"):
        res = optimize.minimize(f, x0, method="L-BFGS-B", options={"maxiter": budget})
    if not np.all(np.isfinite(res.x)):
        raise OptimizationFailure("hyper-parameter refinement diverged")
    if np.isfinite(res.fun) and res.fun <= obj:
        return GaussianFit(unpack(res.x), regime, sigma_hat, eps, float(res.fun))
    return GaussianFit(hyper, regime, sigma_hat, eps, obj)


# ----------------------------------------------------------------------------
# mixtures


def _draw_mixture_params(hyper: MixtureHyper, rng, draws: int):
    blk = hyper.block
    w = rng.dirichlet(hyper.delta, size=draws)
    mu = blk.tau[None] + np.sqrt(blk.xi2)[None, :, None] * rng.standard_normal((draws, blk.K, blk.d))
    s2 = rng.gamma(blk.shape[None, :], 1.0 / blk.rate[None, :], size=(draws, blk.K))
    return w, mu, s2


def mixture_free_energies(w, mu, s2, stats: GaussianTaskStats, alpha: float):
    """Optimal free energy of every task under each drawn mixture prior, shape (draws, T)."""
    an = alpha * stats.n
    k = 2.0 * an * s2  # (S, K)
    d2 = np.sum((mu[:, None, :, :] - stats.zbar[None, :, None, :]) ** 2, axis=-1)  # (S, T, K)
    with np.errstate(divide="ignore"):
        logz = np.log(w)[:, None, :] - 0.5 * stats.d * np.log1p(k)[:, None, :] - an * d2 / (1.0 + k)[:, None, :]
    return stats.spread[None, :] - log_sum_exp(logz, axis=-1) / an


def mixture_hyper_objective(hyper: MixtureHyper, stats: GaussianTaskStats, alpha: float, beta: float,
                            ref: HyperReference, stream: RandomStream | None = None, draws: int = 256) -> float:
    """Monte-Carlo estimate of the meta objective (common random numbers via ``stream``)."""
    stream = stream or RandomStream(0, "mixture-objective")
    w, mu, s2 = _draw_mixture_params(hyper, stream.generator(), draws)
    inner = mixture_free_energies(w, mu, s2, stats, alpha).mean()
    return float(inner + hyper.kl(ref) / (beta * stats.T))


def _kmeans_centers(x, K, rng, restarts=10):
    if K == 1:
        return x.mean(axis=0, keepdims=True)
    best, best_cost = None, np.inf
    for _ in range(restarts):
        seed = int(rng.integers(2**31))
        centers, _ = kmeans(x, K, iter=1, seed=seed)
        if centers.shape[0] < K:
            continue
        _, dist = vq(x, centers)
        cost = float(np.sum(dist**2))
        if cost < best_cost:
            best, best_cost = centers, cost
    if best is None:
        raise OptimizationFailure("clustering produced empty clusters on every restart")
    order = np.lexsort(best.T[::-1])
    return best[order]


def fit_mixture_hyperposterior(stats: GaussianTaskStats, K: int, alpha: float, beta: float, ref: HyperReference,
                               regime: str | None = None, threshold: float | None = None,
                               stream: RandomStream | None = None) -> MixtureHyper:
    """Closed-form Dirichlet-mixture hyper-posterior.

    delta = 2 for every component, Gamma shapes fixed at 2, centres by Lloyd
    clustering of the task sample means (10 restarts). ``b_k`` is T in the
    favourable regime and 1 otherwise; the regime is chosen by comparing the
    plug-in K-centre dispersion with ``threshold`` (default n/T^2) unless given.
    ``xi_k^2 = xi_ref^2 / (1 + 4 b_k xi_ref^2 beta T / (alpha n))``.
    """
    T, n = stats.T, stats.n
    if not 1 <= K <= T:
        raise DomainError(f"need 1 <= K <= T, got K={K}, T={T}")
    stream = stream or RandomStream(0, "mixture-fit")
    tau = _kmeans_centers(stats.zbar, K, stream.child("kmeans", K).generator())
    if regime is None:
        threshold = n / T**2 if threshold is None else threshold
        regime = "favorable" if stats.dispersion(tau) <= threshold else "unfavorable"
    if regime not in ("favorable", "unfavorable"):
        raise DomainError(f"unknown regime {regime!r}")
    r = ref.block(K)
    b = np.full(K, float(T) if regime == "favorable" else 1.0)
    xi2 = optimal_xi2_mixture(r.xi2, b, alpha, beta, n, T)
    return MixtureHyper(np.full(K, 2.0), GaussianGammaHyper(tau, xi2, 2.0, b))


def fit_unknownK_hyperposterior(stats: GaussianTaskStats, K_grid: Sequence[int], alpha: float, beta: float,
                                ref: HyperReference, stream: RandomStream | None = None,
                                threshold: float | None = None, draws: int = 256) -> UnknownKHyper:
    """Fit each K of the grid and keep the best penalised objective (ties to the smallest K).

    The distribution over K is restricted to point masses, whose KL to the
    uniform distribution on {1..T} is log T; it enters as log T / (2 beta T).
    """
    grid = sorted(set(int(k) for k in K_grid))
    if not grid:
        raise DomainError("empty K grid")
    T = stats.T
    stream = stream or RandomStream(0, "unknown-K")
    fits, objs = {}, {}
    for K in grid:
        x = np.zeros(T)
        x[K - 1] = 1.0
        fit = fit_mixture_hyperposterior(stats, K, alpha, beta, ref, threshold=threshold, stream=stream)
        penalty = kl_multinomial_vs_uniform(CategoricalDist(x)) / (2.0 * beta * T)
        objs[K] = mixture_hyper_objective(fit, stats, alpha, beta, ref, stream.child("objective"), draws) + penalty
        fits[K] = fit
    best = min(grid, key=lambda k: (objs[k], k))
    probs = np.zeros(T)
    probs[best - 1] = 1.0
    return UnknownKHyper(fits, probs, best, objs)


# ----------------------------------------------------------------------------
# sampling priors from a hyper-posterior


def sample_prior(hyper, stream: RandomStream, family=None):
    """Draw one prior from a hyper-posterior.

    Categorical hypers return an index (or the family's log-prior row when a
    family is given); one-block hypers return a DiagGaussian; mixture hypers a
    GaussianMixture; unknown-K hypers draw K first.
    """
    rng = stream.generator()
    if isinstance(hyper, CategoricalDist):
        j = int(rng.choice(hyper.size, p=hyper.probs))
        return j if family is None else family.log_priors[j]
    if isinstance(hyper, GaussianGammaHyper):
        mu = hyper.tau + np.sqrt(hyper.xi2)[:, None] * rng.standard_normal(hyper.tau.shape)
        s2 = rng.gamma(hyper.shape, 1.0 / hyper.rate)
        if hyper.K == 1:
            return DiagGaussian(mu[0], np.full(hyper.d, s2[0]))
        comps = tuple(DiagGaussian(mu[k], np.full(hyper.d, s2[k])) for k in range(hyper.K))
        return GaussianMixture(CategoricalDist(np.full(hyper.K, 1.0 / hyper.K)), comps)
    if isinstance(hyper, MixtureHyper):
        w, mu, s2 = _draw_mixture_params(hyper, rng, 1)
        comps = tuple(DiagGaussian(mu[0, k], np.full(hyper.block.d, s2[0, k])) for k in range(hyper.K))
        return GaussianMixture(CategoricalDist(w[0] / w[0].sum()), comps)
    if isinstance(hyper, UnknownKHyper):
        K = int(rng.choice(len(hyper.k_probs), p=hyper.k_probs)) + 1
        if K not in hyper.fits:
            raise DomainError(f"no fitted hyper for K={K}")
        return sample_prior(hyper.fits[K], stream.child("K", K))
    raise DomainError(f"cannot sample from {type(hyper).__name__}")
