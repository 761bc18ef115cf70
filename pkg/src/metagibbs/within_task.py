"""Within-task posteriors: exact Gibbs on a finite set and Gaussian variational fits.

For a prior ``pi`` and empirical risks ``r`` the free energy of a posterior
``rho`` is ``E_rho[r] + KL(rho || pi) / (alpha n)``. The Gibbs posterior
``rho ∝ pi exp(-alpha n r)`` minimises it, with minimum value
``-(1/(alpha n)) log sum pi exp(-alpha n r)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import optimize

from .divergences import CategoricalDist, DiagGaussian, GaussianMixture
from .environments import CLIP_NEGLIGIBLE, ClippedSquaredLoss, TaskSample, chernoff_tail
from .errors import DomainError, InfiniteDivergence, OptimizationFailure
from .numerics import RandomStream, log_sum_exp

__all__ = [
    "DiscretePosterior",
    "FreeEnergyValue",
    "VariationalResult",
    "empirical_risks",
    "gibbs_discrete",
    "free_energy",
    "log_partition_free_energy",
    "dirac_variational_posterior",
    "gaussian_vi_objective",
    "quadratic_gaussian_posterior",
    "quadratic_mixture_posterior",
    "variational_gaussian_posterior",
]

NORMALIZATION_TOL = 1e-10


@dataclass(frozen=True)
class DiscretePosterior:
    log_weights: np.ndarray

    def __post_init__(self):
        lw = np.asarray(self.log_weights, dtype=float)
        if abs(log_sum_exp(lw)) > NORMALIZATION_TOL:
            raise DomainError("posterior log-weights are not normalised")
        object.__setattr__(self, "log_weights", lw)

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_weights)


class FreeEnergyValue(NamedTuple):
    value: float
    risk_part: float
    kl_part: float


def _check_scale(alpha, n):
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if not n > 0:
        raise DomainError("n must be positive")
    return alpha * n


def empirical_risks(sample: TaskSample, loss, thetas) -> np.ndarray:
    """(1/n) sum_i loss(Z_i, theta) for each theta in ``thetas``."""
    z = np.asarray(sample.observations)
    thetas = np.asarray(thetas)
    if thetas.shape[0] == 0:
        raise DomainError("empty parameter set")
    if isinstance(loss, ClippedSquaredLoss):
        vals = loss(z[:, None, :], thetas[None, :, :])
    else:
        vals = loss(z[:, None], thetas[None, :])
    return vals.mean(axis=0)


def gibbs_discrete(log_prior, risks, alpha: float, n: int) -> DiscretePosterior:
    an = _check_scale(alpha, n)
    log_prior = np.asarray(log_prior, dtype=float)
    risks = np.asarray(risks, dtype=float)
    if log_prior.shape != risks.shape:
        raise DomainError("prior and risks must have the same length")
    lw = log_prior - an * risks
    return DiscretePosterior(lw - log_sum_exp(lw))


def _kl_log(log_p, log_q) -> float:
    on = np.isfinite(log_p)
    if np.any(~np.isfinite(log_q[on])):
        raise InfiniteDivergence("posterior puts mass outside the prior support")
    p = np.exp(log_p[on])
    return float(max(0.0, np.sum(p * (log_p[on] - log_q[on]))))


def free_energy(rho: DiscretePosterior, log_prior, alpha: float, n: int, risks) -> FreeEnergyValue:
    an = _check_scale(alpha, n)
    log_prior = np.asarray(log_prior, dtype=float)
    risks = np.asarray(risks, dtype=float)
    if not (rho.log_weights.shape == log_prior.shape == risks.shape):
        raise DomainError("shape mismatch")
    risk_part = float(np.sum(rho.probs * risks))
    kl_part = _kl_log(rho.log_weights, log_prior) / an
    return FreeEnergyValue(risk_part + kl_part, risk_part, kl_part)


def log_partition_free_energy(log_prior, risks, alpha: float, n: int):
    """-(1/(alpha n)) log sum_theta pi(theta) exp(-alpha n R(theta)), over the last axis.

    Broadcasts over leading axes. For ``alpha n max|R|`` below 1e-8 a
    second-order expansion is used, since the direct form loses all digits
    when divided by a vanishing ``alpha n``.
    """
    an = _check_scale(alpha, n)
    log_prior = np.asarray(log_prior, dtype=float)
    risks = np.asarray(risks, dtype=float)
    if an * np.max(np.abs(risks)) < 1e-8:
        w = np.exp(log_prior - np.expand_dims(log_sum_exp(log_prior), -1))
        mean = np.sum(w * risks, axis=-1)
        var = np.sum(w * (risks - np.expand_dims(mean, -1)) ** 2, axis=-1)
        out = mean - 0.5 * an * var
        return float(out) if np.ndim(out) == 0 else out
    out = -log_sum_exp(log_prior, -an * risks) / an
    return out


def dirac_variational_posterior(log_prior, risks, alpha: float, n: int) -> DiscretePosterior:
    """Best point mass: argmin of R(theta) + log(1/pi(theta)) / (alpha n), lowest index on ties."""
    an = _check_scale(alpha, n)
    log_prior = np.asarray(log_prior, dtype=float)
    scores = np.asarray(risks, dtype=float) - log_prior / an
    k = int(np.argmin(scores))
    lw = np.full(log_prior.shape, -np.inf)
    lw[k] = 0.0
    return DiscretePosterior(lw)


# ----------------------------------------------------------------------------
# Gaussian variational family


class VariationalResult(NamedTuple):
    posterior: DiagGaussian
    objective: float
    closed_form: bool


def quadratic_gaussian_posterior(zbar, prior: DiagGaussian, alpha: float, n: int) -> DiagGaussian:
    """Exact optimum for the unclipped squared loss.

    Per coordinate: mean (mu_bar + k zbar)/(1 + k), variance s2_bar/(1 + k)
    with k = 2 alpha n s2_bar.
    """
    an = _check_scale(alpha, n)
    k = 2.0 * an * prior.var
    return DiagGaussian((prior.mean + k * np.asarray(zbar, dtype=float)) / (1.0 + k), prior.var / (1.0 + k))


def quadratic_mixture_posterior(zbar, prior: GaussianMixture, alpha: float, n: int) -> GaussianMixture:
    """Gibbs posterior of a Gaussian-mixture prior under unclipped squared loss.

    Each component updates as in :func:`quadratic_gaussian_posterior`; its
    weight is multiplied by the component evidence
    ``(1 + k)^(-d/2) exp(-alpha n ||mu - zbar||^2 / (1 + k))``.
    """
    an = _check_scale(alpha, n)
    zbar = np.asarray(zbar, dtype=float)
    comps, logw = [], []
    for w, c in zip(prior.weights.probs, prior.components):
        k = 2.0 * an * c.var
        comps.append(DiagGaussian((c.mean + k * zbar) / (1.0 + k), c.var / (1.0 + k)))
        with np.errstate(divide="ignore"):
            logw.append(np.log(w) - 0.5 * np.sum(np.log1p(k)) - an * np.sum((c.mean - zbar) ** 2 / (1.0 + k)))
    return GaussianMixture(CategoricalDist.from_log(np.array(logw)), tuple(comps))


def _kl_to_prior(mean, var, prior: DiagGaussian):
    ratio = var / prior.var
    return 0.5 * np.sum((mean - prior.mean) ** 2 / prior.var + ratio - 1.0 - np.log(ratio))


def _quadratic_objective(post: DiagGaussian, z, prior, an):
    diff = post.mean[None, :] - z
    risk = np.mean(np.sum(diff * diff, axis=1)) + np.sum(post.var)
    return risk + _kl_to_prior(post.mean, post.var, prior) / an


def gaussian_vi_objective(params, observations, loss: ClippedSquaredLoss, prior: DiagGaussian,
                          alpha: float, n: int, eps: np.ndarray):
    """Monte-Carlo objective and reparameterised gradient.

    ``params`` is ``concat(mean, log_var)``; ``eps`` are standard normal draws of
    shape (S, d) held fixed across calls (common random numbers).
    """
    an = _check_scale(alpha, n)
    z = np.asarray(observations, dtype=float)
    d = prior.dim
    mean, log_var = params[:d], params[d:]
    sd = np.exp(0.5 * log_var)
    theta = mean + sd * eps  # (S, d)
    diff = theta[:, None, :] - z[None, :, :]  # (S, n, d)
    sq = np.sum(diff * diff, axis=-1)
    active = sq < loss.bound
    risk = np.mean(np.minimum(sq, loss.bound))
    g_theta = 2.0 * np.mean(diff * active[..., None], axis=1) / eps.shape[0]  # (S, d)
    g_mean = g_theta.sum(axis=0)
    g_logvar = np.sum(g_theta * eps * sd * 0.5, axis=0)
    var = sd * sd
    kl = _kl_to_prior(mean, var, prior)
    g_mean = g_mean + (mean - prior.mean) / prior.var / an
    g_logvar = g_logvar + 0.5 * (var / prior.var - 1.0) / an
    return risk + kl / an, np.concatenate([g_mean, g_logvar])


def variational_gaussian_posterior(sample: TaskSample, loss, prior: DiagGaussian, alpha: float, n: int | None = None,
                                   budget: int = 200, draws: int = 256,
                                   stream: RandomStream | None = None) -> VariationalResult:
    """Best diagonal Gaussian for E_rho[R_hat] + KL(rho || prior)/(alpha n).

    Starts from the quadratic closed form. When clipping is negligible under
    that solution for every observation, the closed form is exact and returned
    directly. Otherwise L-BFGS runs on a common-random-number Monte-Carlo
    objective and the initializer is kept unless the optimizer improves on it.
    """
    if not isinstance(loss, ClippedSquaredLoss):
        raise DomainError("the Gaussian family is only defined for the clipped squared loss")
    if budget < 1:
        raise DomainError("budget must be at least one step")
    z = np.asarray(sample.observations, dtype=float)
    n = sample.n if n is None else n
    an = _check_scale(alpha, n)
    init = quadratic_gaussian_posterior(z.mean(axis=0), prior, alpha, n)
    tails = max(chernoff_tail(init.mean - zi, init.var, loss.bound) for zi in z)
    if tails * z.shape[0] < CLIP_NEGLIGIBLE:
        return VariationalResult(init, float(_quadratic_objective(init, z, prior, an)), True)

    stream = stream or RandomStream(0, "variational")
    eps = stream.generator().standard_normal((draws, prior.dim))
    x0 = np.concatenate([init.mean, np.log(init.var)])
    f0, _ = gaussian_vi_objective(x0, z, loss, prior, alpha, n, eps)
    history = [f0]

    def watch(xk):
        history.append(gaussian_vi_objective(xk, z, loss, prior, alpha, n, eps)[0])
        if len(history) >= 4 and all(history[-i] > history[-i - 1] for i in range(1, 4)):
            raise OptimizationFailure("objective increased at three consecutive checkpoints")

    res = optimize.minimize(gaussian_vi_objective, x0, args=(z, loss, prior, alpha, n, eps), jac=True,
                            method="L-BFGS-B", callback=watch, options={"maxiter": budget})
    if not np.all(np.isfinite(res.x)):
        raise OptimizationFailure("non-finite variational parameters")
    if res.fun <= f0:
        d = prior.dim
        post = DiagGaussian(res.x[:d], np.exp(res.x[d:]))
        return VariationalResult(post, float(res.fun), False)
    return VariationalResult(init, float(f0), False)
