"""Closed-form KL divergences for the distribution families used by the priors.

Gamma distributions use the shape/RATE convention: ``GammaDist(a, b)`` has
density proportional to ``x**(a-1) * exp(-b*x)``, mean ``a/b`` and, for
``a > 1``, ``E[1/X] = b/(a-1)``. The closed form in :func:`kl_gamma` is the
shape/rate KL; ``tests/test_divergences.py`` checks it against quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DomainError, InfiniteDivergence
from .numerics import digamma, log_gamma

__all__ = [
    "DiagGaussian",
    "GammaDist",
    "DirichletDist",
    "CategoricalDist",
    "GaussianMixture",
    "MixtureKL",
    "HyperKL",
    "kl_categorical",
    "kl_diag_gaussian",
    "kl_gamma",
    "kl_dirichlet_vs_flat",
    "kl_multinomial_vs_uniform",
    "mixture_kl_upper_bound",
    "mixture_kl_monte_carlo",
    "kl_hyper_gaussian_gamma",
]

SIMPLEX_TOL = 1e-12


@dataclass(frozen=True)
class DiagGaussian:
    mean: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        var = np.broadcast_to(np.asarray(self.var, dtype=float), mean.shape).copy()
        if mean.ndim != 1 or mean.size < 1:
            raise DomainError("DiagGaussian needs a 1-d mean of length >= 1")
        if np.any(~(var > 0)):
            raise DomainError("DiagGaussian variances must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", var)

    @property
    def dim(self) -> int:
        return self.mean.size

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        r = (x - self.mean) ** 2 / self.var
        return -0.5 * np.sum(r + np.log(2 * np.pi * self.var), axis=-1)


@dataclass(frozen=True)
class GammaDist:
    """Gamma(shape, rate)."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise DomainError("Gamma parameters must be positive")

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        a, b = self.shape, self.rate
        return a * np.log(b) - log_gamma(a) + (a - 1) * np.log(x) - b * x


@dataclass(frozen=True)
class DirichletDist:
    concentration: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.concentration, dtype=float))
        if np.any(~(c > 0)):
            raise DomainError("Dirichlet concentrations must be positive")
        object.__setattr__(self, "concentration", c)

    def log_pdf(self, w):
        c = self.concentration
        w = np.asarray(w, dtype=float)
        norm = log_gamma(c.sum()) - np.sum(log_gamma(c))
        return norm + np.sum((c - 1) * np.log(w), axis=-1)


@dataclass(frozen=True)
class CategoricalDist:
    probs: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.probs, dtype=float))
        if np.any(p < 0) or abs(p.sum() - 1.0) > SIMPLEX_TOL * max(1, p.size):
            raise DomainError("categorical probabilities must lie on the simplex")
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_log(cls, log_probs) -> "CategoricalDist":
        lp = np.asarray(log_probs, dtype=float)
        lp = lp - np.max(lp)
        p = np.exp(lp)
        return cls(p / p.sum())

    @property
    def size(self) -> int:
        return self.probs.size


@dataclass(frozen=True)
class GaussianMixture:
    weights: CategoricalDist
    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) != self.weights.size:
            raise DomainError("one component per mixture weight required")
        if len({c.dim for c in comps}) != 1:
            raise DomainError("mixture components must share a dimension")
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def log_pdf(self, x):
        lw = np.log(self.weights.probs)
        terms = np.stack([c.log_pdf(x) for c in self.components], axis=-1)
        m = terms.max(axis=-1, keepdims=True)
        with np.errstate(divide="ignore"):
            return np.squeeze(m, -1) + np.log(np.sum(np.exp(terms - m + lw), axis=-1))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        k = rng.choice(self.weights.size, size=size, p=self.weights.probs)
        means = np.stack([c.mean for c in self.components])
        sds = np.sqrt(np.stack([c.var for c in self.components]))
        return means[k] + sds[k] * rng.standard_normal((size, self.dim))


def kl_categorical(p: CategoricalDist, q: CategoricalDist) -> float:
    """Sum_k p_k log(p_k / q_k), with 0 log(0/.) = 0."""
    if p.size != q.size:
        raise DomainError("categorical KL needs equal lengths")
    on = p.probs > 0
    if np.any(q.probs[on] == 0):
        raise InfiniteDivergence("p puts mass where q has none")
    pk, qk = p.probs[on], q.probs[on]
    return float(max(0.0, np.sum(pk * (np.log(pk) - np.log(qk)))))


def kl_diag_gaussian(p: DiagGaussian, q: DiagGaussian) -> float:
    if p.dim != q.dim:
        raise DomainError(f"dimension mismatch: {p.dim} vs {q.dim}")
    ratio = p.var / q.var
    val = 0.5 * np.sum((p.mean - q.mean) ** 2 / q.var + ratio - 1.0 - np.log(ratio))
    return float(max(0.0, val))


def kl_gamma(p: GammaDist, q: GammaDist) -> float:
    """KL(Gamma(a, b) || Gamma(a0, b0)), shape/rate parameterisation."""
    a, b = p.shape, p.rate
    a0, b0 = q.shape, q.rate
    val = (a - a0) * digamma(a) + log_gamma(a0) - log_gamma(a) + a0 * np.log(b / b0) + a * (b0 - b) / b
    return float(max(0.0, val))


def kl_dirichlet_vs_flat(p: DirichletDist) -> float:
    """KL(Dir(delta) || Dir(1_K))."""
    d = p.concentration
    k = d.size
    s = d.sum()
    val = log_gamma(s) - log_gamma(float(k)) - np.sum(log_gamma(d)) + np.sum((d - 1) * (digamma(d) - digamma(s)))
    return float(max(0.0, val))


def kl_multinomial_vs_uniform(x: CategoricalDist) -> float:
    """log T - H(x) for x over T cells."""
    p = x.probs[x.probs > 0]
    entropy = -np.sum(p * np.log(p))
    return float(max(0.0, np.log(x.size) - entropy))


class MixtureKL(NamedTuple):
    value: float
    upper_bound: bool = True


def mixture_kl_upper_bound(p: GaussianMixture, q: GaussianMixture) -> MixtureKL:
    """Log-sum upper bound KL(w || w') + sum_k w_k KL(N_k || N'_k).

    Components are matched by index. The exact mixture KL has no closed form;
    see :func:`mixture_kl_monte_carlo`.
    """
    if p.weights.size != q.weights.size or p.dim != q.dim:
        raise DomainError("mixtures must share K and d")
    val = kl_categorical(p.weights, q.weights)
    for w, a, b in zip(p.weights.probs, p.components, q.components):
        if w > 0:
            val += w * kl_diag_gaussian(a, b)
    return MixtureKL(float(val))


def mixture_kl_monte_carlo(p: GaussianMixture, q: GaussianMixture, rng: np.random.Generator,
                           samples: int = 100_000) -> tuple[float, float]:
    """Monte-Carlo estimate of the exact KL(p || q) and its standard error."""
    x = p.sample(rng, samples)
    f = p.log_pdf(x) - q.log_pdf(x)
    return float(f.mean()), float(f.std(ddof=1) / np.sqrt(samples))


class HyperKL(NamedTuple):
    value: float
    blocks: dict


def kl_hyper_gaussian_gamma(
    tau,
    xi2,
    shape,
    rate,
    ref_xi2,
    ref_shape,
    ref_rate,
    delta: Sequence[float] | None = None,
    k_probs: Sequence[float] | None = None,
) -> HyperKL:
    """KL between two Normal x Gamma (x Dirichlet x Multinomial) hyper-distributions.

    ``tau`` has shape (K, d); ``xi2``, ``shape``, ``rate`` and the reference
    parameters have length K (scalars broadcast). The reference Normal block is
    centred at zero. ``delta`` adds a Dir(delta) vs Dir(1_K) block and
    ``k_probs`` a multinomial-over-K vs uniform block. Returns the total and
    the per-block values, which sum to it exactly.
    """
    tau = np.atleast_2d(np.asarray(tau, dtype=float))
    k = tau.shape[0]
    xi2, shape, rate, ref_xi2, ref_shape, ref_rate = (
        np.broadcast_to(np.asarray(v, dtype=float), (k,)) for v in (xi2, shape, rate, ref_xi2, ref_shape, ref_rate)
    )
    blocks = {}
    blocks["normal"] = float(sum(
        kl_diag_gaussian(DiagGaussian(tau[j], xi2[j]), DiagGaussian(np.zeros_like(tau[j]), ref_xi2[j]))
        for j in range(k)
    ))
    blocks["gamma"] = float(sum(
        kl_gamma(GammaDist(shape[j], rate[j]), GammaDist(ref_shape[j], ref_rate[j])) for j in range(k)
    ))
    if delta is not None:
        blocks["dirichlet"] = kl_dirichlet_vs_flat(DirichletDist(delta))
    if k_probs is not None:
        blocks["multinomial"] = kl_multinomial_vs_uniform(CategoricalDist(k_probs))
    return HyperKL(float(sum(blocks.values())), blocks)
