"""Closed-form excess-risk bounds with a per-term breakdown.

Every evaluator returns a :class:`BoundReport` whose ``terms`` add up to
``value``. All logs are natural and values are in loss units. Where a
formula carries a prefactor (the Bernstein factor of the isolation and
meta-learning bounds) the prefactor is folded into each addend so that the
additivity invariant holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DomainError

__all__ = [
    "BoundParams",
    "BoundReport",
    "default_constants",
    "bernstein_prefactor",
    "isolation_bound",
    "meta_learning_bound",
    "prior_mass_bound",
    "concurrent_priors_bound",
    "discrete_meta_bound",
    "gaussian_G",
    "gaussian_meta_bound",
    "gaussian_isolation_bound",
    "mixture_meta_bound",
]


def default_constants(C: float) -> tuple[float, float]:
    """(c, beta) with c = 8 e C and beta = 1 / (C + c)."""
    if not C > 0:
        raise DomainError("C must be positive")
    c = 8.0 * math.e * C
    return c, 1.0 / (C + c)


@dataclass(frozen=True)
class BoundParams:
    """Constants shared by the bound evaluators.

    ``c``, ``alpha`` and ``beta`` default to 8eC, 1/(C+c) and 1/(C+c).
    ``tau_sq`` holds the squared norms of the mixture centres, one per
    component; ``threshold`` overrides the regime threshold of the Gaussian
    bound (n/T by default).
    """

    C: float = 1.0
    c: float | None = None
    L: float = 1.0
    alpha: float | None = None
    beta: float | None = None
    n: int = 1
    T: int = 1
    M: int = 1
    m_star: int = 1
    d: int = 1
    K: int = 1
    sigma: float = 0.0
    sigma_K: float = 0.0
    d_pi: float = 1.0
    kappa_pi: float = 1.0
    ref_xi2: float = 1.0
    ref_shape: float = 2.0
    ref_rate: float = 2.0
    mu_star_sq: float = 0.0
    tau_sq: tuple = ()
    bernstein: bool = True
    threshold: float | None = None

    def __post_init__(self):
        if not (self.C > 0 and self.L > 0):
            raise DomainError("C and L must be positive")
        c_def, beta_def = default_constants(self.C)
        c = c_def if self.c is None else float(self.c)
        object.__setattr__(self, "c", c)
        if self.alpha is None:
            object.__setattr__(self, "alpha", 1.0 / (self.C + c))
        if self.beta is None:
            object.__setattr__(self, "beta", 1.0 / (self.C + c))
        if not (self.alpha > 0 and self.beta > 0 and c > 0):
            raise DomainError("alpha, beta and c must be positive")
        for name in ("n", "T", "M", "m_star", "d", "K"):
            if int(getattr(self, name)) < 1:
                raise DomainError(f"{name} must be a positive integer")
        if self.sigma < 0 or self.sigma_K < 0 or self.mu_star_sq < 0:
            raise DomainError("dispersions and norms must be nonnegative")
        object.__setattr__(self, "tau_sq", tuple(float(t) for t in self.tau_sq))

    def with_(self, **kw) -> "BoundParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class BoundReport:
    value: float
    regime: str
    terms: dict
    extras: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"value": self.value, "regime": self.regime, "terms": dict(self.terms), "extras": dict(self.extras)}


def _report(terms: dict, regime: str = "", extras: dict | None = None) -> BoundReport:
    terms = {k: float(v) for k, v in terms.items()}
    return BoundReport(float(math.fsum(terms.values())), regime, terms, dict(extras or {}))


def bernstein_prefactor(alpha: float, c: float, C: float, bernstein: bool = True) -> float:
    """1 / (1 - alpha c 1_B / (2 (1 - C alpha)))."""
    if not bernstein:
        return 1.0
    if not alpha * C < 1:
        raise DomainError("the Bernstein prefactor needs alpha < 1/C")
    denom = 1.0 - alpha * c / (2.0 * (1.0 - C * alpha))
    if not denom > 0:
        raise DomainError("alpha too large: the Bernstein prefactor is not positive")
    return 1.0 / denom


def isolation_bound(params: BoundParams, empirical: float) -> BoundReport:
    """Prefactor x (expected excess free energy + alpha C^2 (1 - 1_B) / 8)."""
    p = bernstein_prefactor(params.alpha, params.c, params.C, params.bernstein)
    var = 0.0 if params.bernstein else params.alpha * params.C**2 / 8.0
    return _report({"free_energy": p * empirical, "variance": p * var},
                   "bernstein" if params.bernstein else "general", {"prefactor": p})


def meta_learning_bound(params: BoundParams, inner: float) -> BoundReport:
    """Meta-learning bound: 2 x prefactor x (inner + alpha C^2 (1 - 1_B) / 8).

    ``inner`` is the infimum over hyper-posteriors (or its value at any
    candidate, which upper-bounds it) of the expected excess free energy of
    a new task plus KL(Pi || Lambda) / (beta T).
    """
    p = 2.0 * bernstein_prefactor(params.alpha, params.c, params.C, params.bernstein)
    var = 0.0 if params.bernstein else params.alpha * params.C**2 / 8.0
    return _report({"meta_free_energy": p * inner, "variance": p * var},
                   "bernstein" if params.bernstein else "general", {"prefactor": p})


def prior_mass_bound(params: BoundParams) -> BoundReport:
    """Rate under the prior-mass condition pi(excess <= s) >= s^d / kappa.

    Bernstein case: 2 (d log(n alpha / d) + log kappa) / (alpha n).
    Otherwise alpha is set to 2 sqrt(2 d) / (sqrt(n) C) and the rate is
    (C/2) sqrt(d / (2n)) (log(8 e^2 n / (d C^2)) / 2 + log(kappa) / d).
    """
    d, kappa, n, C = params.d_pi, params.kappa_pi, params.n, params.C
    if not (d > 0 and kappa >= 1):
        raise DomainError("need d_pi > 0 and kappa_pi >= 1")
    if params.bernstein:
        an = params.alpha * n
        if not an / d > 1:
            raise DomainError(f"log(n alpha / d_pi) needs n alpha / d_pi > 1, got {an / d:.4g}")
        return _report({"complexity": 2.0 * d * math.log(an / d) / an, "mass": 2.0 * math.log(kappa) / an},
                       "bernstein")
    arg = 8.0 * math.e**2 * n / (d * C**2)
    if not arg > 1:
        raise DomainError(f"log(8 e^2 n / (d C^2)) needs its argument above 1, got {arg:.4g}")
    scale = 0.5 * C * math.sqrt(d / (2.0 * n))
    return _report({"complexity": scale * 0.5 * math.log(arg), "mass": scale * math.log(kappa) / d}, "general",
                   {"alpha": 2.0 * math.sqrt(2.0 * d) / (math.sqrt(n) * C)})


def concurrent_priors_bound(rates: Sequence[float], M: int, beta: float, T: int) -> BoundReport:
    """4 min(rates) + 4 log M / (beta T) for the best of M candidate priors."""
    rates = np.asarray(rates, dtype=float)
    if rates.size == 0:
        raise DomainError("need at least one rate")
    return _report({"best_prior": 4.0 * rates.min(), "selection": 4.0 * math.log(M) / (beta * T)})


def discrete_meta_bound(m_star: int, M: int, alpha: float, beta: float, n: int, T: int) -> BoundReport:
    """4 log m* / (alpha n) + 4 m* log(2 e M / m*) / (beta T) on a finite set of size M.

    The extras carry the isolation rates 2 log M / (alpha n) and 4 log M / (alpha n).
    """
    if not 1 <= m_star <= M:
        raise DomainError("need 1 <= m* <= M")
    an, bt = alpha * n, beta * T
    return _report(
        {"within_task": 4.0 * math.log(m_star) / an,
         "meta": 4.0 * m_star * math.log(2.0 * math.e * M / m_star) / bt},
        "",
        {"isolation_2": 2.0 * math.log(M) / an, "isolation_4": 4.0 * math.log(M) / an},
    )


def gaussian_G(params: BoundParams) -> float:
    """Constant of the favourable Gaussian rate G (d + log T) / T, evaluated as printed.

    Includes the n / (xi^2 T^2) term, so it depends on n and T. It can be
    negative for small ``ref_xi2`` or small alpha, in which case the favourable
    branch is not an upper bound.
    """
    a, b, xi2, L = params.ref_shape, params.ref_rate, params.ref_xi2, params.L
    al, be, n, T = params.alpha, params.beta, params.n, params.T
    root = math.sqrt(al * L * a * (a - 1.0))
    inner = (params.mu_star_sq / xi2 + n / (xi2 * T**2) + 1.0 + math.log(xi2) + a
             + 0.5 * a * math.log(al * L * a * (a - 1.0) / b**2) + a * b * root / T)
    return 4.0 * math.sqrt(a * L / (al * (a - 1.0))) + 2.0 * inner / be


def gaussian_meta_bound(params: BoundParams) -> BoundReport:
    """Minimum of the favourable and unfavourable Gaussian-prior rates.

    The favourable branch is G (d + log T) / T with the printed G; the
    unfavourable one is
    b [d xi^2 + Sigma] / ((a-1) alpha n) + d log(2 a alpha L n / b + 1) / (2 alpha n)
    + 2 ||mu*||^2 / (beta xi^2 T). ``regime`` reports which side of the
    threshold (n/T unless overridden) Sigma falls on; both branch values are
    in the extras.
    """
    a, b, xi2, L = params.ref_shape, params.ref_rate, params.ref_xi2, params.L
    if not a > 1:
        raise DomainError("the Gaussian bound needs reference shape > 1")
    an, bt, d, T = params.alpha * params.n, params.beta * params.T, params.d, params.T
    G = gaussian_G(params)
    fav = {"favorable": G * (d + math.log(T)) / T}
    unf = {
        "dispersion": b * (d * xi2 + params.sigma) / ((a - 1.0) * an),
        "complexity": d * math.log(2.0 * a * an * L / b + 1.0) / (2.0 * an),
        "centering": 2.0 * params.mu_star_sq / (params.beta * xi2 * T),
    }
    threshold = params.n / T if params.threshold is None else params.threshold
    regime = "favorable" if params.sigma <= threshold else "unfavorable"
    f_val, u_val = math.fsum(fav.values()), math.fsum(unf.values())
    terms = fav if f_val <= u_val else unf
    return _report(terms, regime, {"favorable_branch": f_val, "unfavorable_branch": u_val, "G": G,
                                   "threshold": threshold, "branch": "favorable" if f_val <= u_val else "unfavorable"})


def gaussian_isolation_bound(params: BoundParams, prior_mean_sq_dist: float | None = None,
                             prior_var: float | None = None) -> BoundReport:
    """Isolation bound for a fixed prior N(mu_bar, s2 I) under squared loss.

    The expected optimal excess free energy of a task is
    d log(1 + k) / (2 alpha n) + E||mu_bar - mu_P||^2 / (1 + k) with
    k = 2 alpha L n s2; it is multiplied by the Bernstein prefactor.
    ``prior_mean_sq_dist`` defaults to ||mu*||^2 + Sigma (prior centred at 0)
    and ``prior_var`` to the reference mean a/b.
    """
    an, d = params.alpha * params.n, params.d
    s2 = params.ref_shape / params.ref_rate if prior_var is None else prior_var
    dist = params.mu_star_sq + params.sigma if prior_mean_sq_dist is None else prior_mean_sq_dist
    k = 2.0 * an * params.L * s2
    p = bernstein_prefactor(params.alpha, params.c, params.C, params.bernstein)
    return _report({"complexity": p * d * math.log1p(k) / (2.0 * an), "bias": p * dist / (1.0 + k)},
                   "bernstein", {"prefactor": p})


def _cv_gaussian(params: BoundParams, sigma_K: float) -> tuple[float, str]:
    an, T, d, L = params.alpha * params.n, params.T, params.d, params.L
    if sigma_K <= params.n / T**2:
        return 8.0 * L * d / T + 4.0 / (params.alpha * T), "favorable"
    return 2.0 * d * math.log1p(4.0 * an * L) / an + 4.0 * sigma_K / an, "unfavorable"


def _cv_meta(params: BoundParams, K: int, regime: str) -> dict:
    """Meta-level convergence sum with b_k = T (favourable) or 1 (unfavourable)."""
    T, bt, an, d = params.T, params.beta * params.T, params.alpha * params.n, params.d
    xi2 = params.ref_xi2
    bbar = params.ref_rate
    bk = float(T) if regime == "favorable" else 1.0
    tau_sq = params.tau_sq[:K] if params.tau_sq else (params.mu_star_sq,) * K
    if len(tau_sq) < K:
        raise DomainError("tau_sq needs one entry per component")
    return {
        "meta_weights": 2.0 * K * math.log(2.0 * K) / bt,
        "meta_centres": sum(tau_sq) / (bt * xi2),
        "meta_spread": d / bt * K * math.log1p(4.0 * bk * xi2 * params.beta * T / an),
        "meta_scale": 4.0 / bt * K * (math.log(bk / bbar) + (bbar - bk) / bk),
    }


def mixture_meta_bound(params: BoundParams, known_K: bool = True,
                       K_grid: Sequence[int] | None = None, sigma_K: dict | None = None) -> BoundReport:
    """CV_finite + K CV_Gaussian + CV_meta for Gaussian-mixture priors.

    With ``known_K`` the bound is evaluated at ``params.K`` and
    ``params.sigma_K``. Otherwise it is the infimum over ``K_grid`` (default
    {1..T}, Sigma_K taken from ``sigma_K`` or ``params.sigma_K``) plus the
    2 log T / (beta T) price of selecting K.
    """
    T, an = params.T, params.alpha * params.n

    def at(K, sK):
        if not 1 <= K <= T:
            raise DomainError(f"need 1 <= K <= T, got K={K}")
        cvg, regime = _cv_gaussian(params, sK)
        terms = {"finite": 4.0 * math.log(2.0 * K) / an, "gaussian": K * cvg}
        terms.update(_cv_meta(params, K, regime))
        return terms, regime

    if known_K:
        terms, regime = at(int(params.K), params.sigma_K)
        return _report(terms, regime, {"K": int(params.K)})
    grid = range(1, T + 1) if K_grid is None else sorted(set(int(k) for k in K_grid))
    best = None
    for K in grid:
        sK = params.sigma_K if sigma_K is None else sigma_K[K]
        terms, regime = at(K, sK)
        val = math.fsum(terms.values())
        if best is None or val < best[0]:
            best = (val, K, terms, regime)
    if best is None:
        raise DomainError("empty K grid")
    _, K, terms, regime = best
    terms = dict(terms)
    terms["select_K"] = 2.0 * math.log(T) / (params.beta * T)
    return _report(terms, regime, {"K": K})
