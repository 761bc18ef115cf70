"""Monte-Carlo comparison of meta-learned priors against learning in isolation.

For every replication a nested sequence of training tasks is drawn once and
its prefixes of length T are used for every cell of the T-grid; the test
task and its sample are shared across cells as well (common random numbers),
so differences between cells reflect T and not resampling noise.

Excess risks are always computed from the tasks' exact risks. In the
discrete setting the expectation over a prior drawn from the finite
hyper-posterior is integrated exactly; in the Gaussian settings one prior is
drawn per replication.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import optimize

from .bounds import (
    BoundParams,
    discrete_meta_bound,
    gaussian_isolation_bound,
    gaussian_meta_bound,
    isolation_bound,
    mixture_meta_bound,
    meta_learning_bound,
)
from .config import ExperimentConfig
from .divergences import CategoricalDist, DiagGaussian, GaussianMixture
from .environments import (
    DiscreteEnvironment,
    GaussianEnvironment,
    MixtureEnvironment,
    gaussian_expected_risk,
    sample_dataset,
    sample_discrete_risks,
    sample_gaussian_stats,
    sample_task,
)
from .errors import DomainError, FitUnavailable, UnsupportedEnvironment
from .meta_level import (
    FinitePriorFamily,
    GaussianGammaHyper,
    GaussianTaskStats,
    HyperReference,
    MixtureHyper,
    SubsetPriorFamily,
    UnknownKHyper,
    fit_gaussian_hyperposterior,
    fit_mixture_hyperposterior,
    fit_unknownK_hyperposterior,
    gibbs_expected_values,
    meta_column_sums,
    meta_empirical_risk_matrix,
    meta_gibbs_finite,
    population_gaussian_objective,
    sample_prior,
    subset_family,
    surrogate_moments,
)
from .numerics import RandomStream, log_sum_exp
from .within_task import quadratic_gaussian_posterior, quadratic_mixture_posterior

__all__ = [
    "CSV_COLUMNS",
    "CellResult",
    "SimulationResult",
    "RateReport",
    "mean_se",
    "estimate_meta_risk",
    "run_isolation_vs_meta",
    "rate_fit",
    "rates_from_result",
    "open_question_probe",
    "dirac_free_energy_matrix",
    "discrete_population_bounds",
    "gaussian_population_bounds",
    "write_csv",
    "format_csv",
]

SE_MARGIN = 3.0

CSV_COLUMNS = (
    "setting", "seed", "T", "n", "reps",
    "meta_excess", "meta_se", "iso_excess", "iso_se", "diff_se",
    "meta_bound", "iso_bound", "meta_rate_bound", "iso_rate_bound",
    "favorable_frac", "bound_ok",
)


def mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 2:
        raise DomainError("need at least two replications for a standard error")
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.shape[0]))


# ----------------------------------------------------------------------------
# per-replication excess risks


def _discrete_excess(env: DiscreteEnvironment, star: int) -> np.ndarray:
    """Excess risk of every parameter for a task with minimiser ``star``."""
    ex = np.full(env.M, env.gap)
    ex[star] = 0.0
    return ex


def _gaussian_excess(post, task) -> float:
    """Exact clipped excess risk of a Gaussian or Gaussian-mixture posterior."""
    if isinstance(post, GaussianMixture):
        risks = [gaussian_expected_risk(c.mean, c.var, task.mean, task.noise2, task.clip) for c in post.components]
        risk = float(np.dot(post.weights.probs, risks))
    else:
        risk = gaussian_expected_risk(post.mean, post.var, task.mean, task.noise2, task.clip)
    return risk - task.min_risk


def _posterior(prior, zbar, alpha, n):
    if isinstance(prior, GaussianMixture):
        return quadratic_mixture_posterior(zbar, prior, alpha, n)
    return quadratic_gaussian_posterior(zbar, prior, alpha, n)


def _test_task(env, n, stream):
    task = sample_task(env, stream.child("task"))
    data = sample_dataset(task, n, stream.child("data"))
    return task, np.asarray(data.observations, dtype=float).mean(axis=0)


def _isolation_prior(env, ref: HyperReference) -> DiagGaussian:
    return DiagGaussian(np.zeros(env.d), np.full(env.d, ref.mean_variance))


def estimate_meta_risk(hyper, env, n: int, reps: int, stream: RandomStream, alpha: float,
                       family=None) -> tuple[float, float]:
    """Mean excess risk on fresh tasks of the posterior built from a prior drawn from ``hyper``.

    For a categorical hyper over a finite ``family`` the draw of the prior is
    integrated exactly. Returns (estimate, standard error).
    """
    if reps < 2:
        raise DomainError("reps must be at least 2")
    vals = np.empty(reps)
    if isinstance(env, DiscreteEnvironment):
        if not isinstance(hyper, CategoricalDist) or family is None:
            raise DomainError("finite environments need a categorical hyper and its family")
        risks, stars = sample_discrete_risks(env, reps, n, stream.child("tasks"))
        for r in range(reps):
            ex = gibbs_expected_values(risks[r], _discrete_excess(env, stars[r]), family, alpha, n)
            vals[r] = float(hyper.probs @ ex)
        return mean_se(vals)
    for r in range(reps):
        s = stream.child("rep", r)
        task, zbar = _test_task(env, n, s.child("test"))
        prior = sample_prior(hyper, s.child("prior"))
        vals[r] = _gaussian_excess(_posterior(prior, zbar, alpha, n), task)
    return mean_se(vals)


# ----------------------------------------------------------------------------
# population versions of the isolation and meta-learning bounds


def _bound_params(cfg: ExperimentConfig, n: int, T: int, **extra) -> BoundParams:
    a = cfg.algorithm
    return BoundParams(C=a.C, alpha=a.alpha, beta=a.beta, n=n, T=T,
                       ref_xi2=float(a.reference.xi2[0]), ref_shape=float(a.reference.shape[0]),
                       ref_rate=float(a.reference.rate[0]), threshold=a.threshold, **extra)


def discrete_population_bounds(env: DiscreteEnvironment, family, params: BoundParams,
                               iso_index: int) -> tuple[float, float]:
    """(meta bound, isolation bound) from the exact population free energies.

    For prior j the expected optimal excess free energy of a new task is
    V_j = E_P[-(1/(alpha n)) log sum_theta pi_j(theta) exp(-alpha n (R(theta) - R*))];
    over all distributions on the family the meta term is
    -(1/(beta T)) log sum_j Lambda_j exp(-beta T V_j).
    """
    rows = np.stack([_discrete_excess(env, s) for s in env.support])
    V = meta_empirical_risk_matrix(rows, family, params.alpha, params.n).mean(axis=0)
    bt = params.beta * params.T
    inner = -log_sum_exp(np.asarray(family.log_lambda) - bt * V) / bt
    return meta_learning_bound(params, float(inner)).value, isolation_bound(params, float(V[iso_index])).value


def _clip_slack(env) -> float:
    """E||theta - Z||^2 - R(theta) at theta = mu_P: unclipped minus clipped minimal risk."""
    task = sample_task(env, RandomStream(0, "clip-slack"))
    return max(0.0, env.d * env.noise2 - task.min_risk)


def _best_population_hyper(mu_star, sigma, alpha, beta, n, T, ref: HyperReference, L):
    """Minimise the population one-block objective over (xi2, a, b) with tau at its exact optimum."""
    mu_star = np.asarray(mu_star, dtype=float)
    xi_ref = float(ref.xi2[0])

    def hyper_of(x):
        xi2, a, b = math.exp(x[0]), 1.0 + math.exp(x[1]), math.exp(x[2])
        # tau minimises e_inv ||tau - mu*||^2 + ||tau||^2 / (2 xi_ref beta T)
        _, e_inv = surrogate_moments(a, b, alpha * n, L)
        tau = 2.0 * e_inv * mu_star / (2.0 * e_inv + 1.0 / (xi_ref * beta * T))
        return GaussianGammaHyper(tau[None, :], xi2, a, b)

    def f(x):
        try:
            return population_gaussian_objective(hyper_of(x), mu_star, sigma, alpha, beta, n, T, ref, L)
        except (DomainError, OverflowError, FloatingPointError, ValueError):
            return np.inf

    a0, b0 = float(ref.shape[0]), float(ref.rate[0])
    starts = [np.array([math.log(xi_ref), math.log(a0 - 1.0), math.log(b0)])]
    eps = n / T**2
    starts.append(np.array([math.log(eps), math.log(a0 - 1.0),
                            math.log(math.sqrt(alpha * L * a0 * (a0 - 1.0) * n / eps))]))
    best = min(f(s) for s in starts)
    for s in starts:
        with np.errstate(all="ignore"):
            res = optimize.minimize(f, s, method="Nelder-Mead", options={"xatol": 1e-6, "fatol": 1e-12,
                                                                        "maxiter": 2000})
        if np.isfinite(res.fun):
            best = min(best, float(res.fun))
    return best


def gaussian_population_bounds(env, params: BoundParams, ref: HyperReference) -> tuple[float, float]:
    """(meta bound, isolation bound) for Gaussian-prior families.

    Uses the Gaussian variational family inside the meta-learning bound, the
    optimal excess free energy of a Gaussian posterior under unclipped squared
    loss, and the slack between unclipped and clipped minimal risks, which
    makes the squared distance an upper bound on the clipped excess risk.
    The meta term is evaluated at the best one-block hyper found numerically,
    which upper-bounds the infimum over all hypers.
    """
    slack = _clip_slack(env)
    if isinstance(env, MixtureEnvironment):
        mu_star = env.centers.mean(axis=0)
        sigma = float(np.mean(np.sum((env.centers - mu_star) ** 2, axis=1))) + env.d * env.spread2
    else:
        mu_star, sigma = env.mu_star, env.sigma
    inner = _best_population_hyper(mu_star, sigma, params.alpha, params.beta, params.n, params.T, ref, env.L)
    meta = meta_learning_bound(params, inner + slack).value
    iso = gaussian_isolation_bound(params.with_(mu_star_sq=float(mu_star @ mu_star), sigma=sigma, d=env.d))
    iso_val = iso.value + iso.extras["prefactor"] * slack
    return meta, iso_val


def _rate_bounds(cfg: ExperimentConfig, env, n, T, fit_tau=None):
    """Closed-form rates (meta, isolation) of the setting, for the CSV."""
    a = cfg.algorithm
    if isinstance(env, DiscreteEnvironment):
        rep = discrete_meta_bound(env.m_star, env.M, a.alpha, a.beta, n, T)
        return rep.value, rep.extras["isolation_4"]
    if isinstance(env, GaussianEnvironment):
        p = _bound_params(cfg, n, T, d=env.d, sigma=env.sigma, mu_star_sq=float(env.mu_star @ env.mu_star),
                          L=env.L)
        return gaussian_meta_bound(p).value, float("nan")
    K = env.K
    tau_sq = tuple(float(c @ c) for c in env.centers)
    p = _bound_params(cfg, n, T, d=env.d, K=K, sigma_K=env.sigma_k, tau_sq=tau_sq, L=env.L)
    if a.family == "unknown-K":
        grid = [k for k in a.K_grid if k <= T]
        # Sigma_K is only known for K >= the true number of centres; smaller K use the unfavourable branch
        sig = {k: (env.sigma_k if k >= K else 1e300) for k in grid}
        # components beyond the generating centres sit at the origin
        p = p.with_(tau_sq=tau_sq + (0.0,) * max(0, max(grid) - K))
        return mixture_meta_bound(p, known_K=False, K_grid=grid, sigma_K=sig).value, float("nan")
    if a.K < K:
        return float("nan"), float("nan")
    return mixture_meta_bound(p.with_(K=a.K, tau_sq=tau_sq + (0.0,) * max(0, a.K - K))).value, float("nan")


# ----------------------------------------------------------------------------
# the sweep


@dataclass
class CellResult:
    T: int
    n: int
    meta: np.ndarray
    iso: np.ndarray
    meta_bound: float
    iso_bound: float
    meta_rate_bound: float
    iso_rate_bound: float
    favorable: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def reps(self) -> int:
        return self.meta.shape[0]

    def row(self, setting: str, seed: int) -> dict:
        m, ms = mean_se(self.meta)
        i, is_ = mean_se(self.iso)
        _, ds = mean_se(self.meta - self.iso)
        ok = (self.meta_bound >= m - SE_MARGIN * ms) and (self.iso_bound >= i - SE_MARGIN * is_)
        fav = float(np.mean(self.favorable)) if self.favorable.size else float("nan")
        return {"setting": setting, "seed": seed, "T": self.T, "n": self.n, "reps": self.reps,
                "meta_excess": m, "meta_se": ms, "iso_excess": i, "iso_se": is_, "diff_se": ds,
                "meta_bound": self.meta_bound, "iso_bound": self.iso_bound,
                "meta_rate_bound": self.meta_rate_bound, "iso_rate_bound": self.iso_rate_bound,
                "favorable_frac": fav, "bound_ok": int(ok)}


@dataclass
class SimulationResult:
    setting: str
    seed: int
    cells: list

    def rows(self) -> list[dict]:
        return [c.row(self.setting, self.seed) for c in self.cells]

    @property
    def bounds_ok(self) -> bool:
        return all(r["bound_ok"] for r in self.rows())


def _discrete_family(cfg: ExperimentConfig, env: DiscreteEnvironment):
    fam = subset_family(env.M)
    return fam, fam.size - 1  # the last subset is the whole set: uniform prior


def _run_discrete(cfg, env, n, stream):
    a, Ts = cfg.algorithm, sorted(cfg.sweep.T)
    reps = cfg.sweep.reps
    fam, iso_j = _discrete_family(cfg, env)
    meta = np.empty((reps, len(Ts)))
    iso = np.empty(reps)
    for r in range(reps):
        s = stream.child("rep", r)
        train, _ = sample_discrete_risks(env, Ts[-1], n, s.child("train"))
        test, star = sample_discrete_risks(env, 1, n, s.child("test"))
        ex = gibbs_expected_values(test[0], _discrete_excess(env, star[0]), fam, a.alpha, n)
        iso[r] = ex[iso_j]
        sums, prev = np.zeros(fam.size), 0
        for j, T in enumerate(Ts):
            sums += meta_column_sums(train[prev:T], fam, a.alpha, n)
            prev = T
            pi = meta_gibbs_finite(sums, fam.log_lambda, a.beta)
            meta[r, j] = float(pi.probs @ ex)
    cells = []
    for j, T in enumerate(Ts):
        p = _bound_params(cfg, n, T)
        mb, ib = discrete_population_bounds(env, fam, p, iso_j)
        rb, irb = _rate_bounds(cfg, env, n, T)
        cells.append(CellResult(T, n, meta[:, j], iso.copy(), mb, ib, rb, irb))
    return cells


def _fit(cfg, stats, stream):
    a = cfg.algorithm
    if a.family == "gaussian":
        fit = fit_gaussian_hyperposterior(stats, a.alpha, a.beta, a.reference, mode=a.fit_mode, eps=a.eps,
                                          threshold=a.threshold, budget=a.budget)
        return fit.hyper, fit.regime == "favorable"
    if a.family == "mixture":
        h = fit_mixture_hyperposterior(stats, a.K, a.alpha, a.beta, a.reference, threshold=a.threshold,
                                       stream=stream)
        return h, bool(np.all(h.block.rate == stats.T))
    grid = [k for k in a.K_grid if k <= stats.T]
    h = fit_unknownK_hyperposterior(stats, grid, a.alpha, a.beta, a.reference, stream=stream,
                                    threshold=a.threshold, draws=a.draws)
    return h, bool(np.all(h.fits[h.selected].block.rate == stats.T))


def _run_gaussian(cfg, env, n, stream):
    a, Ts = cfg.algorithm, sorted(cfg.sweep.T)
    reps = cfg.sweep.reps
    meta = np.empty((reps, len(Ts)))
    fav = np.zeros((reps, len(Ts)))
    iso = np.empty(reps)
    iso_prior = _isolation_prior(env, a.reference)
    for r in range(reps):
        s = stream.child("rep", r)
        _, zb, sp = sample_gaussian_stats(env, Ts[-1], n, s.child("train"))
        task, zbar = _test_task(env, n, s.child("test"))
        iso[r] = _gaussian_excess(quadratic_gaussian_posterior(zbar, iso_prior, a.alpha, n), task)
        for j, T in enumerate(Ts):
            hyper, fav[r, j] = _fit(cfg, GaussianTaskStats(zb[:T], sp[:T], n), s.child("fit", T))
            prior = sample_prior(hyper, s.child("prior"))
            meta[r, j] = _gaussian_excess(_posterior(prior, zbar, a.alpha, n), task)
    cells = []
    for j, T in enumerate(Ts):
        p = _bound_params(cfg, n, T, d=env.d, L=env.L)
        if isinstance(env, GaussianEnvironment):
            mb, ib = gaussian_population_bounds(env, p, a.reference)
        else:
            _, ib = gaussian_population_bounds(env, p, a.reference)
            mb = float("nan")
        rb, irb = _rate_bounds(cfg, env, n, T)
        if isinstance(env, MixtureEnvironment):
            mb = rb
        cells.append(CellResult(T, n, meta[:, j], iso.copy(), mb, ib, rb, irb, fav[:, j]))
    return cells


def run_isolation_vs_meta(cfg: ExperimentConfig, seed: int | None = None) -> SimulationResult:
    """Meta-learned versus isolated excess risk for every (T, n) cell of the sweep.

    Bounds: ``meta_bound`` and ``iso_bound`` are the meta-learning and
    isolation bounds evaluated with population free energies (for mixture
    environments ``meta_bound`` is the closed-form mixture rate);
    ``meta_rate_bound`` / ``iso_rate_bound`` are the closed-form rates of the
    setting (NaN where none applies).
    """
    seed = cfg.sweep.seeds[0] if seed is None else int(seed)
    env = cfg.environment
    root = RandomStream(seed, cfg.name)
    cells = []
    for n in cfg.sweep.n:
        stream = root.child("n", n)
        if isinstance(env, DiscreteEnvironment):
            cells.extend(_run_discrete(cfg, env, n, stream))
        elif isinstance(env, (GaussianEnvironment, MixtureEnvironment)):
            cells.extend(_run_gaussian(cfg, env, n, stream))
        else:
            raise UnsupportedEnvironment(type(env).__name__)
    return SimulationResult(cfg.name, seed, cells)


# ----------------------------------------------------------------------------
# rates


class RateReport(NamedTuple):
    points: tuple
    slope: float
    intercept: float
    r2: float


def rate_fit(points) -> RateReport:
    """Least-squares slope of log(excess) against log(T).

    ``points`` are (T, estimate, se) triples; nonpositive estimates are
    dropped and fewer than three remaining points raise :class:`FitUnavailable`.
    """
    pts = tuple((float(T), float(e), float(s)) for T, e, s in points)
    keep = [(T, e) for T, e, _ in pts if e > 0 and T > 0]
    if len(keep) < 3:
        raise FitUnavailable(f"need at least 3 positive points for a slope, have {len(keep)}")
    x = np.log([k[0] for k in keep])
    y = np.log([k[1] for k in keep])
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ np.array([slope, intercept])
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / sst if sst > 0 else 1.0
    return RateReport(pts, float(slope), float(intercept), r2)


def rates_from_result(result: SimulationResult, column: str = "meta") -> dict:
    """One RateReport per n for the meta or isolation column."""
    out = {}
    for n in sorted({c.n for c in result.cells}):
        pts = []
        for c in sorted((c for c in result.cells if c.n == n), key=lambda c: c.T):
            est, se = mean_se(c.meta if column == "meta" else c.iso)
            pts.append((c.T, est, se))
        out[n] = rate_fit(pts)
    return out


# ----------------------------------------------------------------------------
# Gibbs versus Dirac free energies at the meta level


def dirac_free_energy_matrix(risks, family, alpha: float, n: int, chunk: int = 8) -> np.ndarray:
    """(T, J) matrix of min_theta [R_hat_t(theta) - log pi_j(theta) / (alpha n)]."""
    risks = np.atleast_2d(np.asarray(risks, dtype=float))
    an = alpha * n
    out = np.empty((risks.shape[0], family.size))
    if isinstance(family, SubsetPriorFamily):
        pen = np.log(family.sizes) / an
        for s in range(0, risks.shape[0], chunk):
            blk = risks[s:s + chunk]
            masked = np.where(family.indicators[None], blk[:, None, :], np.inf)
            out[s:s + chunk] = masked.min(axis=-1) + pen[None]
        return out
    lp = family.log_priors
    for s in range(0, risks.shape[0], chunk):
        blk = risks[s:s + chunk]
        with np.errstate(invalid="ignore"):
            out[s:s + chunk] = np.min(blk[:, None, :] - lp[None] / an, axis=-1)
    return out


def open_question_probe(cfg: ExperimentConfig, seed: int | None = None, variational: str = "dirac") -> list[dict]:
    """Meta excess risk of the Gibbs-based and the variational-based hyper-posteriors.

    Both hyper-posteriors are formed on the same training tasks and scored on
    the same test tasks with the exact Gibbs posterior at test time.
    ``variational="full"`` uses the full simplex as the variational family,
    which reproduces the Gibbs column exactly. Observational only.
    """
    env = cfg.environment
    if not isinstance(env, DiscreteEnvironment):
        raise UnsupportedEnvironment("the probe needs a finite parameter set")
    if variational not in ("dirac", "full"):
        raise DomainError("variational must be 'dirac' or 'full'")
    a, Ts = cfg.algorithm, sorted(cfg.sweep.T)
    seed = cfg.sweep.seeds[0] if seed is None else int(seed)
    fam, _ = _discrete_family(cfg, env)
    rows = []
    for n in cfg.sweep.n:
        stream = RandomStream(seed, cfg.name).child("probe", n)
        g = np.empty((cfg.sweep.reps, len(Ts)))
        v = np.empty_like(g)
        for r in range(cfg.sweep.reps):
            s = stream.child("rep", r)
            train, _ = sample_discrete_risks(env, Ts[-1], n, s.child("train"))
            test, star = sample_discrete_risks(env, 1, n, s.child("test"))
            ex = gibbs_expected_values(test[0], _discrete_excess(env, star[0]), fam, a.alpha, n)
            gs, vs, prev = np.zeros(fam.size), np.zeros(fam.size), 0
            for j, T in enumerate(Ts):
                blk = train[prev:T]
                gs += meta_column_sums(blk, fam, a.alpha, n)
                if variational == "full":
                    vs += meta_column_sums(blk, fam, a.alpha, n)
                else:
                    vs += dirac_free_energy_matrix(blk, fam, a.alpha, n).sum(axis=0)
                prev = T
                g[r, j] = meta_gibbs_finite(gs, fam.log_lambda, a.beta).probs @ ex
                v[r, j] = meta_gibbs_finite(vs, fam.log_lambda, a.beta).probs @ ex
        for j, T in enumerate(Ts):
            ge, gse = mean_se(g[:, j])
            ve, vse = mean_se(v[:, j])
            dm, dse = mean_se(v[:, j] - g[:, j])
            rows.append({"setting": cfg.name, "seed": seed, "T": T, "n": n, "reps": cfg.sweep.reps,
                         "gibbs_excess": ge, "gibbs_se": gse, "variational_excess": ve, "variational_se": vse,
                         "gap": dm, "gap_se": dse})
    return rows


# ----------------------------------------------------------------------------
# output


def _fmt(v):
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def format_csv(rows: Sequence[dict], columns: Sequence[str] | None = None) -> str:
    """Header plus one line per row; floats with 17 significant digits."""
    if not rows:
        return ""
    columns = list(columns or rows[0].keys())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def write_csv(path, rows: Sequence[dict], columns: Sequence[str] | None = None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_csv(rows, columns))


def to_json(obj) -> str:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        raise TypeError(type(o).__name__)

    return json.dumps(obj, default=default, indent=2, sort_keys=True)
