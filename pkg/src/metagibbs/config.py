"""Experiment configuration files.

Configs are TOML documents with the sections below; every key not listed is
rejected with a :class:`ConfigError` naming the offending field.

    name = "label used in output rows"

    [environment]
    kind = "discrete" | "gaussian" | "mixture"
    # discrete: M, support (list of labels), flip_prob
    # gaussian: d, mu_star (list), spread2, noise2, clip (optional), L
    # mixture:  centers (list of lists), spread2, noise2, clip (optional), L

    [algorithm]
    alpha = "paper-default" | float
    beta = "paper-default" | float
    family = "subset" | "gaussian" | "mixture" | "unknown-K"
    fit_mode = "closed-form" | "stochastic"
    budget = 200
    K = 1                 # mixture only
    K_grid = [1, 2, 4]    # unknown-K only
    eps = float           # optional, Gaussian favourable-regime xi^2
    threshold = float     # optional, regime threshold
    draws = 256           # Monte-Carlo draws for mixture objectives

    [algorithm.reference]
    xi2 = 1.0
    shape = 2.0
    rate = 2.0

    [sweep]
    T = [25, 50, 100]
    n = [50]
    reps = 200
    seeds = [0]

    [output]
    dir = "results"
    formats = ["csv", "json"]

    [bernstein]           # optional, used by verify-bernstein
    candidates = 30
    tested = 20
    reps = 10000
    seeds = [0, 1, 2, 3, 4]
    min_pass_rate = 0.95
    lemma_pairs = 100000
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .environments import DiscreteEnvironment, GaussianEnvironment, MixtureEnvironment
from .errors import ConfigError, DomainError
from .meta_level import HyperReference

__all__ = [
    "AlgorithmConfig",
    "SweepConfig",
    "OutputConfig",
    "BernsteinConfig",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "load_toml",
]

DEFAULT_TOKEN = "paper-default"

_ENV_KEYS = {
    "discrete": {"kind", "M", "support", "flip_prob"},
    "gaussian": {"kind", "d", "mu_star", "spread2", "noise2", "clip", "L"},
    "mixture": {"kind", "centers", "spread2", "noise2", "clip", "L"},
}
_ALGO_KEYS = {"alpha", "beta", "family", "fit_mode", "budget", "K", "K_grid", "eps", "threshold", "draws",
              "reference"}
_REF_KEYS = {"xi2", "shape", "rate"}
_SWEEP_KEYS = {"T", "n", "reps", "seeds"}
_OUTPUT_KEYS = {"dir", "formats"}
_BERN_KEYS = {"candidates", "tested", "reps", "seeds", "min_pass_rate", "lemma_pairs"}
_TOP_KEYS = {"name", "environment", "algorithm", "sweep", "output", "bernstein"}
_FAMILIES = {"discrete": {"subset"}, "gaussian": {"gaussian"}, "mixture": {"mixture", "unknown-K"}}


@dataclass(frozen=True)
class AlgorithmConfig:
    alpha: float
    beta: float
    C: float
    family: str
    fit_mode: str = "closed-form"
    budget: int = 200
    K: int = 1
    K_grid: tuple = ()
    eps: float | None = None
    threshold: float | None = None
    draws: int = 256
    reference: HyperReference = field(default_factory=lambda: HyperReference(1.0, 2.0, 2.0))
    default_alpha: bool = True
    default_beta: bool = True


@dataclass(frozen=True)
class SweepConfig:
    T: tuple
    n: tuple
    reps: int
    seeds: tuple = (0,)


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "results"
    formats: tuple = ("csv",)


@dataclass(frozen=True)
class BernsteinConfig:
    candidates: int = 30
    tested: int = 20
    reps: int = 10_000
    seeds: tuple = (0, 1, 2, 3, 4)
    min_pass_rate: float = 0.95
    lemma_pairs: int = 100_000


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    environment: object
    algorithm: AlgorithmConfig
    sweep: SweepConfig
    output: OutputConfig = field(default_factory=OutputConfig)
    bernstein: BernsteinConfig | None = None


def _section(doc, key, where, required=True):
    if key not in doc:
        if required:
            raise ConfigError(f"{where}: missing section [{key}]")
        return None
    v = doc[key]
    if not isinstance(v, dict):
        raise ConfigError(f"{where}: [{key}] must be a table")
    return v


def _check_keys(table, allowed, where):
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")


def _num(table, key, where, default=None, kind=float, positive=False, nonneg=False):
    if key not in table:
        if default is None:
            raise ConfigError(f"{where}.{key}: required")
        return default
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {v!r}")
    if kind is int and (not isinstance(v, int)):
        raise ConfigError(f"{where}.{key}: expected an integer, got {v!r}")
    v = kind(v)
    if positive and not v > 0:
        raise ConfigError(f"{where}.{key}: must be positive")
    if nonneg and not v >= 0:
        raise ConfigError(f"{where}.{key}: must be nonnegative")
    return v


def _int_list(table, key, where, default=None, minimum=1):
    if key not in table:
        if default is None:
            raise ConfigError(f"{where}.{key}: required")
        return tuple(default)
    v = table[key]
    if isinstance(v, int) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, list) or not v or any(isinstance(x, bool) or not isinstance(x, int) for x in v):
        raise ConfigError(f"{where}.{key}: expected a nonempty list of integers")
    if any(x < minimum for x in v):
        raise ConfigError(f"{where}.{key}: entries must be >= {minimum}")
    return tuple(v)


def _environment(table):
    where = "environment"
    kind = table.get("kind")
    if kind not in _ENV_KEYS:
        raise ConfigError(f"{where}.kind: expected one of {sorted(_ENV_KEYS)}, got {kind!r}")
    _check_keys(table, _ENV_KEYS[kind], where)
    try:
        if kind == "discrete":
            return DiscreteEnvironment(_num(table, "M", where, kind=int),
                                       tuple(_int_list(table, "support", where, default=(0,), minimum=0)),
                                       _num(table, "flip_prob", where, default=0.3, nonneg=True))
        clip = None if "clip" not in table else _num(table, "clip", where, positive=True)
        common = dict(spread2=_num(table, "spread2", where, default=0.0, nonneg=True),
                      noise2=_num(table, "noise2", where, default=1.0, nonneg=True),
                      clip=clip, L=_num(table, "L", where, default=1.0, positive=True))
        if kind == "gaussian":
            d = _num(table, "d", where, kind=int)
            mu = np.asarray(table.get("mu_star", [0.0] * d), dtype=float)
            return GaussianEnvironment(d, mu, **common)
        if "centers" not in table:
            raise ConfigError(f"{where}.centers: required")
        return MixtureEnvironment(np.asarray(table["centers"], dtype=float), **common)
    except (DomainError, ValueError, TypeError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"{where}: {e}") from None


def _loss_bound(env) -> float:
    return 1.0 if isinstance(env, DiscreteEnvironment) else float(env.clip)


def _algorithm(table, env):
    where = "algorithm"
    _check_keys(table, _ALGO_KEYS, where)
    kind = ("discrete" if isinstance(env, DiscreteEnvironment)
            else "gaussian" if isinstance(env, GaussianEnvironment) else "mixture")
    family = table.get("family", sorted(_FAMILIES[kind])[0] if kind != "mixture" else "mixture")
    if family not in _FAMILIES[kind]:
        raise ConfigError(f"{where}.family: {family!r} does not fit a {kind} environment "
                          f"(expected one of {sorted(_FAMILIES[kind])})")
    C = _loss_bound(env)
    default = 1.0 / (C + 8.0 * math.e * C)

    def rate(key):
        v = table.get(key, DEFAULT_TOKEN)
        if v == DEFAULT_TOKEN:
            return default, True
        return _num(table, key, where, positive=True), False

    alpha, pa = rate("alpha")
    beta, pb = rate("beta")
    mode = table.get("fit_mode", "closed-form")
    if mode not in ("closed-form", "stochastic"):
        raise ConfigError(f"{where}.fit_mode: expected 'closed-form' or 'stochastic', got {mode!r}")
    ref_t = table.get("reference", {})
    if not isinstance(ref_t, dict):
        raise ConfigError(f"{where}.reference: must be a table")
    _check_keys(ref_t, _REF_KEYS, f"{where}.reference")
    ref = HyperReference(_num(ref_t, "xi2", f"{where}.reference", default=1.0, positive=True),
                         _num(ref_t, "shape", f"{where}.reference", default=2.0, positive=True),
                         _num(ref_t, "rate", f"{where}.reference", default=2.0, positive=True))
    if kind != "discrete" and not ref.shape[0] > 1:
        raise ConfigError(f"{where}.reference.shape: must exceed 1")
    eps = None if "eps" not in table else _num(table, "eps", where, positive=True)
    thr = None if "threshold" not in table else _num(table, "threshold", where, nonneg=True)
    return AlgorithmConfig(
        alpha=alpha, beta=beta, C=C, family=family, fit_mode=mode,
        budget=_num(table, "budget", where, default=200, kind=int, positive=True),
        K=_num(table, "K", where, default=1, kind=int, positive=True),
        K_grid=_int_list(table, "K_grid", where, default=(1,)),
        eps=eps, threshold=thr,
        draws=_num(table, "draws", where, default=256, kind=int, positive=True),
        reference=ref, default_alpha=pa, default_beta=pb,
    )


def _sweep(table):
    where = "sweep"
    _check_keys(table, _SWEEP_KEYS, where)
    reps = _num(table, "reps", where, kind=int)
    if reps < 2:
        raise ConfigError(f"{where}.reps: must be at least 2")
    return SweepConfig(_int_list(table, "T", where), _int_list(table, "n", where), reps,
                       _int_list(table, "seeds", where, default=(0,), minimum=0))


def _output(table):
    where = "output"
    if table is None:
        return OutputConfig()
    _check_keys(table, _OUTPUT_KEYS, where)
    formats = table.get("formats", ["csv"])
    if not isinstance(formats, list) or any(f not in ("csv", "json") for f in formats):
        raise ConfigError(f"{where}.formats: expected a list drawn from 'csv', 'json'")
    return OutputConfig(str(table.get("dir", "results")), tuple(formats))


def _bernstein(table):
    if table is None:
        return None
    where = "bernstein"
    _check_keys(table, _BERN_KEYS, where)
    cfg = BernsteinConfig(
        candidates=_num(table, "candidates", where, default=30, kind=int),
        tested=_num(table, "tested", where, default=20, kind=int),
        reps=_num(table, "reps", where, default=10_000, kind=int),
        seeds=_int_list(table, "seeds", where, default=(0, 1, 2, 3, 4), minimum=0),
        min_pass_rate=_num(table, "min_pass_rate", where, default=0.95),
        lemma_pairs=_num(table, "lemma_pairs", where, default=100_000, kind=int, positive=True),
    )
    if cfg.candidates < 2 or not 1 <= cfg.tested < cfg.candidates:
        raise ConfigError(f"{where}: need candidates >= 2 and 1 <= tested < candidates")
    if cfg.reps < 100:
        raise ConfigError(f"{where}.reps: must be at least 100")
    if not 0 <= cfg.min_pass_rate <= 1:
        raise ConfigError(f"{where}.min_pass_rate: must lie in [0, 1]")
    return cfg


def parse_config(doc: dict) -> ExperimentConfig:
    _check_keys(doc, _TOP_KEYS, "config")
    env = _environment(_section(doc, "environment", "config"))
    algo = _algorithm(_section(doc, "algorithm", "config", required=False) or {}, env)
    sweep = _sweep(_section(doc, "sweep", "config"))
    if algo.family in ("mixture", "unknown-K"):
        grid = (algo.K,) if algo.family == "mixture" else algo.K_grid
        if max(grid) > min(sweep.T):
            raise ConfigError("algorithm: number of components cannot exceed the smallest T")
    name = doc.get("name", "experiment")
    if not isinstance(name, str) or not name or "," in name:
        raise ConfigError("config.name: expected a nonempty string without commas")
    return ExperimentConfig(name, env, algo, sweep, _output(_section(doc, "output", "config", required=False)),
                            _bernstein(_section(doc, "bernstein", "config", required=False)))


def load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: file not found") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None


def load_config(path) -> ExperimentConfig:
    try:
        return parse_config(load_toml(path))
    except ConfigError as e:
        raise ConfigError(f"{Path(path).name}: {e}") from None
