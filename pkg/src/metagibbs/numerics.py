"""Special functions, stable aggregation and labelled random streams.

Everything here is pure. ``RandomStream`` is an immutable descriptor; each call
to :meth:`RandomStream.generator` builds a fresh counter-based generator keyed
by ``(seed, label)``, so two workers holding the same descriptor draw the same
numbers and two different labels never share state.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, NumericError

__all__ = [
    "RandomStream",
    "Quadrature1D",
    "log_sum_exp",
    "log_gamma",
    "digamma",
    "kl_quadrature_oracle",
]


@dataclass(frozen=True)
class RandomStream:
    """Deterministic random stream addressed by a seed and a label path.

    >>> s = RandomStream(7, "task/3")
    >>> s.child("data").label
    'task/3/data'
    """

    seed: int
    label: str = ""

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError(f"seed must fit in 64 bits, got {self.seed}")

    def child(self, *parts) -> "RandomStream":
        tail = "/".join(str(p) for p in parts)
        label = f"{self.label}/{tail}" if self.label else tail
        return RandomStream(self.seed, label)

    def key(self) -> int:
        h = hashlib.blake2b(f"{int(self.seed)}\x1f{self.label}".encode(), digest_size=16)
        return int.from_bytes(h.digest(), "little")

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.key()))


@dataclass(frozen=True)
class Quadrature1D:
    """Uniform trapezoidal grid on ``[lower, upper]`` with ``nodes`` points."""

    lower: float
    upper: float
    nodes: int

    def __post_init__(self):
        if self.nodes < 2:
            raise DomainError("quadrature needs at least 2 nodes")
        if not self.lower < self.upper:
            raise DomainError("quadrature needs lower < upper")

    def points(self) -> np.ndarray:
        return np.linspace(self.lower, self.upper, self.nodes)


def log_sum_exp(log_weights, values=None, axis=-1):
    """Return ``log(sum_i exp(log_weights_i + values_i))`` along ``axis``.

    Weights need not be normalised. Uses the max-shift trick, so the result is
    finite whenever the inputs are finite. ``-inf`` entries are allowed and act
    as zero weight. Inputs broadcast against each other.
    """
    a = np.asarray(log_weights, dtype=float)
    if values is not None:
        a = a + np.asarray(values, dtype=float)
    if a.ndim == 0 or a.shape[axis] == 0:
        raise DomainError("log_sum_exp of an empty vector")
    m = np.max(a, axis=axis, keepdims=True)
    shift = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - shift), axis=axis, keepdims=True)) + shift
    out = np.squeeze(out, axis=axis)
    return float(out) if out.ndim == 0 else out


# Lanczos approximation, g = 7, nine coefficients.
_LANCZOS_G = 7.0
_LANCZOS = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _lanczos_lgamma(x: np.ndarray) -> np.ndarray:
    # valid for x >= 0.5
    z = x - 1.0
    acc = np.full_like(z, _LANCZOS[0])
    for i in range(1, len(_LANCZOS)):
        acc = acc + _LANCZOS[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * np.log(t) - t + np.log(acc)


def log_gamma(x):
    """Natural log of the Gamma function for ``x > 0``.

    Lanczos (g=7, n=9) for ``x >= 0.5`` and the reflection formula below that.
    Scalars in, float out; arrays in, arrays out.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("log_gamma requires x > 0")
    small = arr < 0.5
    out = np.empty_like(arr)
    big = ~small
    out[big] = _lanczos_lgamma(arr[big])
    if np.any(small):
        xs = arr[small]
        out[small] = np.log(np.pi / np.sin(np.pi * xs)) - _lanczos_lgamma(1.0 - xs)
    return float(out) if out.ndim == 0 else out


# Asymptotic expansion of digamma: B_{2k} / (2k) for k = 1..7.
_DIGAMMA_SERIES = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)


def digamma(x):
    """Digamma function psi(x) = d/dx log Gamma(x), for ``x > 0``.

    Shifts x above 6 with psi(x) = psi(x + 1) - 1/x, then sums the
    asymptotic series; truncation error is below 1e-13 there.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("digamma requires x > 0")
    z = arr.copy()
    acc = np.zeros_like(z)
    while True:
        low = z < 6.0
        if not np.any(low):
            break
        acc = acc - np.where(low, 1.0 / z, 0.0)
        z = np.where(low, z + 1.0, z)
    inv2 = 1.0 / (z * z)
    series = np.zeros_like(z)
    for c in reversed(_DIGAMMA_SERIES):
        series = (series + c) * inv2
    out = acc + np.log(z) - 0.5 / z - series
    return float(out) if out.ndim == 0 else out


def kl_quadrature_oracle(
    log_density_p: Callable[[np.ndarray], np.ndarray],
    log_density_q: Callable[[np.ndarray], np.ndarray],
    grid: Quadrature1D,
) -> float:
    """Trapezoidal estimate of KL(p || q) = int p log(p/q) over ``grid``.

    Error is O(1/nodes^2) for smooth integrands, plus whatever mass either
    density keeps outside the interval.
    """
    x = grid.points()
    lp = np.asarray(log_density_p(x), dtype=float)
    lq = np.asarray(log_density_q(x), dtype=float)
    if not (np.all(np.isfinite(lp)) and np.all(np.isfinite(lq))):
        raise NumericError("non-finite log-density on the quadrature grid")
    f = np.exp(lp) * (lp - lq)
    h = (grid.upper - grid.lower) / (grid.nodes - 1)
    return float(h * (f.sum() - 0.5 * (f[0] + f[-1])))
