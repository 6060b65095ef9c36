"""Hurdle GLD: an atom of mass lambda0 at zero mixed with a GLD.

The likelihood factors into a Bernoulli part for the zero indicator and
a GLD part for the non-zero values, so the two are estimated separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import gld
from .fitting import FitResult, gld_log_likelihood, nmle_fit
from .gld import GldParams
from .optim import FitError, OptimizerConfig

__all__ = [
    "HurdleSplit",
    "HurdleGldParams",
    "HurdleFit",
    "split",
    "fit_hurdle",
    "hurdle_loglik",
    "hurdle_cdf",
    "hurdle_sample",
]

MIN_NONZERO = 8


@dataclass(frozen=True)
class HurdleSplit:
    zero_count: int
    nonzero_values: np.ndarray

    @property
    def n(self) -> int:
        return self.zero_count + len(self.nonzero_values)

    @property
    def zero_fraction(self) -> Fraction:
        if self.n == 0:
            raise ValueError("empty sample")
        return Fraction(self.zero_count, self.n)


@dataclass(frozen=True)
class HurdleGldParams:
    lambda0: float
    continuous: GldParams

    def __post_init__(self):
        if not 0.0 <= self.lambda0 <= 1.0:
            raise ValueError("lambda0 must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {"lambda0": self.lambda0, "continuous": self.continuous.to_dict()}


@dataclass(frozen=True)
class HurdleFit:
    """Hurdle estimate. ``fit`` is None when the continuous part could not
    be estimated; ``error`` then holds the reason."""

    lambda0: float
    zero_count: int
    n: int
    fit: FitResult | None
    error: str | None = None

    @property
    def params(self) -> HurdleGldParams | None:
        if self.fit is None:
            return None
        return HurdleGldParams(self.lambda0, self.fit.params)

    def to_dict(self) -> dict:
        return {
            "lambda0": self.lambda0,
            "zero_count": self.zero_count,
            "n": self.n,
            "continuous": None if self.fit is None else self.fit.to_dict(),
            "error": self.error,
        }


def split(data) -> HurdleSplit:
    """Separate exact zeros from the rest, keeping the order of the rest."""
    x = np.asarray(data, dtype=float).ravel()
    zero = x == 0.0
    return HurdleSplit(int(zero.sum()), x[~zero])


def fit_hurdle(data, parametrization="RS", config: OptimizerConfig | None = None) -> HurdleFit:
    """lambda0 by the zero proportion, the GLD by ``nmle_fit`` on the non-zeros.

    A failure of the continuous fit (too few non-zero values, for one) is
    reported in the result instead of raised.
    """
    parts = split(data)
    if parts.n == 0:
        raise ValueError("empty sample")
    lambda0 = parts.zero_count / parts.n
    if len(parts.nonzero_values) < MIN_NONZERO:
        return HurdleFit(lambda0, parts.zero_count, parts.n, None,
                         f"need at least {MIN_NONZERO} non-zero values, "
                         f"got {len(parts.nonzero_values)}")
    try:
        fit = nmle_fit(parts.nonzero_values, parametrization, config)
    except FitError as exc:
        return HurdleFit(lambda0, parts.zero_count, parts.n, None, str(exc))
    return HurdleFit(lambda0, parts.zero_count, parts.n, fit)


def _bernoulli_loglik(lambda0, zeros, nonzeros):
    total = 0.0
    if zeros:
        total += -math.inf if lambda0 == 0.0 else zeros * math.log(lambda0)
    if nonzeros:
        total += -math.inf if lambda0 == 1.0 else nonzeros * math.log1p(-lambda0)
    return total


def hurdle_loglik(params: HurdleGldParams, data) -> float:
    """Bernoulli log-likelihood of the zero indicators plus the GLD
    log-likelihood of the non-zero values."""
    parts = split(data)
    m = len(parts.nonzero_values)
    part1 = _bernoulli_loglik(params.lambda0, parts.zero_count, m)
    if m == 0 or part1 == -math.inf:
        return part1
    return part1 + gld_log_likelihood(params.continuous, parts.nonzero_values)


def hurdle_cdf(params: HurdleGldParams, y):
    """F*(y) = lambda0 1{y >= 0} + (1 - lambda0) F(y)."""
    arr = np.asarray(y, dtype=float)
    atom = np.where(arr >= 0.0, params.lambda0, 0.0)
    out = atom + (1.0 - params.lambda0) * np.asarray(gld.cdf(params.continuous, arr))
    if arr.ndim == 0:
        return float(out)
    return out


def hurdle_sample(params: HurdleGldParams, n: int, rng=None) -> np.ndarray:
    """V ~ Bernoulli(lambda0); zero when V = 1, a GLD draw otherwise."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    if params.lambda0 == 0.0:
        # no atom: same stream as the plain GLD sampler
        return gld.sample(params.continuous, n, rng)
    v = rng.random(n) < params.lambda0
    out = np.zeros(n)
    m = int((~v).sum())
    if m:
        out[~v] = gld.sample(params.continuous, m, rng)
    return out
