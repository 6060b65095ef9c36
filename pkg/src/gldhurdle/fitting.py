"""Estimation of GLD parameters from a plain sample.

The numerical maximum likelihood fit follows the candidate-screening
scheme: quasi-random (lambda3, lambda4) pairs are completed into full
parameter vectors by the percentile (RS) or moment (FKML) equations, the
pairs that are illegal or fail to cover the data are dropped, the best
remaining pair by the matching norm seeds a Nelder-Mead search of the
likelihood.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from . import _kernels
from .gld import (
    GldParams,
    Parametrization,
    fkml_s_moments,
    is_valid,
    rs_valid_lambdas,
    support,
)
from .optim import FitError, OptimizerConfig, nelder_mead

__all__ = [
    "PercentileStats",
    "MomentStats",
    "InitializerFit",
    "FitResult",
    "sample_percentile",
    "percentile_stats",
    "rs_percentile_stats",
    "rs_percentile_fit",
    "sample_moments",
    "fkml_shape_moments",
    "fkml_mom_fit",
    "quasi_random_candidates",
    "gld_log_likelihood",
    "nmle_fit",
]

_LOWER_SHAPE_MOM = -0.25 + 1e-6


@dataclass(frozen=True)
class PercentileStats:
    rho1: float
    rho2: float
    rho3: float
    rho4: float
    v: float = 0.1


@dataclass(frozen=True)
class MomentStats:
    mu1: float
    mu2: float
    alpha3: float
    alpha4: float


@dataclass(frozen=True)
class InitializerFit:
    """Outcome of the percentile or moment matching initializers."""

    params: GldParams
    objective: float
    converged: bool
    clamped: bool = False


@dataclass(frozen=True)
class FitResult:
    params: GldParams
    loglik: float
    converged: bool
    iterations: int
    initializer: str
    init_params: GldParams
    init_objective: float = math.nan

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "loglik": self.loglik,
            "converged": self.converged,
            "iterations": self.iterations,
            "initializer": self.initializer,
            "init_params": self.init_params.to_dict(),
            "init_objective": self.init_objective,
        }


def _as_array(data):
    arr = np.asarray(data)
    if arr.dtype != object:
        arr = arr.astype(float)
    return arr.ravel()


def sample_percentile(data, p):
    """Sample p-th percentile x(r) + k (x(r+1) - x(r)), r = floor((n+1)p).

    Works with exact numbers (``fractions.Fraction``) as well as floats.
    """
    x = np.sort(_as_array(data))
    n = len(x)
    if n == 0:
        raise ValueError("empty sample")
    pos = (n + 1) * p
    r = math.floor(pos)
    k = pos - r
    if r < 1 or r > n or (r == n and k != 0):
        raise ValueError(f"p={p} is outside [1/(n+1), n/(n+1)] for n={n}")
    if k == 0:
        return x[r - 1]
    return x[r - 1] + k * (x[r] - x[r - 1])


def percentile_stats(data, v=0.1) -> PercentileStats:
    if not 0 < v < 0.25:
        raise ValueError("v must lie in (0, 0.25)")
    # exact probabilities when v is exact
    frac = Fraction if isinstance(v, Fraction) else (lambda a, b: a / b)
    half = sample_percentile(data, frac(1, 2))
    lo = sample_percentile(data, v)
    hi = sample_percentile(data, 1 - v)
    q1 = sample_percentile(data, frac(1, 4))
    q3 = sample_percentile(data, frac(3, 4))
    rho2 = hi - lo
    if rho2 == 0:
        raise ValueError("degenerate sample: inter-percentile range is zero")
    return PercentileStats(half, rho2, (half - lo) / (hi - half), (q3 - q1) / rho2, v)


def rs_percentile_stats(l3, l4, v=0.1):
    """Theoretical (rho3, rho4) and lambda2 * rho2 of an RS vector."""
    l3 = np.asarray(l3, dtype=float)
    l4 = np.asarray(l4, dtype=float)
    w = 1.0 - v
    with np.errstate(all="ignore"):
        spread = w ** l3 - v ** l3 + w ** l4 - v ** l4
        num3 = w ** l4 - v ** l3 + 0.5 ** l3 - 0.5 ** l4
        den3 = w ** l3 - v ** l4 + 0.5 ** l4 - 0.5 ** l3
        rho3 = num3 / den3
        rho4 = (0.75 ** l3 - 0.25 ** l4 + 0.75 ** l4 - 0.25 ** l3) / spread
    return rho3, rho4, spread


def _rs_complete(l3, l4, stats: PercentileStats):
    """lambda1, lambda2 and the matching norm H for (lambda3, lambda4)."""
    rho3, rho4, spread = rs_percentile_stats(l3, l4, stats.v)
    with np.errstate(all="ignore"):
        l2 = spread / stats.rho2
        l1 = stats.rho1 - (0.5 ** np.asarray(l3) - 0.5 ** np.asarray(l4)) / l2
        h = np.hypot(rho3 - stats.rho3, rho4 - stats.rho4)
    h = np.where(np.isfinite(h) & np.isfinite(l1) & np.isfinite(l2) & (l2 != 0), h, np.inf)
    return l1, l2, h


def quasi_random_candidates(config: OptimizerConfig | None = None, seed=None) -> np.ndarray:
    """Scrambled Sobol points on the candidate square, shape (n, 2)."""
    config = config or OptimizerConfig()
    n = config.n_candidates
    if n == 0:
        return np.empty((0, 2))
    seed = config.seed if seed is None else seed
    sobol = qmc.Sobol(d=2, scramble=True, seed=np.random.default_rng(seed))
    pts = sobol.random_base2(max(0, math.ceil(math.log2(n))))[:n]
    lo, hi = config.candidate_square
    return lo + (hi - lo) * pts


def _best_starts(h, count):
    order = np.lexsort((np.arange(len(h)), h))
    return [i for i in order[:count] if np.isfinite(h[i])]


def rs_percentile_fit(data, v=0.1, config: OptimizerConfig | None = None,
                      n_starts: int = 8) -> InitializerFit:
    """Percentile-matching RS estimate.

    (lambda3, lambda4) solve rho3, rho4 = sample values by a
    Levenberg-Marquardt iteration (finite-difference Jacobian) from the
    best quasi-random starts; legal vectors are preferred over illegal
    ones with a smaller norm.
    """
    config = config or OptimizerConfig()
    stats = percentile_stats(data, v)
    cand = quasi_random_candidates(config)
    _, _, h = _rs_complete(cand[:, 0], cand[:, 1], stats)

    def resid(t):
        r3, r4, _ = rs_percentile_stats(t[0], t[1], v)
        out = np.array([r3 - stats.rho3, r4 - stats.rho4], dtype=float)
        return np.where(np.isfinite(out), out, 1e6)

    results = []
    for idx in _best_starts(h, n_starts):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            sol = optimize.least_squares(resid, cand[idx], method="lm",
                                         xtol=1e-15, ftol=1e-15, gtol=1e-15)
        l3, l4 = sol.x
        l1, l2, hval = _rs_complete(l3, l4, stats)
        params = GldParams.rs(float(l1), float(l2), l3, l4)
        results.append((not is_valid(params), float(hval), params))
    if not results:
        raise FitError("no usable percentile starting point")
    results.sort(key=lambda item: (item[0], item[1]))
    invalid, hval, params = results[0]
    return InitializerFit(params, hval, converged=(not invalid) and hval < 1e-6)


def sample_moments(data) -> MomentStats:
    """Mean, central second moment (divisor n), skewness and kurtosis."""
    x = _as_array(data)
    n = len(x)
    if n < 2:
        raise ValueError("need at least two observations")
    mu1 = x.sum() / n
    d = x - mu1
    mu2 = (d * d).sum() / n
    if mu2 == 0:
        raise ValueError("degenerate sample: zero variance")
    m3 = (d ** 3).sum() / n
    m4 = (d ** 4).sum() / n
    alpha3 = m3 / mu2 ** 1.5
    alpha4 = m4 / (mu2 * mu2)
    return MomentStats(mu1, mu2, alpha3, alpha4)


def _central_from_raw(s1, s2, s3, s4):
    var = s2 - s1 ** 2
    with np.errstate(all="ignore"):
        a3 = (s3 - 3 * s1 * s2 + 2 * s1 ** 3) / var ** 1.5
        a4 = (s4 - 4 * s1 * s3 + 6 * s1 ** 2 * s2 - 3 * s1 ** 4) / var ** 2
    return var, a3, a4


def _fkml_shape_moments_quad(l3, l4):
    from scipy import integrate

    m = -(1.0 / (l3 + 1.0) - 1.0 / (l4 + 1.0))
    out = []
    for k in (2, 3, 4):
        def integrand(u, k=k):
            return (_kernels.quantile_scalar(u, 0.0, 1.0, l3, l4, _kernels.FKML) - m) ** k

        val = 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            for a, b in ((0.0, 0.5), (0.5, 1.0)):
                val += integrate.quad(integrand, a, b, limit=200, epsabs=0.0, epsrel=1e-11)[0]
        out.append(val)
    var, c3, c4 = out
    return var, c3 / var ** 1.5, c4 / var ** 2


def fkml_shape_moments(l3, l4, screening=False):
    """(variance at lambda2 = 1, skewness, kurtosis) of an FKML shape pair.

    The closed form loses accuracy as a shape approaches 0; there the
    scalar path integrates the quantile function instead, while the
    vectorized ``screening`` path moves such shapes out to 1e-3.
    """
    l3 = np.asarray(l3, dtype=float)
    l4 = np.asarray(l4, dtype=float)
    if screening:
        n3 = np.where(np.abs(l3) < 1e-3, np.where(l3 < 0, -1e-3, 1e-3), l3)
        n4 = np.where(np.abs(l4) < 1e-3, np.where(l4 < 0, -1e-3, 1e-3), l4)
        with np.errstate(all="ignore"):
            s = fkml_s_moments(n3, n4, 4)
        return _central_from_raw(*s)
    if l3.ndim or l4.ndim:
        raise ValueError("accurate path takes scalar shapes")
    if min(abs(float(l3)), abs(float(l4))) < 0.05:
        return _fkml_shape_moments_quad(float(l3), float(l4))
    s = fkml_s_moments(float(l3), float(l4), 4)
    var, a3, a4 = _central_from_raw(*[float(v) for v in s])
    return var, float(a3), float(a4)


def _fkml_complete(l3, l4, stats: MomentStats, var_unit):
    with np.errstate(all="ignore"):
        l2 = np.sqrt(var_unit / stats.mu2)
        l1 = stats.mu1 + (1.0 / (l3 + 1.0) - 1.0 / (l4 + 1.0)) / l2
    return l1, l2


def fkml_mom_fit(data, config: OptimizerConfig | None = None,
                 n_starts: int = 8) -> InitializerFit:
    """Moment-matching FKML estimate over (-1/4, inf)^2."""
    config = config or OptimizerConfig()
    stats = sample_moments(data)
    cand = quasi_random_candidates(config)
    h = _fkml_screen(cand, stats)

    def resid(t):
        _, a3, a4 = fkml_shape_moments(t[0], t[1])
        out = np.array([a3 - stats.alpha3, a4 - stats.alpha4], dtype=float)
        return np.where(np.isfinite(out), out, 1e6)

    lower = [_LOWER_SHAPE_MOM, _LOWER_SHAPE_MOM]
    results = []
    for idx in _best_starts(h, n_starts):
        x0 = np.maximum(cand[idx], _LOWER_SHAPE_MOM + 1e-9)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            sol = optimize.least_squares(resid, x0, bounds=(lower, [np.inf, np.inf]),
                                         method="trf", xtol=1e-12, ftol=1e-12, gtol=1e-12)
        l3, l4 = (float(v) for v in sol.x)
        var, a3, a4 = fkml_shape_moments(l3, l4)
        hval = math.hypot(a3 - stats.alpha3, a4 - stats.alpha4)
        l1, l2 = _fkml_complete(l3, l4, stats, var)
        clamped = bool(np.any(np.isclose(sol.x, _LOWER_SHAPE_MOM, atol=1e-9)))
        results.append((hval if math.isfinite(hval) else math.inf, clamped,
                        GldParams.fkml(float(l1), float(l2), l3, l4)))
    if not results:
        raise FitError("no usable moment starting point")
    results.sort(key=lambda item: item[0])
    hval, clamped, params = results[0]
    return InitializerFit(params, hval, converged=hval < 1e-6, clamped=clamped)


def _fkml_screen(cand, stats: MomentStats):
    ok = (cand[:, 0] > _LOWER_SHAPE_MOM) & (cand[:, 1] > _LOWER_SHAPE_MOM)
    h = np.full(len(cand), np.inf)
    if ok.any():
        var, a3, a4 = fkml_shape_moments(cand[ok, 0], cand[ok, 1], screening=True)
        with np.errstate(all="ignore"):
            hv = np.hypot(a3 - stats.alpha3, a4 - stats.alpha4)
        h[ok] = np.where(np.isfinite(hv) & (var > 0), hv, np.inf)
    return h


def gld_log_likelihood(params: GldParams, data) -> float:
    """Log-likelihood through u_i = F(x_i); -inf for illegal or uncovering
    parameters rather than an exception."""
    if not is_valid(params):
        return -math.inf
    x = np.ascontiguousarray(np.asarray(data, dtype=float).ravel())
    warm = np.full(len(x), 0.5)
    return float(_kernels.loglik_with_warm(x, *params.lambdas, params.kind, warm))


def screen_candidates(data, parametrization, config: OptimizerConfig):
    """Complete, filter and rank the candidates.

    A candidate survives when it is legal, its support covers the data
    and its log-likelihood is finite. Returns (start params, matching
    norm) of the best survivor; ties in the norm go to the smaller index.
    """
    par = Parametrization.parse(parametrization)
    x = np.asarray(data, dtype=float)
    lo, hi = float(x.min()), float(x.max())
    cand = quasi_random_candidates(config)
    if par is Parametrization.RS:
        # v = 0.1 needs n >= 9; the smallest admissible samples use 1/(n+1)
        stats = percentile_stats(x, max(0.1, 1.0 / (len(x) + 1)))
        l1, l2, h = _rs_complete(cand[:, 0], cand[:, 1], stats)
    else:
        stats = sample_moments(x)
        h = _fkml_screen(cand, stats)
        ok = np.isfinite(h)
        var = np.full(len(cand), np.nan)
        if ok.any():
            var[ok] = fkml_shape_moments(cand[ok, 0], cand[ok, 1], screening=True)[0]
        l1, l2 = _fkml_complete(cand[:, 0], cand[:, 1], stats, var)
    for idx in _best_starts(h, len(h)):
        params = GldParams(l1[idx], l2[idx], cand[idx, 0], cand[idx, 1], par)
        if not is_valid(params):
            continue
        if not support(params).contains(lo, hi):
            continue
        # covering the data is not enough when a thin tail underflows the
        # density to 0 at an observation
        if not math.isfinite(gld_log_likelihood(params, x)):
            continue
        return params, float(h[idx])
    raise FitError("every candidate was illegal or failed to cover the data")


def nmle_fit(data, parametrization="RS", config: OptimizerConfig | None = None,
             init: GldParams | None = None) -> FitResult:
    """Numerical maximum likelihood fit of a GLD to ``data``."""
    config = config or OptimizerConfig()
    par = Parametrization.parse(parametrization)
    x = np.ascontiguousarray(np.asarray(data, dtype=float).ravel())
    if len(x) < 8:
        raise FitError("need at least 8 observations")
    if not np.all(np.isfinite(x)):
        raise ValueError("data must be finite")
    if np.ptp(x) == 0:
        raise FitError("degenerate sample: all values are equal")
    if init is None:
        start, h0 = screen_candidates(x, par, config)
        initializer = "percentile" if par is Parametrization.RS else "moments"
    else:
        start, h0 = GldParams(*init.lambdas, par), math.nan
        initializer = "user"

    kind = par.kind
    warm = np.full(len(x), 0.5)
    rs = par is Parametrization.RS

    def objective(theta):
        l1, l2, l3, l4 = theta
        if rs:
            if not rs_valid_lambdas(l2, l3, l4):
                return math.inf
        elif not l2 > 0.0:
            return math.inf
        return -_kernels.loglik_with_warm(x, l1, l2, l3, l4, kind, warm)

    res = nelder_mead(objective, np.array(start.lambdas), config)
    params = GldParams(*res.x, par)
    loglik = -res.fun
    if not math.isfinite(loglik):
        raise FitError("likelihood is not finite at any explored point")
    return FitResult(params, loglik, res.converged, res.iterations, initializer,
                     start, h0)

