"""Generalized Pareto baseline: distribution functions, maximum likelihood
with a known threshold, a log-link GLM on the mean and the hurdle
variants.

Density for y >= alpha (and y <= alpha - tau / xi when xi < 0):

    f(y) = (1 / tau) (1 + xi (y - alpha) / tau) ** (-(xi + 1) / xi)

with the exponential limit at xi = 0. The mean alpha + tau / (1 - xi)
is finite for xi < 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .optim import FitError, OptimizerConfig, nelder_mead
from .regression import LogisticFit, logistic_fit, _design

__all__ = [
    "GpdParams",
    "GpdFit",
    "GpdGlmFit",
    "HurdleGpdFit",
    "gpd_pdf",
    "gpd_logpdf",
    "gpd_cdf",
    "gpd_quantile",
    "gpd_sample",
    "gpd_mean",
    "gpd_loglik",
    "gpd_mle_fit",
    "gpd_glm_fit",
    "hurdle_gpd_fit",
    "gpd_residuals",
    "error_residual_law",
    "numeric_hessian",
]

XI_SMALL = 1e-10
XI_MAX = 1.0 - 1e-6
# the likelihood is unbounded for xi < -1
XI_MIN = -1.0


@dataclass(frozen=True)
class GpdParams:
    alpha: float
    tau: float
    xi: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        for name in ("alpha", "tau", "xi"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @classmethod
    def from_mean(cls, alpha, mu, xi) -> "GpdParams":
        """Parameters with mean ``mu``: tau = (mu - alpha)(1 - xi)."""
        if not xi < 1:
            raise ValueError("the mean form needs xi < 1")
        return cls(alpha, (mu - alpha) * (1.0 - xi), xi)

    @property
    def upper(self) -> float:
        if self.xi < 0:
            return self.alpha - self.tau / self.xi
        return math.inf

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "tau": self.tau, "xi": self.xi}


def _z(params: GpdParams, y):
    return (np.asarray(y, dtype=float) - params.alpha) / params.tau


def _scalar_or_array(y, out):
    if np.ndim(y) == 0:
        return float(out)
    return out


def gpd_logpdf(params: GpdParams, y):
    """log density; -inf outside the support."""
    z = _z(params, y)
    xi = params.xi
    with np.errstate(all="ignore"):
        if abs(xi) < XI_SMALL:
            out = -z - math.log(params.tau)
            inside = z >= 0
        else:
            t = xi * z
            out = -(1.0 + 1.0 / xi) * np.log1p(t) - math.log(params.tau)
            inside = (z >= 0) & (t > -1.0)
    out = np.where(inside, out, -np.inf)
    return _scalar_or_array(y, out)


def gpd_pdf(params: GpdParams, y):
    """Density; zero outside the support."""
    return _scalar_or_array(y, np.exp(np.asarray(gpd_logpdf(params, y))))


def _cdf_z(z, xi):
    z = np.maximum(z, 0.0)
    with np.errstate(all="ignore"):
        if abs(xi) < XI_SMALL:
            return -np.expm1(-z)
        t = xi * z
        return np.where(t > -1.0, -np.expm1(-np.log1p(t) / xi), 1.0)


def gpd_cdf(params: GpdParams, y):
    return _scalar_or_array(y, _cdf_z(_z(params, y), params.xi))


def gpd_quantile(params: GpdParams, p):
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise ValueError("probabilities must lie in [0, 1]")
    xi = params.xi
    with np.errstate(all="ignore"):
        lq = np.log1p(-p)
        if abs(xi) < XI_SMALL:
            out = params.alpha - params.tau * lq
        else:
            out = params.alpha + params.tau * np.expm1(-xi * lq) / xi
    return _scalar_or_array(p, out)


def gpd_sample(params: GpdParams, n: int, rng=None) -> np.ndarray:
    if n < 0:
        raise ValueError("n must be nonnegative")
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    return np.atleast_1d(gpd_quantile(params, rng.random(n)))


def gpd_mean(params: GpdParams) -> float:
    if not params.xi < 1:
        raise ValueError("the GPD mean is infinite for xi >= 1")
    return params.alpha + params.tau / (1.0 - params.xi)


def _loglik_z(z, tau, xi):
    """Log-likelihood of standardized excesses z = (y - alpha) / tau;
    tau may be a vector."""
    if np.any(z < 0):
        return -math.inf
    if abs(xi) < XI_SMALL:
        return float(-np.sum(z) - np.sum(np.log(tau) * np.ones_like(z)))
    t = xi * z
    if np.any(t <= -1.0):
        return -math.inf
    return float(-(1.0 + 1.0 / xi) * np.sum(np.log1p(t))
                 - np.sum(np.log(tau) * np.ones_like(z)))


def gpd_loglik(params: GpdParams, data) -> float:
    y = np.asarray(data, dtype=float)
    return _loglik_z((y - params.alpha) / params.tau, params.tau, params.xi)


@dataclass(frozen=True)
class GpdFit:
    params: GpdParams
    loglik: float
    converged: bool
    iterations: int = 0

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "mean": gpd_mean(self.params) if self.params.xi < 1 else math.inf,
            "loglik": self.loglik,
            "converged": self.converged,
            "iterations": self.iterations,
        }


def _moment_start(excess):
    m = float(np.mean(excess))
    s2 = float(np.var(excess))
    ratio = m * m / s2
    return 0.5 * (1.0 - ratio), 0.5 * m * (ratio + 1.0)


def gpd_mle_fit(data, alpha: float, config: OptimizerConfig | None = None) -> GpdFit:
    """Maximum likelihood (xi, tau) for a known threshold ``alpha``.

    The simplex starts from the moment estimates (the exponential fit
    when those do not cover the data); parameters whose bounded support
    misses an observation score -inf.
    """
    config = config or OptimizerConfig()
    y = np.asarray(data, dtype=float).ravel()
    if len(y) < 5:
        raise FitError("need at least 5 observations")
    if not np.all(np.isfinite(y)):
        raise ValueError("data must be finite")
    if np.any(y < alpha):
        raise ValueError("data below the threshold")
    excess = y - alpha
    if np.all(excess == 0):
        raise FitError("degenerate sample: every value equals the threshold")

    def objective(theta):
        xi, tau = theta
        if not (tau > 0 and XI_MIN < xi):
            return math.inf
        return -_loglik_z(excess / tau, tau, xi)

    starts = [_moment_start(excess), (0.0, float(np.mean(excess)))]
    x0 = next((np.array(s) for s in starts if math.isfinite(objective(s))), None)
    if x0 is None:
        raise FitError("no feasible starting point")
    res = nelder_mead(objective, x0, config)
    xi, tau = res.x
    return GpdFit(GpdParams(alpha, tau, xi), -float(res.fun), res.converged, res.iterations)


def numeric_hessian(f, x, rel_step=1e-5):
    """Central-difference Hessian with steps rel_step * max(|x_j|, 1)."""
    x = np.asarray(x, dtype=float)
    k = len(x)
    h = rel_step * np.maximum(np.abs(x), 1.0)
    H = np.empty((k, k))
    f0 = f(x)
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = h[i]
        H[i, i] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / h[i] ** 2
        for j in range(i + 1, k):
            ej = np.zeros(k)
            ej[j] = h[j]
            val = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) \
                / (4.0 * h[i] * h[j])
            H[i, j] = H[j, i] = val
    return H


@dataclass(frozen=True)
class GpdGlmFit:
    """Log-link GLM for the GPD mean; ``se`` covers (xi, beta...) and is
    NaN when the observed information is not positive definite."""

    xi: float
    beta: np.ndarray
    alpha: float
    se: np.ndarray
    loglik: float
    converged: bool
    iterations: int = 0
    se_available: bool = True

    def mu(self, X) -> np.ndarray:
        return np.exp(_design(X) @ self.beta)

    def tau(self, X) -> np.ndarray:
        return (self.mu(X) - self.alpha) * (1.0 - self.xi)

    @property
    def p_values(self) -> np.ndarray:
        est = np.concatenate([[self.xi], self.beta])
        return 2.0 * stats.norm.sf(np.abs(est / self.se))

    def to_dict(self) -> dict:
        return {
            "xi": self.xi,
            "beta": self.beta.tolist(),
            "alpha": self.alpha,
            "se": [None if not math.isfinite(s) else s for s in self.se],
            "p_values": [None if not math.isfinite(p) else p for p in self.p_values],
            "se_available": self.se_available,
            "loglik": self.loglik,
            "converged": self.converged,
            "iterations": self.iterations,
        }


def _glm_negloglik(X, excess, alpha):
    def objective(theta):
        xi = theta[0]
        if not (XI_MIN < xi < XI_MAX):
            return math.inf
        with np.errstate(over="ignore"):
            mu = np.exp(X @ theta[1:])
        tau = (mu - alpha) * (1.0 - xi)
        if not np.all(tau > 0) or not np.all(np.isfinite(tau)):
            return math.inf
        return -_loglik_z(excess / tau, tau, xi)
    return objective


def gpd_glm_fit(X, y, alpha: float, config: OptimizerConfig | None = None) -> GpdGlmFit:
    """Joint maximum likelihood of (xi, beta) with mu_i = exp(x_i beta)
    and tau_i = (mu_i - alpha)(1 - xi).

    Starts from the plain fit, so an intercept-only design reproduces
    ``gpd_mle_fit``.
    """
    config = config or OptimizerConfig()
    X = _design(X)
    y = np.asarray(y, dtype=float).ravel()
    if len(y) != X.shape[0]:
        raise ValueError("response and design lengths differ")
    if np.any(y < alpha):
        raise ValueError("data below the threshold")
    plain = gpd_mle_fit(y, alpha, config)
    xi0 = min(plain.params.xi, XI_MAX - 1e-6)
    mu0 = gpd_mean(GpdParams(alpha, plain.params.tau, xi0))
    beta0, *_ = np.linalg.lstsq(X, np.full(len(y), math.log(mu0)), rcond=None)
    objective = _glm_negloglik(X, y - alpha, alpha)
    x0 = np.concatenate([[xi0], beta0])
    if not math.isfinite(objective(x0)):
        raise FitError("no feasible starting point for the GLM")
    res = nelder_mead(objective, x0, config)
    theta = res.x
    se = np.full(len(theta), math.nan)
    available = False
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        H = numeric_hessian(objective, theta)
    if np.all(np.isfinite(H)):
        try:
            np.linalg.cholesky(H)
            se = np.sqrt(np.diag(np.linalg.inv(H)))
            available = True
        except np.linalg.LinAlgError:
            pass
    return GpdGlmFit(float(theta[0]), np.array(theta[1:]), float(alpha), se,
                     -float(res.fun), res.converged, res.iterations, available)


@dataclass(frozen=True)
class HurdleGpdFit:
    """Zero mass by proportion (``lambda0``) or by logistic regression
    (``zero_part``), and a GPD or GPD GLM for the non-zero values."""

    continuous: GpdFit | GpdGlmFit
    lambda0: float | None = None
    zero_part: LogisticFit | None = None
    zero_error: str | None = None
    n: int = 0
    zero_count: int = 0

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "zero_count": self.zero_count,
            "lambda0": self.lambda0,
            "zero_part": None if self.zero_part is None else self.zero_part.to_dict(),
            "zero_error": self.zero_error,
            "continuous": self.continuous.to_dict(),
        }


def hurdle_gpd_fit(y, alpha: float, X=None, Z=None,
                   config: OptimizerConfig | None = None) -> HurdleGpdFit:
    """Hurdle GPD. Without covariates lambda0 is the zero proportion and
    the GPD is fit to the non-zero values; with ``X`` the non-zero part
    is the GLM and the zero part a logistic regression on ``Z``
    (default ``X``)."""
    y = np.asarray(y, dtype=float).ravel()
    zero = y == 0.0
    n, zeros = len(y), int(zero.sum())
    if n == 0:
        raise ValueError("empty sample")
    if X is None:
        cont = gpd_mle_fit(y[~zero], alpha, config)
        return HurdleGpdFit(cont, lambda0=zeros / n, n=n, zero_count=zeros)
    X = _design(X)
    Z = X if Z is None else _design(Z)
    zero_part, zero_error = None, None
    try:
        zero_part = logistic_fit(Z, zero.astype(float))
    except FitError as exc:
        zero_error = str(exc)
    cont = gpd_glm_fit(X[~zero], y[~zero], alpha, config)
    return HurdleGpdFit(cont, zero_part=zero_part, zero_error=zero_error,
                        n=n, zero_count=zeros)


def gpd_residuals(fit: GpdGlmFit, X, y, alpha: float | None = None):
    """Error residuals (y - alpha) / mu_hat and normalized quantile
    residuals Phi^-1(F(y)) under each observation's fitted GPD.

    Returns (e, r, flagged); ``flagged`` marks infinite r.
    """
    alpha = fit.alpha if alpha is None else alpha
    y = np.asarray(y, dtype=float).ravel()
    if np.any(y < alpha):
        raise ValueError("data below the threshold")
    mu = fit.mu(X)
    tau = (mu - alpha) * (1.0 - fit.xi)
    e = (y - alpha) / mu
    u = _cdf_z((y - alpha) / tau, fit.xi)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        r = stats.norm.ppf(u)
    return e, r, ~np.isfinite(r)


def error_residual_law(fit: GpdGlmFit) -> GpdParams:
    """Reference law GPD(0, xi_hat, mu = 1) of the error residuals."""
    return GpdParams.from_mean(0.0, 1.0, fit.xi)
