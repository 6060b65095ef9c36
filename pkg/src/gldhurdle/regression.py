"""GLD location regression, logistic regression for the zero part, and
their hurdle combination.

The error of ``x = W beta + eps`` follows a GLD whose location is pinned
by lambda1* so that E(eps) = 0. Residuals are recentered at every
likelihood evaluation, which makes an intercept column flat in the
objective; its value is recovered afterwards as the mean of the partial
residuals.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import optimize, special, stats

from . import _kernels, gld
from .fitting import nmle_fit
from .gld import GldParams, Parametrization, rs_valid_lambdas
from .optim import FitError, OptimizerConfig, nelder_mead

__all__ = [
    "RegressionFit",
    "CoefficientCI",
    "LogisticFit",
    "HurdleRegressionFit",
    "SeparationError",
    "ols_fit",
    "lambda1_star",
    "gld_regression_fit",
    "simulate_coefficient_cis",
    "quantile_type8",
    "logistic_fit",
    "hurdle_regression_fit",
    "regression_residuals",
    "replicate_streams",
]

MIN_RESIDUALS = 8
CI_MAX_FAILURE = 0.2


class SeparationError(FitError):
    """The logistic likelihood has no finite maximizer."""


@dataclass(frozen=True)
class RegressionFit:
    beta: np.ndarray
    lambda1_star: float
    lambda2: float
    lambda3: float
    lambda4: float
    parametrization: Parametrization
    loglik: float
    converged: bool
    iterations: int = 0
    init_beta: np.ndarray | None = None
    init_lambdas: tuple | None = None
    init_loglik: float = math.nan

    @property
    def error_params(self) -> GldParams:
        return GldParams(self.lambda1_star, self.lambda2, self.lambda3, self.lambda4,
                         self.parametrization)

    def to_dict(self) -> dict:
        return {
            "beta": [float(b) for b in self.beta],
            "lambda1_star": self.lambda1_star,
            "lambda2": self.lambda2,
            "lambda3": self.lambda3,
            "lambda4": self.lambda4,
            "parametrization": self.parametrization.value,
            "loglik": self.loglik,
            "converged": self.converged,
            "iterations": self.iterations,
            "init_beta": None if self.init_beta is None else [float(b) for b in self.init_beta],
            "init_lambdas": None if self.init_lambdas is None else list(self.init_lambdas),
            "init_loglik": self.init_loglik,
        }


@dataclass(frozen=True)
class CoefficientCI:
    """Simulated coefficient samples, mean-shifted to the point estimates.

    ``samples`` has one row per successful replicate.
    """

    estimate: np.ndarray
    samples: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    alpha: float
    failures: int = 0

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate.tolist(),
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "sd": self.samples.std(axis=0, ddof=1).tolist() if len(self.samples) > 1
            else [math.nan] * len(self.estimate),
            "alpha": self.alpha,
            "replicates": int(len(self.samples)),
            "failures": self.failures,
        }


@dataclass(frozen=True)
class LogisticFit:
    gamma: np.ndarray
    se: np.ndarray
    deviance: float
    converged: bool
    iterations: int
    gradient_norm: float = math.nan

    @property
    def z_values(self) -> np.ndarray:
        return self.gamma / self.se

    @property
    def p_values(self) -> np.ndarray:
        return 2.0 * stats.norm.sf(np.abs(self.z_values))

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma.tolist(),
            "se": self.se.tolist(),
            "p_values": self.p_values.tolist(),
            "deviance": self.deviance,
            "converged": self.converged,
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
        }


@dataclass(frozen=True)
class HurdleRegressionFit:
    zero_part: LogisticFit | None
    nonzero_part: RegressionFit
    nonzero_cis: CoefficientCI | None = None
    zero_error: str | None = None
    n: int = 0
    zero_count: int = 0

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "zero_count": self.zero_count,
            "zero_part": None if self.zero_part is None else self.zero_part.to_dict(),
            "zero_error": self.zero_error,
            "nonzero_part": self.nonzero_part.to_dict(),
            "nonzero_cis": None if self.nonzero_cis is None else self.nonzero_cis.to_dict(),
        }


def _design(W) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    if W.ndim != 2:
        raise ValueError("design matrix must be two-dimensional")
    if not np.all(np.isfinite(W)):
        raise ValueError("design matrix must be finite")
    return np.ascontiguousarray(W)


def _check_rank(W):
    n, p = W.shape
    if n < p:
        raise ValueError(f"need at least as many rows as columns ({n} < {p})")
    if np.linalg.matrix_rank(W) < p:
        raise ValueError("design matrix is rank deficient")


def ols_fit(W, x):
    """Least squares beta and residuals; ``W`` must have full column rank."""
    W = _design(W)
    x = np.asarray(x, dtype=float).ravel()
    if len(x) != W.shape[0]:
        raise ValueError("response and design lengths differ")
    _check_rank(W)
    beta, *_ = np.linalg.lstsq(W, x, rcond=None)
    return beta, x - W @ beta


def lambda1_star(lambda2, lambda3, lambda4, parametrization="RS") -> float:
    """Location giving the GLD zero mean."""
    par = Parametrization.parse(parametrization)
    if min(lambda3, lambda4) <= -1.0:
        raise ValueError("the mean does not exist for these shapes")
    gap = 1.0 / (lambda3 + 1.0) - 1.0 / (lambda4 + 1.0)
    if par is Parametrization.RS:
        return -gap / lambda2
    return gap / lambda2


def _intercept_column(W):
    cols = [j for j in range(W.shape[1]) if np.all(W[:, j] == 1.0)]
    return cols[0] if cols else None


def _shapes_ok(l2, l3, l4, rs):
    if min(l3, l4) <= -1.0:
        return False
    if rs:
        return rs_valid_lambdas(l2, l3, l4)
    return l2 > 0.0


def gld_regression_fit(W, x, parametrization="RS", config: OptimizerConfig | None = None,
                       init_config: OptimizerConfig | None = None) -> RegressionFit:
    """Joint likelihood fit of the location regression with GLD errors.

    Starting values are OLS coefficients and ``nmle_fit`` on the OLS
    residuals (run with ``init_config`` when given). The simplex then
    works on the non-intercept coefficients and (lambda2, lambda3,
    lambda4), with lambda1* recomputed at every evaluation.
    """
    config = config or OptimizerConfig()
    par = Parametrization.parse(parametrization)
    rs = par is Parametrization.RS
    W = _design(W)
    x = np.ascontiguousarray(np.asarray(x, dtype=float).ravel())
    if len(x) < MIN_RESIDUALS:
        raise FitError(f"need at least {MIN_RESIDUALS} observations")
    beta0, resid0 = ols_fit(W, x)
    err_fit = nmle_fit(resid0, par, init_config or config)
    l2, l3, l4 = err_fit.params.lambdas[1:]

    icol = _intercept_column(W)
    free = [j for j in range(W.shape[1]) if j != icol]
    Wf = np.ascontiguousarray(W[:, free])
    nb = len(free)
    kind = par.kind
    warm = np.full(len(x), 0.5)

    def centered(bf):
        e = x - Wf @ bf
        return e - e.mean()

    def objective(theta):
        bf = theta[:nb]
        a2, a3, a4 = theta[nb:]
        if not _shapes_ok(a2, a3, a4, rs):
            return math.inf
        l1 = lambda1_star(a2, a3, a4, par)
        return -_kernels.loglik_with_warm(centered(bf), l1, a2, a3, a4, kind, warm)

    start = np.concatenate([beta0[free], [l2, l3, l4]])
    f0 = objective(start)
    # the nmle location need not equal lambda1*; widen until every
    # residual is covered (support scales about the zero mean)
    widen = 0
    while not math.isfinite(f0) and widen < 200:
        start[nb] *= 0.9
        f0 = objective(start)
        widen += 1
    if not math.isfinite(f0):
        raise FitError("no starting point covers the residuals")

    res = nelder_mead(objective, start, config)
    bf = res.x[:nb]
    a2, a3, a4 = (float(v) for v in res.x[nb:])
    beta = np.empty(W.shape[1])
    beta[free] = bf
    if icol is not None:
        beta[icol] = float(np.mean(x - Wf @ bf))
    return RegressionFit(
        beta=beta,
        lambda1_star=lambda1_star(a2, a3, a4, par),
        lambda2=a2,
        lambda3=a3,
        lambda4=a4,
        parametrization=par,
        loglik=-float(res.fun),
        converged=bool(res.converged and err_fit.converged),
        iterations=res.iterations,
        init_beta=beta0,
        init_lambdas=(float(start[nb]), l3, l4),
        init_loglik=-f0,
    )


def quantile_type8(sample, p):
    """Hyndman-Fan type 8 sample quantile, h = (n + 1/3) p + 1/3.

    Exact when the sample and ``p`` are ``fractions.Fraction`` values.
    """
    x = sorted(np.asarray(sample).ravel().tolist())
    n = len(x)
    if n == 0:
        raise ValueError("empty sample")
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    third = Fraction(1, 3) if isinstance(p, Fraction) else 1.0 / 3.0
    h = (n + third) * p + third
    if h <= 1:
        return x[0]
    if h >= n:
        return x[-1]
    j = math.floor(h)
    g = h - j
    return x[j - 1] + g * (x[j] - x[j - 1])


def replicate_streams(seed, count):
    """Independent generators for replicates 0..count-1 of a master seed.

    Replicate i always receives the i-th child of ``SeedSequence(seed)``,
    whatever the number or order of replicates actually run.
    """
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.default_rng(s) for s in children]


def simulate_coefficient_cis(fit: RegressionFit, W, n_reps: int = 1000, alpha: float = 0.05,
                             seed=0, config: OptimizerConfig | None = None,
                             init_config: OptimizerConfig | None = None) -> CoefficientCI:
    """Parametric simulation intervals for the regression coefficients.

    Each replicate refits ``y* = W beta_hat + eps`` with eps drawn from
    the fitted error GLD. The coefficient samples are shifted to have
    the point estimates as their means, and the bounds are type 8
    quantiles at alpha/2 and 1 - alpha/2. Failed replicates are dropped;
    more than 20% failures is an error.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be positive")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    W = _design(W)
    mean = W @ fit.beta
    err = fit.error_params
    rows = []
    failures = 0
    for rng in replicate_streams(seed, n_reps):
        y = mean + gld.sample(err, len(mean), rng)
        try:
            rep = gld_regression_fit(W, y, fit.parametrization, config, init_config)
        except FitError:
            failures += 1
            continue
        rows.append(rep.beta)
    if failures > CI_MAX_FAILURE * n_reps:
        raise FitError(f"{failures} of {n_reps} replicate fits failed")
    samples = np.array(rows)
    samples = samples - samples.mean(axis=0) + fit.beta
    lower = np.array([quantile_type8(samples[:, j], alpha / 2) for j in range(W.shape[1])])
    upper = np.array([quantile_type8(samples[:, j], 1 - alpha / 2) for j in range(W.shape[1])])
    return CoefficientCI(np.array(fit.beta, dtype=float), samples, lower, upper, alpha, failures)


def _has_separation(Z, v):
    """LP test for (quasi-)complete separation.

    The MLE fails to exist exactly when some d gives s_i z_i.d >= 0 for
    all i with at least one strict inequality (s_i = 2 v_i - 1).
    """
    s = 2.0 * v - 1.0
    A = s[:, None] * Z
    p = Z.shape[1]
    res = optimize.linprog(-A.sum(axis=0), A_ub=-A, b_ub=np.zeros(len(v)),
                           bounds=[(-1.0, 1.0)] * p, method="highs")
    if res.status != 0:
        return False
    scale = max(1.0, float(np.abs(A).sum()))
    return -res.fun > 1e-9 * scale


def _logistic_deviance(eta, v):
    # -2 * sum(v eta - log(1 + e^eta))
    return -2.0 * float(np.sum(v * eta - np.logaddexp(0.0, eta)))


def logistic_fit(Z, v, max_iter: int = 50, tol: float = 1e-8) -> LogisticFit:
    """Logistic regression of the indicator ``v`` on ``Z`` by IRLS."""
    Z = _design(Z)
    v = np.asarray(v, dtype=float).ravel()
    if len(v) != Z.shape[0]:
        raise ValueError("indicator and design lengths differ")
    if not np.all((v == 0.0) | (v == 1.0)):
        raise ValueError("indicator must be binary")
    if v.min() == v.max():
        raise FitError("both classes must be present")
    _check_rank(Z)
    if _has_separation(Z, v):
        raise SeparationError("complete or quasi-complete separation")

    gamma = np.zeros(Z.shape[1])
    dev = _logistic_deviance(Z @ gamma, v)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        eta = Z @ gamma
        mu = special.expit(eta)
        w = mu * (1.0 - mu)
        grad = Z.T @ (v - mu)
        info = Z.T @ (w[:, None] * Z)
        try:
            step = np.linalg.solve(info, grad)
        except np.linalg.LinAlgError as exc:
            raise SeparationError("information matrix became singular") from exc
        new_gamma = gamma + step
        new_dev = _logistic_deviance(Z @ new_gamma, v)
        # step halving keeps the deviance from increasing
        halve = 0
        while new_dev > dev + 1e-12 and halve < 30:
            step *= 0.5
            new_gamma = gamma + step
            new_dev = _logistic_deviance(Z @ new_gamma, v)
            halve += 1
        if np.max(np.abs(new_gamma)) > 1e4:
            raise SeparationError("coefficients diverge")
        change = abs(dev - new_dev)
        gamma, dev = new_gamma, new_dev
        if change < tol:
            converged = True
            break

    mu = special.expit(Z @ gamma)
    w = mu * (1.0 - mu)
    info = Z.T @ (w[:, None] * Z)
    # one more Newton step at the converged point polishes the gradient
    gamma = gamma + np.linalg.solve(info, Z.T @ (v - mu))
    mu = special.expit(Z @ gamma)
    w = mu * (1.0 - mu)
    info = Z.T @ (w[:, None] * Z)
    dev = _logistic_deviance(Z @ gamma, v)
    grad_norm = float(np.linalg.norm(Z.T @ (v - mu)))
    cov = np.linalg.inv(info)
    se = np.sqrt(np.diag(cov))
    return LogisticFit(gamma, se, dev, converged, it, grad_norm)


def hurdle_regression_fit(W, Z, y, parametrization="RS", config: OptimizerConfig | None = None,
                          ci_reps: int = 1000, alpha: float = 0.05, seed=0,
                          init_config: OptimizerConfig | None = None) -> HurdleRegressionFit:
    """Hurdle GLD regression: logistic part for 1{y = 0} on ``Z``, GLD
    regression on the rows of ``W`` with y != 0.

    The parts share no data; a logistic failure (no zeros, separation)
    is recorded in ``zero_error`` and the non-zero part is still fit.
    ``ci_reps = 0`` skips the simulated intervals.
    """
    W = _design(W)
    Z = _design(Z)
    y = np.asarray(y, dtype=float).ravel()
    if not (len(y) == W.shape[0] == Z.shape[0]):
        raise ValueError("response and design lengths differ")
    v = (y == 0.0).astype(float)
    zero_part, zero_error = None, None
    try:
        zero_part = logistic_fit(Z, v)
    except FitError as exc:
        zero_error = str(exc)
    keep = v == 0.0
    Wn = W[keep]
    nonzero = gld_regression_fit(Wn, y[keep], parametrization, config, init_config)
    cis = None
    if ci_reps:
        cis = simulate_coefficient_cis(nonzero, Wn, ci_reps, alpha, seed, config, init_config)
    return HurdleRegressionFit(zero_part, nonzero, cis, zero_error, len(y), int(v.sum()))


def regression_residuals(fit: RegressionFit, W, y):
    """Error residuals e = y - W beta and normalized quantile residuals
    Phi^-1(F(e)) under the fitted error GLD.

    Returns (e, r, flagged) where ``flagged`` marks residuals on or beyond
    the fitted support boundary (their r is -inf or +inf).
    """
    W = _design(W)
    y = np.asarray(y, dtype=float).ravel()
    e = y - W @ fit.beta
    params = fit.error_params
    u = np.asarray(gld.cdf(params, e), dtype=float)
    sup = gld.support(params)
    outside = (e < sup.lower) | (e > sup.upper)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        r = stats.norm.ppf(u)
    return e, r, outside | ~np.isfinite(r)
