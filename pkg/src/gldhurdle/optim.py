"""Optimizer configuration and the Nelder-Mead driver used by every fit."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize


class FitError(RuntimeError):
    """Raised when an estimation routine cannot produce an estimate."""


@dataclass(frozen=True)
class OptimizerConfig:
    n_candidates: int = 10000
    candidate_square: tuple[float, float] = (-1.5, 1.5)
    simplex_tol: float = 1e-8
    max_iterations: int = 2000
    restarts: int = 3
    seed: int = 0
    xtol: float = 1e-7

    def __post_init__(self):
        lo, hi = self.candidate_square
        if not lo < hi:
            raise ValueError("candidate square must be nondegenerate")
        if self.n_candidates < 0 or self.max_iterations <= 0 or self.restarts < 0:
            raise ValueError("optimizer counts must be nonnegative")
        if self.simplex_tol <= 0:
            raise ValueError("simplex tolerance must be positive")

    def to_dict(self) -> dict:
        return {
            "n_candidates": self.n_candidates,
            "candidate_square": list(self.candidate_square),
            "simplex_tol": self.simplex_tol,
            "max_iterations": self.max_iterations,
            "restarts": self.restarts,
            "seed": self.seed,
            "xtol": self.xtol,
        }


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    converged: bool
    iterations: int
    evaluations: int
    history: list = field(default_factory=list)


def _safe(objective):
    def wrapped(theta):
        val = objective(theta)
        if not np.isfinite(val):
            return np.inf
        return float(val)
    return wrapped


def nelder_mead(objective, x0, config: OptimizerConfig, rng=None,
                restarts: int | None = None) -> SimplexResult:
    """Minimize ``objective`` from ``x0`` with perturbed restarts.

    Each restart begins at the incumbent best point jittered by a small
    relative amount; a jittered start with a non-finite objective falls
    back to the incumbent itself. The best point over all runs wins and
    can never be worse than ``x0``.
    """
    fun = _safe(objective)
    restarts = config.restarts if restarts is None else restarts
    if rng is None:
        rng = np.random.default_rng(config.seed)
    x0 = np.asarray(x0, dtype=float)
    best_x, best_f = x0.copy(), fun(x0)
    best_success = False
    iterations = evaluations = 0
    history = []
    opts = {
        "fatol": config.simplex_tol,
        "xatol": config.xtol,
        "maxiter": config.max_iterations,
        "maxfev": 4 * config.max_iterations,
    }
    start = x0
    for run in range(restarts + 1):
        if run > 0:
            jitter = rng.normal(size=best_x.shape) * (0.02 * np.abs(best_x) + 1e-3)
            start = best_x + jitter
            if not np.isfinite(fun(start)):
                start = best_x
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = optimize.minimize(fun, start, method="Nelder-Mead", options=opts)
        iterations += int(res.nit)
        evaluations += int(res.nfev)
        history.append(float(res.fun))
        if res.fun <= best_f:
            best_x, best_f = np.asarray(res.x, dtype=float), float(res.fun)
            best_success = bool(res.success)
    converged = bool(best_success and np.isfinite(best_f))
    return SimplexResult(best_x, best_f, converged, iterations, evaluations, history)
