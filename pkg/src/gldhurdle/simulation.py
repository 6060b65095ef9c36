"""Replicated simulation of the two-part regression model

    Y = (1 - V) (6.13 - 0.021 x1 - 0.35 x2 + eps)
    logit P(V = 1) = 1.6 - 0.13 x1 + 0.21 x2

with x1 ~ RS GLD(3.87, 0.10, 0.024, 0.19), x2 ~ Bernoulli(0.6) and a
zero-mean GLD error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import gld
from .gld import GldParams
from .optim import FitError, OptimizerConfig
from .regression import hurdle_regression_fit, lambda1_star, quantile_type8

__all__ = [
    "SCENARIOS",
    "NONZERO_TARGET",
    "ZERO_TARGET",
    "COEFFICIENT_NAMES",
    "error_law",
    "simulate_dataset",
    "replicate_rng",
    "run_replicate",
    "SummaryRow",
    "SimulationResult",
    "simulation_study",
]

NONZERO_TARGET = (6.13, -0.021, -0.35)
ZERO_TARGET = (1.6, -0.13, 0.21)
COEFFICIENT_NAMES = (
    "nonzero_intercept", "nonzero_x1", "nonzero_x2",
    "zero_intercept", "zero_x1", "zero_x2",
)
X1_LAW = GldParams.rs(3.87, 0.10, 0.024, 0.19)
X2_PROB = 0.6
MAX_FAILURE = 0.2

# error shapes (lambda2, lambda3, lambda4); lambda1 is set to lambda1*
SCENARIOS = {
    "HRS-symmetric": ("RS", (2.0, 0.13, 0.13)),
    "HFKML-symmetric": ("FKML", (2.0, 0.13, 0.13)),
    "HRS-skewed": ("RS", (0.11, 0.0023, 0.19)),
    "HFKML-skewed": ("FKML", (1.07, 0.84, 0.02)),
}


def error_law(scenario: str) -> GldParams:
    """Error GLD of a scenario, located at lambda1* (exact zero mean)."""
    try:
        par, (l2, l3, l4) = SCENARIOS[scenario]
    except KeyError:
        raise ValueError(f"unknown scenario {scenario!r}; "
                         f"choose from {sorted(SCENARIOS)}") from None
    return GldParams(lambda1_star(l2, l3, l4, par), l2, l3, l4, par)


def replicate_rng(seed: int, n: int, index: int) -> np.random.Generator:
    """Stream of replicate ``index`` at sample size ``n``.

    Derived as SeedSequence(seed, spawn_key=(n, index)), so a replicate's
    data never depends on how many replicates or sizes are run.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(n, index)))


def simulate_dataset(n: int, scenario: str, rng):
    """Design matrix [1, x1, x2] (shared by both parts) and response."""
    err = error_law(scenario)
    x1 = gld.sample(X1_LAW, n, rng)
    x2 = (rng.random(n) < X2_PROB).astype(float)
    X = np.column_stack([np.ones(n), x1, x2])
    v = rng.random(n) < special.expit(X @ np.array(ZERO_TARGET))
    eps = gld.sample(err, n, rng)
    y = np.where(v, 0.0, X @ np.array(NONZERO_TARGET) + eps)
    return X, y


def run_replicate(scenario: str, n: int, seed: int, index: int,
                  config: OptimizerConfig | None = None) -> np.ndarray:
    """Six estimated coefficients (non-zero part first) of one replicate."""
    X, y = simulate_dataset(n, scenario, replicate_rng(seed, n, index))
    par = SCENARIOS[scenario][0]
    fit = hurdle_regression_fit(X, X, y, par, config, ci_reps=0)
    if fit.zero_part is None:
        raise FitError(fit.zero_error or "logistic part failed")
    return np.concatenate([fit.nonzero_part.beta, fit.zero_part.gamma])


@dataclass(frozen=True)
class SummaryRow:
    coefficient: str
    target: float
    n: int
    mean: float
    se: float
    p025: float
    p975: float
    replicates: int
    failures: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SimulationResult:
    scenario: str
    seed: int
    rows: list = field(default_factory=list)
    estimates: dict = field(default_factory=dict)

    def row(self, coefficient: str, n: int) -> SummaryRow:
        for r in self.rows:
            if r.coefficient == coefficient and r.n == n:
                return r
        raise KeyError((coefficient, n))

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "rows": [r.to_dict() for r in self.rows],
        }


def _summarize(est, n, failures):
    rows = []
    targets = NONZERO_TARGET + ZERO_TARGET
    for j, name in enumerate(COEFFICIENT_NAMES):
        col = est[:, j] if len(est) else np.empty(0)
        k = len(col)
        rows.append(SummaryRow(
            coefficient=name,
            target=targets[j],
            n=n,
            mean=float(col.mean()) if k else math.nan,
            # undefined with a single replicate
            se=float(col.std(ddof=1)) if k > 1 else math.nan,
            p025=float(quantile_type8(col, 0.025)) if k else math.nan,
            p975=float(quantile_type8(col, 0.975)) if k else math.nan,
            replicates=k,
            failures=failures,
        ))
    return rows


def simulation_study(scenario: str, sizes=(100, 200, 1000), replicates: int = 1000,
                     seed: int = 0, config: OptimizerConfig | None = None,
                     progress=None) -> SimulationResult:
    """Mean, standard error and type 8 2.5/97.5 percentiles of every
    coefficient across replicates, per sample size.

    Failed replicates are dropped and counted; more than 20% failures at
    any size is an error.
    """
    error_law(scenario)
    if replicates < 1:
        raise ValueError("replicates must be positive")
    result = SimulationResult(scenario, seed)
    for n in sizes:
        est, failures = [], 0
        for i in range(replicates):
            try:
                est.append(run_replicate(scenario, n, seed, i, config))
            except (FitError, ValueError):
                failures += 1
            if progress is not None:
                progress(n, i)
        if failures > MAX_FAILURE * replicates:
            raise FitError(f"{failures} of {replicates} replicates failed at n={n}")
        arr = np.array(est).reshape(-1, len(COEFFICIENT_NAMES))
        result.estimates[n] = arr
        result.rows.extend(_summarize(arr, n, failures))
    return result
