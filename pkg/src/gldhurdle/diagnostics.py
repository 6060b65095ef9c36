"""Goodness-of-fit tools: Gaussian kernel density estimate with the
Sheather-Jones bandwidth, distances between a fitted density and the
kernel estimate, and QQ points.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from . import _kernels

__all__ = [
    "Bandwidth",
    "KdeEstimate",
    "DistanceReport",
    "select_bandwidth",
    "sheather_jones_bandwidth",
    "normal_reference_bandwidth",
    "kde",
    "density_distances",
    "qq_points",
]

EXACT_PAIRS_MAX = 5000
N_BINS = 1000
GRID_SIZE = 4096
# exp(-z^2 / 2) underflows past |z| ~ 38.6
KDE_CUTOFF = 40.0


@dataclass(frozen=True)
class Bandwidth:
    value: float
    method: str  # "sheather-jones" or "normal-reference"

    @property
    def fallback(self) -> bool:
        return self.method != "sheather-jones"


def _scale(x):
    q75, q25 = np.percentile(x, [75, 25])
    sd = float(np.std(x, ddof=1))
    iqr = float(q75 - q25) / 1.349
    # a zero IQR (heavy ties) must not zero the scale
    return min(sd, iqr) if iqr > 0 else sd


def normal_reference_bandwidth(data) -> float:
    """0.9 min(sd, IQR / 1.34) n^(-1/5)."""
    x = np.asarray(data, dtype=float).ravel()
    q75, q25 = np.percentile(x, [75, 25])
    lo = min(float(np.std(x, ddof=1)), float(q75 - q25) / 1.34)
    if not lo > 0:
        lo = float(np.std(x, ddof=1))
    return 0.9 * lo * len(x) ** (-0.2)


class _PairFunctional:
    """phi4 / phi6 functionals of the sample, exact or binned."""

    def __init__(self, x):
        self.n = len(x)
        self.x = np.ascontiguousarray(np.sort(x))
        self.binned = self.n > EXACT_PAIRS_MAX
        if self.binned:
            lo, hi = self.x[0], self.x[-1]
            self.width = (hi - lo) * 1.01 / N_BINS
            idx = np.minimum(((self.x - lo) / self.width).astype(np.int64), N_BINS - 1)
            c = np.bincount(idx, minlength=N_BINS).astype(float)
            full = np.correlate(c, c, mode="full")[N_BINS - 1:]
            full[0] = 0.5 * (np.sum(c * c) - self.n)
            self.cnt = np.ascontiguousarray(full)

    def _sum(self, h, order):
        if self.binned:
            return _kernels.phi_binned_sum(self.cnt, self.width, h, order)
        return _kernels.phi_pair_sum(self.x, h, order)

    def sd(self, h):
        n = self.n
        s = 2.0 * self._sum(h, 4) + 3.0 * n
        return s / (n * (n - 1) * h ** 5 * math.sqrt(2.0 * math.pi))

    def td(self, h):
        n = self.n
        s = 2.0 * self._sum(h, 6) - 15.0 * n
        return s / (n * (n - 1) * h ** 7 * math.sqrt(2.0 * math.pi))


def select_bandwidth(data) -> Bandwidth:
    """Solve-the-equation Sheather-Jones bandwidth.

    The root of (c1 / SD(alpha2 h^(5/7)))^(1/5) - h is bracketed starting
    from [0.1 hmax, hmax], hmax = 1.144 scale n^(-1/5), and widened when
    needed. The normal-reference rule is returned, flagged, when no root
    can be bracketed or the pilot estimates are unusable. Pair sums are
    exact up to 5000 observations and binned above.
    """
    x = np.asarray(data, dtype=float).ravel()
    n = len(x)
    if n < 10:
        raise ValueError("need at least 10 observations")
    if not np.all(np.isfinite(x)):
        raise ValueError("data must be finite")
    if np.ptp(x) == 0:
        raise ValueError("degenerate sample: all values are equal")
    fallback = Bandwidth(normal_reference_bandwidth(x), "normal-reference")
    scale = _scale(x)
    pf = _PairFunctional(x)
    a = 1.24 * scale * n ** (-1.0 / 7.0)
    b = 1.23 * scale * n ** (-1.0 / 9.0)
    c1 = 1.0 / (2.0 * math.sqrt(math.pi) * n)
    td = -pf.td(b)
    if not (math.isfinite(td) and td > 0):
        return fallback
    alph2 = 1.357 * (pf.sd(a) / td) ** (1.0 / 7.0)
    if not math.isfinite(alph2):
        return fallback

    def f(h):
        return (c1 / pf.sd(alph2 * h ** (5.0 / 7.0))) ** 0.2 - h

    hmax = 1.144 * scale * n ** (-0.2)
    lower, upper = 0.1 * hmax, hmax
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for k in range(100):
            fl, fu = f(lower), f(upper)
            if not (math.isfinite(fl) and math.isfinite(fu)):
                return fallback
            if fl * fu <= 0:
                break
            if k % 2 == 0:
                upper *= 1.2
            else:
                lower /= 1.2
        else:
            return fallback
        h = optimize.brentq(f, lower, upper, xtol=1e-14 * hmax, rtol=1e-13, maxiter=500)
    return Bandwidth(float(h), "sheather-jones")


def sheather_jones_bandwidth(data) -> float:
    return select_bandwidth(data).value


@dataclass(frozen=True)
class KdeEstimate:
    """Gaussian kernel density estimate; call it to evaluate."""

    data: np.ndarray
    bandwidth: float

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        object.__setattr__(self, "data",
                           np.ascontiguousarray(np.sort(np.asarray(self.data, dtype=float).ravel())))

    def __call__(self, y):
        arr = np.asarray(y, dtype=float)
        flat = np.ascontiguousarray(arr.ravel())
        out = _kernels.kde_sorted(self.data, float(self.bandwidth), flat, KDE_CUTOFF)
        if arr.ndim == 0:
            return float(out[0])
        return out.reshape(arr.shape)

    def curve(self, size: int = 512, pad: float = 3.0):
        """(grid, density) over the data range extended by ``pad`` bandwidths."""
        grid = np.linspace(self.data[0] - pad * self.bandwidth,
                           self.data[-1] + pad * self.bandwidth, size)
        return grid, self(grid)


def kde(data, bandwidth=None) -> KdeEstimate:
    """f(y) = 1/(n h) sum phi((y - y_i) / h); Sheather-Jones h by default."""
    x = np.asarray(data, dtype=float).ravel()
    if len(x) == 0:
        raise ValueError("empty sample")
    if bandwidth is None:
        bandwidth = sheather_jones_bandwidth(x)
    return KdeEstimate(x, float(bandwidth))


@dataclass(frozen=True)
class DistanceReport:
    global_distance: float
    l2: float
    linf: float

    def to_dict(self) -> dict:
        return {"global": self.global_distance, "l2": self.l2, "linf": self.linf}


def _vectorized(f):
    def g(y):
        return np.asarray(f(np.asarray(y, dtype=float)), dtype=float)
    return g


def density_distances(f_fitted, f_kde, data, bandwidth=None, grid_size: int = GRID_SIZE,
                      lower: float = 0.0) -> DistanceReport:
    """Global, L2 and L-infinity distances between two densities.

    global: mean squared gap at the data points. L2: square root of the
    integrated squared gap from ``lower`` (0, moved down to cover the
    data when they reach below it) to infinity. L-infinity: largest gap
    over a grid spanning the data range padded by three bandwidths,
    refined by a bounded scalar search around the grid maximum.
    ``bandwidth`` defaults to that of ``f_kde``.
    """
    y = np.asarray(data, dtype=float).ravel()
    if len(y) == 0:
        raise ValueError("empty sample")
    if bandwidth is None:
        bandwidth = getattr(f_kde, "bandwidth", 0.0)
    h = float(bandwidth)
    f, g = _vectorized(f_fitted), _vectorized(f_kde)

    def gap(t):
        return np.abs(f(t) - g(t))

    def gap2(t):
        return float(gap(np.array([t]))[0] ** 2)

    at_data = gap(y)
    glob = float(np.mean(at_data ** 2))

    lo_data, hi_data = float(y.min()), float(y.max())
    a = lower if lo_data >= lower else lo_data - 3.0 * h
    b = max(hi_data + 3.0 * h, a)
    breaks = sorted({lo_data, hi_data} - {a, b})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        body = integrate.quad(gap2, a, b, points=[p for p in breaks if a < p < b] or None,
                              limit=500, epsabs=1e-12, epsrel=1e-10)[0] if b > a else 0.0
        tail = integrate.quad(gap2, b, np.inf, limit=500, epsabs=1e-12, epsrel=1e-10)[0]
    l2 = math.sqrt(max(body + tail, 0.0))

    grid = np.linspace(lo_data - 3.0 * h, hi_data + 3.0 * h, grid_size)
    gvals = gap(grid)
    k = int(np.argmax(gvals))
    linf = max(float(gvals[k]), float(at_data.max()))
    if grid_size > 2 and h > 0:
        left, right = grid[max(k - 1, 0)], grid[min(k + 1, grid_size - 1)]
        res = optimize.minimize_scalar(lambda t: -gap(np.array([t]))[0],
                                       bounds=(left, right), method="bounded",
                                       options={"xatol": 1e-10 * max(1.0, abs(right))})
        linf = max(linf, float(-res.fun))
    return DistanceReport(glob, l2, linf)


def qq_points(sample, theoretical_quantile) -> np.ndarray:
    """Rows (x_(i), Q((i - 0.5) / n)) over the ordered sample."""
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    n = len(x)
    if n == 0:
        raise ValueError("empty sample")
    p = (np.arange(1, n + 1) - 0.5) / n
    q = np.asarray(theoretical_quantile(p), dtype=float)
    return np.column_stack([x, q])
