"""Convergence diagnostics along tracks of Hurst indices.

Every metric is evaluated on finite grids. Sup-norms over ``[0, inf)`` are
taken on ``[0, 20 theta]``, beyond which all compared quantities sit
exponentially close to their limits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DomainError
from .fou import (FouModel, abs_moment, covariance, density_p, variance_v2_prime)
from .numerics import Grid
from .timechange import density_tc

__all__ = [
    "ConvergenceReport",
    "track_report",
    "sup_norm_moments",
    "sup_norm_density",
    "KsResult",
    "ks_distance",
    "ks_two_sample",
    "j1_distance",
    "j1_bruteforce",
    "identity_bound",
    "holder_seminorm",
    "vprime_envelope",
    "vprime_small_t",
    "covariance_lipschitz",
]


@dataclass
class ConvergenceReport:
    """Metric values along a parameter track together with verdict flags."""

    track: list
    metric: str
    values: list
    verdicts: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.track) != len(self.values):
            raise DomainError("one metric value per tracked parameter is required")

    @property
    def verdict(self):
        return all(self.verdicts.values())

    def to_dict(self):
        return {"track": list(map(float, self.track)), "metric": self.metric,
                "values": list(map(float, self.values)), "verdict": bool(self.verdict),
                "verdicts": {k: bool(v) for k, v in self.verdicts.items()},
                "config": self.metadata}


def track_report(metric, track, values, threshold=None, metadata=None):
    """Build a report; ``monotone_decreasing`` is strict and vacuous for one entry."""
    values = [float(v) for v in values]
    verdicts = {"monotone_decreasing": all(b < a for a, b in zip(values, values[1:]))}
    if threshold is not None:
        verdicts["below_threshold"] = values[-1] < threshold
    return ConvergenceReport(list(track), metric, values, verdicts, dict(metadata or {}))


def _default_t_grid(theta):
    return Grid.uniform(20.0 * theta, 4000)


def sup_norm_moments(n, H, theta=1.0, sigma=1.0, t_grid=None):
    """``max_t |E|U_H(t)|^n - E|U_1/2(t)|^n|`` on ``t_grid`` (default ``[0, 20 theta]``)."""
    t = np.asarray((t_grid or _default_t_grid(theta)).points)
    if t[-1] < 20.0 * theta * (1 - 1e-12):
        raise DomainError("t grid must reach 20 theta")
    a = abs_moment(FouModel(H, theta, sigma), n, t)
    b = abs_moment(FouModel(0.5, theta, sigma), n, t)
    return float(np.max(np.abs(a - b)))


def sup_norm_density(m, H, K=(0.5, 2.0), t_grid=None, x_grid=None, parent=False):
    """``max |p_H(t, x) - p_1/2(t, x)|`` over ``t_grid x x_grid``, with ``x`` in ``+-K``.

    ``m`` supplies theta, sigma and the time change; ``parent=True``
    compares the fOU densities instead of the time-changed ones.
    """
    lo, hi = K
    if not 0.0 < lo < hi:
        raise DomainError("K must be an interval of positive reals (0 excluded)")
    th = m.fou.theta
    t = np.asarray((t_grid or Grid.parse(f"{0.25 * th}:{20 * th}:{0.25 * th}")).points)
    t = t[t > 0]
    xs = np.asarray(x_grid.points) if x_grid is not None else np.linspace(lo, hi, 16)
    # densities are even in x, so +-K reduces to K
    xs = np.abs(xs)
    if np.any(xs < lo) or np.any(xs > hi):
        raise DomainError("x grid must lie in +-K")
    mh, m0 = m.with_H(H), m.with_H(0.5)
    if parent:
        a = density_p(mh.fou, t[:, None], xs[None, :])
        b = density_p(m0.fou, t[:, None], xs[None, :])
        return float(np.max(np.abs(a - b)))
    if H == 0.5:
        return 0.0
    worst = 0.0
    for tv in t:
        d = density_tc(mh, float(tv), xs) - density_tc(m0, float(tv), xs)
        worst = max(worst, float(np.max(np.abs(d))))
    return worst


@dataclass(frozen=True)
class KsResult:
    statistic: float
    n: int
    crit_1: float
    crit_5: float

    def passes(self, level=0.01):
        return self.statistic < (self.crit_1 if level == 0.01 else self.crit_5)


def _ks_crit(n_eff):
    dist = stats.kstwobign
    return float(dist.ppf(0.99) / math.sqrt(n_eff)), float(dist.ppf(0.95) / math.sqrt(n_eff))


def ks_distance(samples, cdf):
    """``sup |F_emp - F|`` with asymptotic 1% and 5% critical values."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 100:
        raise DomainError("at least 100 samples are needed")
    d = float(stats.kstest(x, cdf).statistic)
    return KsResult(d, x.size, *_ks_crit(x.size))


def ks_two_sample(a, b):
    a, b = np.asarray(a, float).ravel(), np.asarray(b, float).ravel()
    if min(a.size, b.size) < 100:
        raise DomainError("at least 100 samples are needed in each set")
    d = float(stats.ks_2samp(a, b).statistic)
    return KsResult(d, a.size + b.size, *_ks_crit(a.size * b.size / (a.size + b.size)))


# --- Skorohod J1 ----------------------------------------------------------------

def _restrict(path, T):
    t = np.asarray(path.grid.points)
    keep = t <= T * (1 + 1e-12)
    return t[keep], np.asarray(path.values)[keep]


def _take(arr, arr_lo, idx):
    """Values of a diagonal stored from index ``arr_lo``; +inf outside it."""
    out = np.full(idx.size, math.inf)
    if arr is None:
        return out
    ok = (idx >= arr_lo) & (idx < arr_lo + arr.size)
    out[ok] = arr[idx[ok] - arr_lo]
    return out


def _j1_dp(ft, fv, gt, gv):
    """Bottleneck cost of the best monotone matching, swept by anti-diagonals."""
    n, m = ft.size, gt.size
    inf = math.inf
    prev2 = None  # diagonal k-2, indexed by i
    prev = np.array([max(abs(fv[0] - gv[0]), abs(ft[0] - gt[0]))])
    prev_lo = 0
    prev2_lo = 0
    for k in range(1, n + m - 1):
        lo, hi = max(0, k - m + 1), min(k, n - 1)
        i = np.arange(lo, hi + 1)
        j = k - i
        cost = np.maximum(np.abs(fv[i] - gv[j]), np.abs(ft[i] - gt[j]))
        up = np.where(i >= 1, _take(prev, prev_lo, i - 1), inf)   # (i-1, j)
        left = np.where(j >= 1, _take(prev, prev_lo, i), inf)     # (i, j-1)
        diag = _take(prev2, prev2_lo, i - 1)                      # (i-1, j-1)
        best = np.minimum(np.minimum(up, left), diag)
        cur = np.maximum(cost, best)
        prev2, prev2_lo = prev, prev_lo
        prev, prev_lo = cur, lo
    return float(prev[-1])


def identity_bound(ft, fv, gt, gv):
    """``sup |f - g|`` of two step functions given by grid times and values."""
    grid = np.union1d(ft, gt)
    fi = fv[np.searchsorted(ft, grid, side="right") - 1]
    gi = gv[np.searchsorted(gt, grid, side="right") - 1]
    return float(np.max(np.abs(fi - gi)))


def j1_distance(f, g, T):
    """Upper bound on the Skorohod J1 distance of two cadlag paths on ``[0, T]``.

    Minimum of the best monotone matching of the two grids (cost: larger
    of value mismatch and time distortion) and the identity
    reparametrisation bound ``sup |f - g|``. Paths are read as
    right-continuous step functions between grid points.
    """
    if not T > 0:
        raise DomainError("horizon must be positive")
    ft, fv = _restrict(f, T)
    gt, gv = _restrict(g, T)
    if ft.size == 0 or gt.size == 0:
        raise DomainError("paths must have grid points in [0, T]")
    return min(_j1_dp(ft, fv, gt, gv), identity_bound(ft, fv, gt, gv))


def j1_bruteforce(f, g, T):
    """Exhaustive search over monotone matchings (tiny grids only)."""
    ft, fv = _restrict(f, T)
    gt, gv = _restrict(g, T)
    n, m = ft.size, gt.size
    if n > 8 or m > 8:
        raise DomainError("brute force is limited to 8-point grids")
    c = np.maximum(np.abs(fv[:, None] - gv[None, :]), np.abs(ft[:, None] - gt[None, :]))
    best = math.inf
    steps = ((1, 0), (0, 1), (1, 1))

    def walk(i, j, worst):
        nonlocal best
        worst = max(worst, c[i, j])
        if worst >= best:
            return
        if i == n - 1 and j == m - 1:
            best = worst
            return
        for di, dj in steps:
            if i + di < n and j + dj < m:
                walk(i + di, j + dj, worst)

    walk(0, 0, 0.0)
    return min(best, identity_bound(ft, fv, gt, gv))


# --- regularity -----------------------------------------------------------------

def holder_seminorm(path, gamma):
    """``max |f(t) - f(s)| / |t - s|^gamma`` over grid pairs."""
    if not 0.0 < gamma <= 1.0:
        raise DomainError("gamma must lie in (0, 1]")
    t = np.asarray(path.grid.points)
    v = np.asarray(path.values)
    if t.size < 2:
        raise DomainError("at least two grid points are needed")
    worst = 0.0
    for lag in range(1, t.size):
        q = np.abs(v[lag:] - v[:-lag]) / (t[lag:] - t[:-lag]) ** gamma
        worst = max(worst, float(q.max()))
    return worst


def vprime_envelope(H, theta=1.0, eps=0.1, T=20.0, t_grid=None):
    """Numerical ``C_eps(H) = max |V'_H(t) - V'_1/2(t)| e^(t/theta)`` over ``[eps, T]``."""
    if not eps > 0:
        raise DomainError("eps must be positive")
    t = np.asarray(t_grid.points) if t_grid is not None else np.linspace(eps, T, 2000)
    if t[0] < eps:
        raise DomainError("grid must start at or after eps")
    d = variance_v2_prime(FouModel(H, theta), t) - variance_v2_prime(FouModel(0.5, theta), t)
    return float(np.max(np.abs(d) * np.exp(t / theta)))


def vprime_small_t(H, theta=1.0, eps=0.1, n=2000):
    """``max |V'_H - V'_1/2|`` on a geometric grid of ``(0, eps]``."""
    t = np.geomspace(eps * 1e-12, eps, n)
    d = variance_v2_prime(FouModel(H, theta), t) - variance_v2_prime(FouModel(0.5, theta), t)
    return float(np.max(np.abs(d)))


def covariance_lipschitz(m, T=5.0, n=50, h=1e-5):
    """``max |d C(t, s) / dt|`` by central differences on an ``n x n`` grid of ``[h, T]^2``."""
    g = np.linspace(2 * h, T, n)
    t, s = np.meshgrid(g, g, indexing="ij")
    d = (covariance(m, t + h, s) - covariance(m, t - h, s)) / (2 * h)
    return float(np.max(np.abs(d)))

