"""Subordinator paths, their inverses and the inverse-subordinator density.

Paths are simulated on an operational-time grid and inverted by linear
interpolation, so the inverse ``E(t) = inf{y : sigma(y) > t}`` comes out
continuous and nondecreasing. For batches of many paths see
:func:`sample_inverse_batch`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .bernstein import BernsteinFunction, levy_tail, phi_eval, small_jump_mean
from .errors import AccuracyError, DomainError, HorizonError, ResourceError
from .numerics import Grid, laplace_inverse, quad, stable_density

__all__ = [
    "SubordinatorPath",
    "InverseSubordinatorPath",
    "sample_stable_subordinator",
    "sample_subordinator",
    "invert_path",
    "sample_inverse_batch",
    "sample_inverse_marginal",
    "inverse_density",
    "inverse_mean",
    "expectation",
    "neg_moment",
    "support_bound",
    "cutoff_check",
]

DEFAULT_CUTOFF = 1e-4


@dataclass(frozen=True)
class SubordinatorPath:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (len(self.grid),):
            raise DomainError("values must match the grid length")
        if np.any(np.diff(v) < 0):
            raise DomainError("subordinator path must be nondecreasing")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class InverseSubordinatorPath:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (len(self.grid),):
            raise DomainError("values must match the grid length")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def _cms_stable(alpha, size, gen):
    """Standard one-sided stable variates with E exp(-lam S) = exp(-lam^alpha)."""
    u = gen.uniform(0.0, math.pi, size)
    w = gen.standard_exponential(size)
    return (np.sin(alpha * u) / np.sin(u) ** (1.0 / alpha)
            * (np.sin((1.0 - alpha) * u) / w) ** ((1.0 - alpha) / alpha))


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise DomainError("stable index must lie in (0, 1)")


def _stable_increments(alpha, dy, size, gen):
    return np.asarray(dy) ** (1.0 / alpha) * _cms_stable(alpha, size, gen)


def sample_stable_subordinator(alpha, grid, rng):
    """alpha-stable subordinator on ``grid`` (which must start at 0)."""
    _check_alpha(alpha)
    if grid.start != 0.0:
        raise DomainError("subordinator grid must start at 0")
    gen = rng.generator()
    dy = np.diff(grid.points)
    inc = _stable_increments(alpha, dy, dy.shape, gen)
    return SubordinatorPath(grid, np.concatenate([[0.0], np.cumsum(inc)]))


class _JumpSampler:
    """Jumps above the cutoff: sizes drawn by inverting the Levy tail."""

    def __init__(self, f, eps):
        self.f = f
        self.eps = eps
        self.rate = float(levy_tail(f, eps))
        if not math.isfinite(self.rate):
            raise AccuracyError("Levy tail is not finite at the cutoff")
        self.drift = f.drift + small_jump_mean(f, eps)
        # log-log table of the tail, from eps out to where the mass is negligible
        hi = eps
        while levy_tail(f, hi) > 1e-13 * self.rate and hi < 1e12:
            hi *= 4.0
        ts = np.geomspace(eps, hi, 4000)
        tail = np.asarray(levy_tail(f, ts), dtype=float)
        keep = tail > 0
        self.log_t = np.log(ts[keep])[::-1]
        self.log_tail = np.log(tail[keep])[::-1]

    def sizes(self, n, gen):
        target = np.log(self.rate) + np.log(gen.uniform(size=n))
        return np.exp(np.interp(target, self.log_tail, self.log_t))

    def increments(self, dy, size, gen):
        dy = np.broadcast_to(np.asarray(dy, dtype=float), size)
        counts = gen.poisson(self.rate * dy)
        out = self.drift * dy
        total = int(counts.sum())
        if total:
            cell = np.repeat(np.arange(counts.size), counts.ravel())
            out = out + np.bincount(cell, self.sizes(total, gen), counts.size).reshape(size)
        return out


@lru_cache(maxsize=32)
def _jump_sampler(f, eps):
    return _JumpSampler(f, eps)


def _increment_fn(f, eps):
    if f.kind == "stable":
        return lambda dy, size, gen: _stable_increments(f.params["alpha"], dy, size, gen)
    if f.is_pure_drift:
        return lambda dy, size, gen: np.broadcast_to(f.drift * np.asarray(dy), size).copy()
    try:
        return _jump_sampler(f, eps).increments
    except TypeError:  # unhashable custom parameters
        return _JumpSampler(f, eps).increments


def sample_subordinator(f, grid, rng, jump_cutoff=DEFAULT_CUTOFF):
    """Subordinator with exponent ``f`` on ``grid``.

    Stable kinds are sampled exactly. Other kinds use drift, compound
    Poisson jumps above ``jump_cutoff`` and the mean of the smaller jumps.
    """
    if grid.start != 0.0:
        raise DomainError("subordinator grid must start at 0")
    if f.kind == "stable":
        return sample_stable_subordinator(f.params["alpha"], grid, rng)
    if not jump_cutoff > 0:
        raise DomainError("jump cutoff must be positive")
    dy = np.diff(grid.points)
    inc = _increment_fn(f, jump_cutoff)(dy, dy.shape, rng.generator())
    return SubordinatorPath(grid, np.concatenate([[0.0], np.cumsum(inc)]))


def _invert(y, sig, t):
    """Right-continuous inverse of the piecewise-linear interpolant of (y, sig)."""
    i = np.searchsorted(sig, t, side="right")
    lo = np.maximum(i - 1, 0)
    hi = np.minimum(i, len(sig) - 1)
    rise = sig[hi] - sig[lo]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(rise > 0, (t - sig[lo]) / rise, 0.0)
    return y[lo] + frac * (y[hi] - y[lo])


def invert_path(path, t_grid):
    """``E(t) = inf{y : sigma(y) > t}`` on ``t_grid``."""
    t = t_grid.points
    y, sig = path.grid.points, path.values
    if t[-1] >= sig[-1]:
        need = y[-1] * t[-1] / sig[-1] if sig[-1] > 0 else math.inf
        raise HorizonError(
            f"path reaches sigma={sig[-1]:.6g} only; operational horizon of at least "
            f"{need:.6g} required", required=need)
    return InverseSubordinatorPath(t_grid, _invert(y, sig, t))


def sample_inverse_batch(f, t_grid, n_paths, rng, dy=None, jump_cutoff=DEFAULT_CUTOFF,
                         batch=1024, chunk=512, max_steps=2**22):
    """Inverse subordinator paths, one row per path, on ``t_grid``.

    Each row inverts a subordinator simulated with operational step ``dy``
    and extended chunk by chunk until it passes ``max(t_grid)``; more than
    ``max_steps`` steps raises :class:`ResourceError`. Path ``i`` only
    depends on ``rng`` and ``i // batch``, never on how work is scheduled.
    """
    t = np.asarray(t_grid.points)
    t_max = t[-1]
    if dy is None:
        dy = 1e-3 * max(1.0, inverse_mean(f, t_max)) if t_max > 0 else 1.0
    step = _increment_fn(f, jump_cutoff)
    out = np.empty((n_paths, len(t)))
    for b0 in range(0, n_paths, batch):
        gen = rng.child(b0 // batch).generator()
        rows = min(batch, n_paths - b0)
        sig = np.zeros((rows, 1))
        while True:
            inc = step(dy, (rows, chunk), gen)
            sig = np.concatenate([sig, sig[:, -1:] + np.cumsum(inc, axis=1)], axis=1)
            if np.all(sig[:, -1] > t_max):
                break
            if sig.shape[1] > max_steps:
                raise ResourceError(f"operational horizon exceeds {max_steps} steps of {dy:g}")
        y = dy * np.arange(sig.shape[1])
        for r in range(rows):
            out[b0 + r] = _invert(y, sig[r], t)
    return out


def sample_inverse_marginal(f, t, n, rng):
    """Exact draws of ``E(t)`` for the stable kind: ``E(t) = (t / S)^alpha``."""
    if f.kind != "stable":
        raise DomainError("exact marginal sampling needs the stable kind")
    a = f.params["alpha"]
    return (t / _cms_stable(a, n, rng.generator())) ** a


def _stable_inverse_density(alpha, s, t):
    if alpha == 0.5:
        return np.exp(-s * s / (4.0 * t)) / math.sqrt(math.pi * t)
    return t / alpha * s ** (-1.0 - 1.0 / alpha) * stable_density(alpha, t * s ** (-1.0 / alpha))


def _transform(f, s):
    def F(lam):
        p = phi_eval(f, lam)
        return p / lam * np.exp(-s * p)
    return F


def inverse_density(f, s, t, method=None):
    """Density ``f_Phi(s; t)`` of ``E(t)`` at operational time ``s``.

    Stable kinds use the scaling relation with the stable density (the
    alpha = 1/2 case in closed form); other kinds invert the Laplace
    transform in ``t``. ``method`` forces an inversion for any kind:
    ``"laplace"`` or ``"fourier"`` (the default inverter) use an adaptive
    Fourier series on a Bromwich line, ``"euler"`` the fixed-node Euler
    inverter on a line and ``"talbot"`` the Talbot contour. Lines keep
    ``Re Phi >= 0``, so ``exp(-s Phi)`` stays bounded for every ``s``; on
    the Talbot contour it can overflow once ``s`` is large. The adaptive
    series also resolves the narrow peak of ``f_Phi(.; t)`` at large ``t``,
    which fixed node counts miss.
    """
    if not t > 0:
        raise DomainError("t must be positive")
    if f.is_pure_drift:
        raise DomainError("a pure-drift time change has no density")
    scalar = np.ndim(s) == 0
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s_arr < 0):
        raise DomainError("s must be nonnegative")
    if method not in (None, "laplace", "fourier", "euler", "talbot"):
        raise DomainError(f"unknown inversion method {method!r}")
    if f.kind == "stable" and method is None:
        out = np.empty_like(s_arr)
        pos = s_arr > 0
        out[pos] = _stable_inverse_density(f.params["alpha"], s_arr[pos], t)
        out[~pos] = t ** -f.params["alpha"] / special.gamma(1.0 - f.params["alpha"])
    else:
        how = method if method in ("euler", "talbot") else "fourier"
        out = np.array([max(laplace_inverse(_transform(f, v), t, method=how), 0.0)
                        for v in s_arr])
    return float(out[0]) if scalar else out


@lru_cache(maxsize=256)
def _inverse_mean_cached(f, t):
    return _inverse_mean(f, t)


def _inverse_mean(f, t):
    if f.kind == "stable":
        a = f.params["alpha"]
        return t**a / math.gamma(1.0 + a)
    if f.is_pure_drift:
        return t / f.drift
    return laplace_inverse(lambda lam: 1.0 / (lam * phi_eval(f, lam)), t, method="euler")


def inverse_mean(f, t):
    """``E[E(t)]``, the renewal function (Laplace transform ``1/(lam Phi(lam))``)."""
    try:
        return _inverse_mean_cached(f, float(t))
    except TypeError:
        return _inverse_mean(f, float(t))


def expectation(f, v, t, singularity=None, tol=1e-10, rtol=1e-10, vectorized=False):
    """``int_0^inf v(s) f_Phi(s; t) ds``, i.e. ``E[v(E(t))]``.

    ``singularity`` is the exponent gamma of a ``s^-gamma`` endpoint
    behaviour of ``v`` at 0. A pure-drift time change evaluates ``v(t / b)``.
    """
    if not t > 0:
        raise DomainError("t must be positive")
    if f.is_pure_drift:
        return v(t / f.drift)
    m = inverse_mean(f, t)
    s_max = max(support_bound(f, t), 2.0 * m)
    if f.kind != "stable":
        # inverted densities carry ~1e-14 absolute noise, integrated over the support
        tol = max(tol, 1e-14 * s_max)

    def g(s):
        return v(s) * inverse_density(f, s, t)

    split = min(1.0, m)
    head = quad(g, 0.0, split, tol=tol, rtol=rtol, singularity=singularity, vectorized=vectorized)
    pts = [p for p in (m, 3 * m, 8 * m) if split < p < s_max]
    body = quad(g, split, s_max, tol=tol, rtol=rtol, points=pts or None, vectorized=vectorized)
    return head + body


def support_bound(f, t, log_eps=-40.0):
    """Operational time beyond which ``P(E(t) > s) < exp(log_eps)``.

    Chernoff: ``P(E(t) > s) = P(sigma(s) < t) <= exp(lam t - s Phi(lam))``.
    """
    lam = np.geomspace(1e-3, 1e3, 61) / t
    return float(np.min((lam * t - log_eps) / np.asarray(phi_eval(f, lam))))


def neg_moment(f, gamma, t):
    """``E[E(t)^-gamma]`` for ``0 < gamma < 1`` (finite there, infinite beyond)."""
    if not 0.0 < gamma < 1.0:
        raise DomainError("negative moments are computed for gamma in (0, 1) only")
    return expectation(f, lambda s: s ** -gamma, t, singularity=gamma)


def cutoff_check(f, rng, eps=DEFAULT_CUTOFF, y=1.0, lam=1.0, n=20000):
    """Compare ``E exp(-lam sigma(y))`` at cutoffs ``eps`` and ``eps/10``.

    Returns a dict with both Monte Carlo estimates, their standard errors
    and the exact value ``exp(-y Phi(lam))``.
    """
    out = {"exact": math.exp(-y * phi_eval(f, lam))}
    for key, e, stream in (("coarse", eps, 0), ("fine", eps / 10.0, 1)):
        gen = rng.child(stream).generator()
        inc = _increment_fn(f, e)(y, (n,), gen)
        z = np.exp(-lam * inc)
        out[key] = float(z.mean())
        out[key + "_se"] = float(z.std(ddof=1) / math.sqrt(n))
    out["ok"] = abs(out["coarse"] - out["fine"]) <= 3.0 * math.hypot(out["coarse_se"],
                                                                      out["fine_se"])
    return out


def identity_path(grid):
    """Deterministic path ``sigma(y) = y``; handy as a test double."""
    return SubordinatorPath(grid, np.asarray(grid.points, dtype=float))


def pure_drift(b=1.0):
    """Degenerate time change ``sigma(y) = b y``, bypassing the standing assumptions."""
    return BernsteinFunction.custom(drift=b)
