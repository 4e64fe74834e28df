"""The time-changed fOU process ``U_H(E(t))`` with independent ``E``.

Marginal densities and moments are mixtures of the Gaussian parent
quantities against the inverse-subordinator density. Paths come from two
backends: ``interpolated`` (fOU on a fine operational grid, read off by
linear interpolation) and ``exact`` (Gaussian vector drawn from the
covariance at the sampled operational times).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, special

from .bernstein import BernsteinFunction
from .errors import DomainError, NumericError, ResourceError
from .fou import (FouModel, ProcessPath, abs_moment, abs_moment_const, covariance,
                  covariance_matrix, density_p, fou_filter, sample_fbm_batch, variance_limit,
                  variance_v2)
from .numerics import RngStream
from .subordinator import (expectation, sample_inverse_batch, sample_inverse_marginal)

__all__ = [
    "TcfouModel",
    "sample_tcfou",
    "sample_tcfou_batch",
    "sample_time_change",
    "interpolation_deficit",
    "density_tc",
    "cdf_tc",
    "moment_tc",
    "limit_moment",
    "limit_density",
]

EXACT_MAX_POINTS = 2000
DEFAULT_FINE = 2**14


@dataclass(frozen=True)
class TcfouModel:
    fou: FouModel
    phi: BernsteinFunction

    @property
    def H(self):
        return self.fou.H

    def with_H(self, H):
        return TcfouModel(self.fou.with_H(H), self.phi)


def _streams(rng):
    if isinstance(rng, RngStream):
        return rng.child(0), rng.child(1)
    clock, parent = rng
    return clock, parent


def sample_time_change(phi, t_grid, n_paths, rng, method="auto", dy=None):
    """``E(t)`` on ``t_grid`` for ``n_paths`` paths, shape ``(n_paths, len(t_grid))``.

    ``method="marginal"`` draws the single positive time of a grid like
    ``[0, t]`` exactly (stable kind only); ``"path"`` inverts simulated
    subordinator paths; ``"auto"`` picks the exact draw when it applies.
    """
    pts = np.asarray(t_grid.points)
    positive = pts[pts > 0]
    exact_ok = phi.kind == "stable" and positive.size == 1
    if method == "marginal" and not exact_ok:
        raise DomainError("exact marginal draws need the stable kind and one positive time")
    if method in ("marginal", "auto") and exact_ok:
        out = np.zeros((n_paths, pts.size))
        out[:, pts > 0] = sample_inverse_marginal(phi, positive[0], n_paths, rng)[:, None]
        return out
    if method not in ("path", "auto"):
        raise DomainError(f"unknown time-change method {method!r}")
    return sample_inverse_batch(phi, t_grid, n_paths, rng, dy=dy)


def _interpolated(fou, E, gen, n_fine):
    horizon = float(E.max())
    if horizon == 0.0:
        return np.zeros_like(E)
    delta = horizon / n_fine
    B = sample_fbm_batch(fou.H, n_fine, delta, E.shape[0], gen)
    U = fou_filter(B, delta, fou.theta, fou.sigma)
    pos = E / delta
    idx = np.minimum(pos.astype(np.int64), n_fine - 1)
    frac = pos - idx
    rows = np.arange(E.shape[0])[:, None]
    return (1.0 - frac) * U[rows, idx] + frac * U[rows, idx + 1]


def _exact(fou, E, gen):
    n_paths, n = E.shape
    if n > EXACT_MAX_POINTS:
        raise ResourceError(f"exact backend is limited to {EXACT_MAX_POINTS} grid points")
    z = gen.standard_normal(E.shape)
    if n == 1 or np.count_nonzero(np.any(E > 0, axis=0)) == 1:
        return np.sqrt(np.asarray(variance_v2(fou, E))) * z
    out = np.zeros_like(E)
    for r in range(n_paths):
        live = E[r] > 0
        e = E[r, live]
        C = covariance_matrix(fou, e)
        try:
            L = linalg.cholesky(C + 1e-13 * np.trace(C) / e.size * np.eye(e.size), lower=True)
        except linalg.LinAlgError:
            w, V = linalg.eigh(C)
            if w.min() < -1e-8 * w.max():
                raise NumericError("covariance at the sampled times is not positive") from None
            L = V * np.sqrt(np.maximum(w, 0.0))
        out[r, live] = L @ z[r, live]
    return out


def sample_tcfou_batch(m, t_grid, n_paths, rng, backend="interpolated", n_fine=DEFAULT_FINE,
                       time_change="auto", dy=None, batch=256):
    """``n_paths`` time-changed fOU paths on ``t_grid``, one per row.

    Time change and parent draw from disjoint child streams of ``rng``
    (or from the two streams of an ``(clock, parent)`` pair), and the
    batch layout is fixed, so row ``i`` does not depend on how the work
    is split.
    """
    if backend not in ("interpolated", "exact"):
        raise DomainError(f"unknown backend {backend!r}")
    if backend == "exact" and len(t_grid) > EXACT_MAX_POINTS:
        raise ResourceError(f"exact backend is limited to {EXACT_MAX_POINTS} grid points")
    clock, parent = _streams(rng)
    E = sample_time_change(m.phi, t_grid, n_paths, clock, method=time_change, dy=dy)
    out = np.empty_like(E)
    for b0 in range(0, n_paths, batch):
        gen = parent.child(b0 // batch).generator()
        blk = E[b0:b0 + batch]
        if backend == "interpolated":
            out[b0:b0 + batch] = _interpolated(m.fou, blk, gen, n_fine)
        else:
            out[b0:b0 + batch] = _exact(m.fou, blk, gen)
    return out


def sample_tcfou(m, t_grid, rng, backend="interpolated", **kw):
    """A single time-changed fOU path as a :class:`ProcessPath`."""
    vals = sample_tcfou_batch(m, t_grid, 1, rng, backend=backend, **kw)[0]
    return ProcessPath(t_grid, vals, "tcfou")


def interpolation_deficit(fou, s, delta, n_frac=21):
    """Largest variance lost by linear interpolation between nodes ``delta`` apart around ``s``.

    Compare the values at ``delta`` and ``delta / 2`` to judge the
    resolution of the interpolated backend.
    """
    worst = 0.0
    for f in np.linspace(0.0, 1.0, n_frac)[1:-1]:
        a = max(s - f * delta, 0.0)
        b = a + delta
        w = (s - a) / delta
        var = ((1 - w) ** 2 * variance_v2(fou, a) + w**2 * variance_v2(fou, b)
               + 2 * w * (1 - w) * covariance(fou, a, b))
        worst = max(worst, variance_v2(fou, s) - var)
    return worst


def density_tc(m, t, x, tol=1e-10):
    """Density of ``U_H(E(t))`` at ``x`` (array ``x`` is integrated jointly)."""
    if not t > 0:
        raise DomainError("t must be positive")
    x_arr = np.asarray(x, dtype=float)
    if m.phi.is_pure_drift:
        return density_p(m.fou, t / m.phi.drift, x_arr)
    vec = x_arr.ndim > 0
    v = (lambda s: density_p(m.fou, s, x_arr)) if vec else \
        (lambda s: density_p(m.fou, s, float(x_arr)))
    return expectation(m.phi, v, t, singularity=m.H, tol=tol, vectorized=vec)


def cdf_tc(m, t, x, tol=1e-10):
    """``P(U_H(E(t)) <= x)``, a mixture of Gaussian CDFs (array ``x`` is integrated jointly)."""
    if not t > 0:
        raise DomainError("t must be positive")
    x_arr = np.asarray(x, dtype=float)

    def v(s):
        return special.ndtr(x_arr / np.sqrt(np.maximum(variance_v2(m.fou, s), 1e-300)))

    if m.phi.is_pure_drift:
        return v(t / m.phi.drift)
    out = expectation(m.phi, v, t, tol=tol, vectorized=x_arr.ndim > 0)
    return np.clip(out, 0.0, 1.0) if x_arr.ndim else min(max(float(out), 0.0), 1.0)


def moment_tc(m, n, t, allow_odd=False):
    """``E|U_H(E(t))|^n``; odd ``n`` needs ``allow_odd=True``."""
    if n < 1 or int(n) != n:
        raise DomainError("moment order must be a positive integer")
    if n % 2 and not allow_odd:
        raise DomainError("odd absolute moments need allow_odd=True")
    return expectation(m.phi, lambda s: abs_moment(m.fou, n, s), t)


def limit_moment(m, n):
    """``lim_t E|U_H,Phi(t)|^(2n)``, the Gaussian moment at the stationary variance."""
    if n < 1:
        raise DomainError("moment order must be a positive integer")
    return abs_moment_const(2 * n) * variance_limit(m.fou) ** n


def limit_density(m, x):
    v = variance_limit(m.fou)
    x = np.asarray(x, dtype=float)
    out = np.exp(-x * x / (2.0 * v)) / math.sqrt(2.0 * math.pi * v)
    return float(out) if out.ndim == 0 else out
