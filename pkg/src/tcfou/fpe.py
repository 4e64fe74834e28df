"""Operators of the nonlocal Fokker-Planck equation and mild-solution residuals.

Residuals are checked on real ``lam > 0`` through the subordinated form:
with ``mu = Phi(lam)`` the transform of ``p_H,Phi`` equals
``(mu / lam) int exp(-mu s) p_H(s, x) ds``, and the parent density solves
``d/ds p = (1/2) V'(s) d^2/dx^2 p``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bernstein import levy_tail_integral, phi_eval
from .convergence import track_report
from .errors import DomainError
from .fou import FouModel, variance_v2, variance_v2_prime
from .numerics import Grid, laplace_transform, quad
from .subordinator import expectation
from .timechange import density_tc

__all__ = [
    "SampledFunction",
    "MildResidual",
    "caputo_derivative",
    "subordinate",
    "weighted_subordinate",
    "weighted_laplace",
    "mild_residual",
    "residual_track",
]

DECAY_HINTS = ("exponential", "power", "none")


@dataclass(frozen=True)
class SampledFunction:
    grid: Grid
    values: np.ndarray
    decay: str = "none"

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (len(self.grid),):
            raise DomainError("values must match the grid length")
        if self.decay not in DECAY_HINTS:
            raise DomainError(f"decay hint must be one of {DECAY_HINTS}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, fn, grid, decay="none"):
        return cls(grid, np.asarray(fn(np.asarray(grid.points)), dtype=float), decay)


def caputo_derivative(phi, u, t):
    """``int_0^t nu_bar(t - tau) u'(tau) d tau`` by product integration.

    On each cell the slope of ``u`` is the divided difference (the central
    difference at the cell midpoint) and the kernel is integrated exactly
    through ``K(r) = int_0^r nu_bar``, which absorbs the endpoint
    singularity of ``nu_bar``. Exact for piecewise-linear ``u``.
    """
    pts = np.asarray(u.grid.points)
    if not pts[0] < t <= pts[-1] * (1 + 1e-12):
        raise DomainError("t must lie inside the sampling grid")
    vals = np.asarray(u.values)
    keep = pts < t
    tau = np.append(pts[keep], t)
    uu = np.append(vals[keep], np.interp(t, pts, vals))
    slope = np.diff(uu) / np.diff(tau)
    K = np.asarray(levy_tail_integral(phi, t - tau), dtype=float)
    return float(np.dot(slope, K[:-1] - K[1:]))


def subordinate(phi, v, t):
    """``S_Phi v(t) = E[v(E(t))]``."""
    return expectation(phi, v, t)


def weighted_subordinate(phi, m, v, t):
    """``int V'(s) v(s) f_Phi(s; t) ds``."""
    return expectation(phi, lambda s: variance_v2_prime(m, max(s, 1e-300)) * v(s), t)


def weighted_laplace(m, v, lam, tol=1e-12):
    """``int_0^inf exp(-lam t) V'(t) v(t) dt`` for bounded ``v``.

    ``V'`` decays like ``t^(2H-1) exp(-t/theta)``; the integral is cut
    where the envelope has dropped by ``exp(-50)``, far below relative 1e-10.
    """
    if not lam > 0:
        raise DomainError("lam must be positive")
    rate = lam + 1.0 / m.theta
    T = (50.0 + 2.0 * math.log1p(1.0 / rate)) / rate

    def g(t):
        return math.exp(-lam * t) * variance_v2_prime(m, t) * v(t)

    edge = min(1.0 / rate, T)
    return quad(g, 0.0, edge, tol=tol) + quad(g, edge, T, tol=tol)


@dataclass(frozen=True)
class MildResidual:
    lam: float
    x: float
    H: float
    terms: tuple
    residual: float
    relative_residual: float

    def to_dict(self):
        return {"H": self.H, "lambda": self.lam, "x": self.x, "terms": list(self.terms),
                "residual": self.residual, "relative_residual": self.relative_residual}


def _parent(m, s, x, scale):
    v = scale * variance_v2(m, s)
    p = math.exp(-x * x / (2.0 * v)) / math.sqrt(2.0 * math.pi * v)
    return p, p * (x * x - v) / (v * v)


def mild_residual(m, lam, x, weight_H=None, variance_scale=1.0, tol=1e-12, fast=True):
    """Residual of the transformed mild-solution identity at ``(lam, x)``.

    ``term1 = Phi v_Phi_bar``, ``term2 = (Phi/lam) v(0, x) = 0`` for
    ``x != 0`` and ``term3 = (Phi / 2 lam) d_xx L_H p_H (Phi, x)``.
    ``weight_H`` evaluates ``V'`` at another Hurst index and
    ``variance_scale`` inflates the variance of the candidate density; both
    turn the true solution into a non-solution. ``fast=False`` computes
    ``v_Phi_bar`` as the Laplace transform of :func:`density_tc` in ``t``
    (unperturbed candidate only).
    """
    if x == 0:
        raise DomainError("x = 0 carries the point mass of the initial datum")
    if not lam > 0:
        raise DomainError("lam must be positive")
    fou = m.fou
    wm = fou if weight_H is None else FouModel(weight_H, fou.theta, fou.sigma)
    mu = float(phi_eval(m.phi, lam))
    span = [0.0, 0.25, 1.0, 4.0, (40.0 + 10.0 * abs(x)) / mu]
    span = sorted(set(min(v, span[-1]) for v in span))

    def piecewise(g):
        return sum(quad(g, a, b, tol=tol, rtol=1e-12) for a, b in zip(span, span[1:]))

    if fast:
        vbar = piecewise(lambda s: math.exp(-mu * s) * _parent(fou, s, x, variance_scale)[0]
                         if s > 0 else 0.0)
        term1 = mu * (mu / lam) * vbar
    else:
        if variance_scale != 1.0:
            raise DomainError("the slow path only evaluates the unperturbed density")
        term1 = mu * laplace_transform(lambda t: density_tc(m, t, x) if t > 0 else 0.0, lam,
                                       tol=tol)
    term2 = 0.0
    lap = piecewise(lambda s: math.exp(-mu * s) * variance_v2_prime(wm, s)
                    * _parent(fou, s, x, variance_scale)[1] if s > 0 else 0.0)
    term3 = mu / (2.0 * lam) * lap
    res = term1 - term2 - term3
    scale = max(abs(term1), abs(term3), 1e-300)
    return MildResidual(float(lam), float(x), fou.H, (term1, term2, term3), res, res / scale)


def residual_track(m, track, lams=(1.0,), xs=(1.0,)):
    """Residuals of the ``H = 1/2`` identity with ``v = p_H_n,Phi`` along ``track``.

    Each value is the largest ``|relative_residual|`` over the ``(lam, x)``
    pairs; the report verdict asks for a strict decrease.
    """
    values, detail = [], []
    for H in track:
        mh = m.with_H(H)
        rs = [mild_residual(mh, lam, x, weight_H=0.5) for lam in lams for x in xs]
        detail.append([r.to_dict() for r in rs])
        values.append(max(abs(r.relative_residual) for r in rs))
    return track_report("mild-residual-H1/2", list(track), values,
                        metadata={"lambda": list(lams), "x": list(xs), "residuals": detail})
