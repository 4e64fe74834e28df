"""Bernstein functions (Laplace exponents of subordinators).

A :class:`BernsteinFunction` stores its characteristic triple: killing
rate, drift and the Levy measure. The measure is carried through its tail
``t -> nu(t, inf)``, which is all the simulation and operator code needs;
built-in kinds also provide closed-form densities and exponents.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special

from .errors import DomainError
from .numerics import quad

__all__ = [
    "BernsteinFunction",
    "ValidationReport",
    "phi_eval",
    "levy_tail",
    "levy_density",
    "levy_tail_integral",
    "small_jump_mean",
    "validate",
    "from_spec",
]

KINDS = ("stable", "tempered_stable", "gamma", "custom")


@dataclass(frozen=True)
class BernsteinFunction:
    """Laplace exponent ``Phi`` with triple ``(killing, drift, nu)``.

    Use the constructors :meth:`stable`, :meth:`tempered_stable`,
    :meth:`gamma` and :meth:`custom`.
    """

    kind: str
    params: dict = field(default_factory=dict)
    killing: float = 0.0
    drift: float = 0.0
    tail_fn: Optional[Callable] = field(default=None, repr=False, compare=False)
    density_fn: Optional[Callable] = field(default=None, repr=False, compare=False)
    phi_fn: Optional[Callable] = field(default=None, repr=False, compare=False)

    @classmethod
    def stable(cls, alpha):
        if not 0.0 < alpha < 1.0:
            raise DomainError("stable index must lie in (0, 1)")
        return cls("stable", {"alpha": float(alpha)})

    @classmethod
    def tempered_stable(cls, alpha, eta):
        if not 0.0 < alpha < 1.0 or not eta > 0:
            raise DomainError("tempered stable needs alpha in (0, 1) and eta > 0")
        return cls("tempered_stable", {"alpha": float(alpha), "eta": float(eta)})

    @classmethod
    def gamma(cls, shape=1.0, rate=1.0):
        if not shape > 0 or not rate > 0:
            raise DomainError("gamma subordinator needs positive shape and rate")
        return cls("gamma", {"shape": float(shape), "rate": float(rate)})

    @classmethod
    def custom(cls, drift=0.0, killing=0.0, levy_tail=None, levy_density=None, phi=None,
               params=None):
        """User-defined triple.

        Give the Levy measure either as ``levy_tail(t) = nu(t, inf)`` or as
        ``levy_density``; both must accept ndarrays. ``phi`` optionally
        supplies a closed-form exponent (real and complex arguments).
        """
        if drift < 0 or killing < 0:
            raise DomainError("drift and killing rate must be nonnegative")
        if levy_tail is None and levy_density is not None:
            dens = levy_density

            def levy_tail(t):
                t = np.asarray(t, dtype=float)
                out = [quad(dens, float(v), np.inf, tol=1e-12, rtol=1e-10) for v in t.ravel()]
                return np.array(out).reshape(t.shape) if t.ndim else out[0]

        return cls("custom", dict(params or {}), float(killing), float(drift),
                   levy_tail, levy_density, phi)

    @property
    def alpha(self):
        return self.params.get("alpha")

    @property
    def has_levy_measure(self):
        return self.kind != "custom" or self.tail_fn is not None

    @property
    def is_pure_drift(self):
        return self.kind == "custom" and self.tail_fn is None and self.drift > 0

    def __call__(self, lam):
        return phi_eval(self, lam)

    def to_spec(self):
        if self.kind == "custom":
            return {"kind": "custom", "params": {"drift": self.drift, "killing": self.killing,
                                                 **self.params}}
        return {"kind": self.kind, "params": dict(self.params)}


def _custom_phi(f, lam):
    # Phi(lam) = a + b lam + lam * int_0^inf exp(-lam t) nu_bar(t) dt, integrated in
    # u = t Re(lam) so that the exponential acts on unit scale
    if f.tail_fn is None:
        return f.killing + f.drift * lam

    def part(z, take):
        r = z.real

        def g(u):
            return float(take(np.exp(-z * u / r))) * float(f.tail_fn(u / r)) / r

        return (quad(g, 0.0, 1.0, tol=1e-14, rtol=1e-11)
                + quad(g, 1.0, np.inf, tol=1e-14, rtol=1e-11))

    def one(z):
        z = complex(z)
        if z == 0:
            return 0.0
        if z.real <= 0:
            raise DomainError("a custom Phi is only evaluated on Re(lam) > 0")
        val = part(z, np.real)
        if z.imag != 0:
            val = val + 1j * part(z, np.imag)
        return z * val

    lam_arr = np.asarray(lam)
    vals = np.array([one(z) for z in lam_arr.ravel()])
    if not np.iscomplexobj(lam_arr):
        vals = vals.real
    vals = vals.reshape(lam_arr.shape)
    return f.killing + f.drift * lam_arr + (vals if lam_arr.ndim else vals.item())


def phi_eval(f, lam):
    """Evaluate ``Phi(lam)``; ``lam`` may be an array and may be complex.

    Real arguments must be nonnegative.
    """
    lam = np.asarray(lam)
    if not np.iscomplexobj(lam) and np.any(lam < 0):
        raise DomainError("Phi is evaluated on lam >= 0 only")
    if f.phi_fn is not None:
        out = f.phi_fn(lam)
    elif f.kind == "stable":
        out = lam ** f.params["alpha"]
    elif f.kind == "tempered_stable":
        a, eta = f.params["alpha"], f.params["eta"]
        out = (lam + eta) ** a - eta**a
    elif f.kind == "gamma":
        out = f.params["shape"] * np.log1p(lam / f.params["rate"])
    else:
        out = _custom_phi(f, lam)
    return out.item() if isinstance(out, np.ndarray) and out.ndim == 0 else out


def levy_tail(f, t):
    """Tail ``nu(t, inf)`` of the Levy measure (nonincreasing in ``t``)."""
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError("Levy tail is defined for t > 0")
    p = f.params
    if f.kind == "stable":
        out = t ** -p["alpha"] / special.gamma(1.0 - p["alpha"])
    elif f.kind == "tempered_stable":
        a, eta = p["alpha"], p["eta"]
        # alpha/G(1-a) int_t^inf u^{-1-a} e^{-eta u} du via Gamma(-a, x) recurrence
        out = (t ** -a * np.exp(-eta * t)
               - eta**a * special.gamma(1.0 - a) * special.gammaincc(1.0 - a, eta * t)) \
            / special.gamma(1.0 - a)
    elif f.kind == "gamma":
        out = p["shape"] * special.exp1(p["rate"] * t)
    elif f.tail_fn is not None:
        out = np.asarray(f.tail_fn(t), dtype=float)
    else:
        out = np.zeros_like(t)
    return float(out) if np.ndim(out) == 0 else out


def levy_density(f, t):
    """Density of the Levy measure (built-in kinds, or custom when supplied)."""
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError("Levy density is defined for t > 0")
    p = f.params
    if f.kind == "stable":
        a = p["alpha"]
        out = a / special.gamma(1.0 - a) * t ** (-1.0 - a)
    elif f.kind == "tempered_stable":
        a = p["alpha"]
        out = a / special.gamma(1.0 - a) * t ** (-1.0 - a) * np.exp(-p["eta"] * t)
    elif f.kind == "gamma":
        out = p["shape"] / t * np.exp(-p["rate"] * t)
    elif f.density_fn is not None:
        out = np.asarray(f.density_fn(t), dtype=float)
    else:
        raise DomainError("custom Bernstein function has no Levy density")
    return float(out) if np.ndim(out) == 0 else out


def levy_tail_integral(f, r):
    """``K(r) = int_0^r nu(rho, inf) d rho``, the kernel primitive of the
    Caputo-type derivative. Equals ``int min(u, r) nu(du)``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("r must be nonnegative")
    p = f.params
    with np.errstate(divide="ignore", invalid="ignore"):
        if f.kind == "stable":
            a = p["alpha"]
            out = r ** (1.0 - a) / special.gamma(2.0 - a)
        elif f.kind == "tempered_stable":
            a, eta = p["alpha"], p["eta"]
            c = a / special.gamma(1.0 - a)
            head = c * eta ** (a - 1.0) * special.gamma(1.0 - a) * special.gammainc(1.0 - a, eta * r)
            out = head + r * np.where(r > 0, levy_tail(f, np.maximum(r, 1e-300)), 0.0)
        elif f.kind == "gamma":
            k, b = p["shape"], p["rate"]
            out = k / b * -np.expm1(-b * r) + r * k * special.exp1(np.maximum(b * r, 1e-300))
        else:
            vals = [quad(lambda s: levy_tail(f, s), 0.0, float(v), tol=1e-12) if v > 0 else 0.0
                    for v in r.ravel()]
            out = np.array(vals).reshape(r.shape)
    out = np.where(r == 0, 0.0, out)
    return float(out) if np.ndim(out) == 0 else out


def small_jump_mean(f, eps):
    """``int_0^eps u nu(du)``: mean contribution of jumps below ``eps`` per unit time."""
    if not eps > 0:
        raise DomainError("cutoff must be positive")
    p = f.params
    if f.kind == "stable":
        a = p["alpha"]
        return a / ((1.0 - a) * special.gamma(1.0 - a)) * eps ** (1.0 - a)
    if f.kind == "tempered_stable":
        a, eta = p["alpha"], p["eta"]
        return a / special.gamma(1.0 - a) * eta ** (a - 1.0) * special.gamma(1.0 - a) \
            * special.gammainc(1.0 - a, eta * eps)
    if f.kind == "gamma":
        return p["shape"] / p["rate"] * -math.expm1(-p["rate"] * eps)
    if f.tail_fn is None:
        return 0.0
    # integration by parts: int_0^eps u nu(du) = K(eps) - eps nu_bar(eps)
    return float(levy_tail_integral(f, eps)) - eps * levy_tail(f, eps)


@dataclass
class ValidationReport:
    violations: list

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok


def validate(f):
    """Check the standing assumptions; returns a :class:`ValidationReport`."""
    bad = []
    if f.killing != 0.0:
        bad.append("killing rate must be zero")
    if f.drift < 0:
        bad.append("drift must be nonnegative")
    if f.kind == "custom":
        if f.tail_fn is None:
            if f.drift == 0.0:
                bad.append("Levy measure missing and drift is zero")
            else:
                bad.append("infinite activity required")
        else:
            # divergence of nu_bar at 0+: increments per decade must not shrink geometrically
            ts = 10.0 ** -np.arange(3, 7)
            tail = np.array([levy_tail(f, t) for t in ts])
            inc = np.diff(tail)
            if f.drift == 0.0 and not (np.all(inc > 0) and np.all(inc[1:] >= 0.5 * inc[:-1])):
                bad.append("infinite activity required")
            try:
                quad(lambda s: levy_tail(f, s), 0.0, 1.0, tol=1e-8)
            except Exception:
                bad.append("int (t ^ 1) nu(dt) must be finite")
    lam = np.concatenate([[0.0], np.logspace(-3, 3, 25)])
    try:
        vals = np.array([phi_eval(f, v) for v in lam], dtype=float)
    except Exception as exc:  # pragma: no cover - custom evaluators may fail arbitrarily
        bad.append(f"Phi could not be evaluated: {exc}")
    else:
        if abs(vals[0]) > 1e-12:
            bad.append("Phi(0) must vanish")
        if np.any(np.diff(vals) < -1e-10 * np.abs(vals[1:]).max()):
            bad.append("Phi must be nondecreasing")
        slopes = np.diff(vals) / np.diff(lam)
        if np.any(np.diff(slopes) > 1e-8 * np.abs(slopes).max()):
            bad.append("Phi must be concave")
    return ValidationReport(bad)


_EXPR_NAMES = {name: getattr(np, name) for name in ("exp", "log", "sqrt", "pi", "where", "abs")}
_EXPR_NAMES.update(gamma=special.gamma, exp1=special.exp1, gammaincc=special.gammaincc)


def _expr(text):
    code = compile(text, "<levy>", "eval")
    return lambda t: eval(code, {"__builtins__": {}}, {**_EXPR_NAMES, "t": np.asarray(t, dtype=float)})


def from_spec(spec):
    """Build from the JSON form ``{"kind": ..., "params": {...}}``.

    Custom kinds accept ``drift``, ``killing`` and a ``levy_tail`` or
    ``levy_density`` expression in the variable ``t`` (numpy syntax).
    """
    kind = spec.get("kind")
    p = dict(spec.get("params", {}))
    if kind == "stable":
        return BernsteinFunction.stable(p["alpha"])
    if kind == "tempered_stable":
        return BernsteinFunction.tempered_stable(p["alpha"], p["eta"])
    if kind == "gamma":
        return BernsteinFunction.gamma(p.get("shape", 1.0), p.get("rate", 1.0))
    if kind == "custom":
        # expression strings stay in params so that to_spec round-trips
        tail = _expr(p["levy_tail"]) if "levy_tail" in p else None
        dens = _expr(p["levy_density"]) if "levy_density" in p else None
        drift, killing = p.pop("drift", 0.0), p.pop("killing", 0.0)
        return BernsteinFunction.custom(drift, killing, levy_tail=tail, levy_density=dens,
                                        params=p)
    raise DomainError(f"unknown Bernstein kind {kind!r}; expected one of {KINDS}")
