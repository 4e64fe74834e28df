"""Shared numerical kernels.

Grids and random streams, the gamma function, adaptive quadrature with
endpoint-singularity substitution, the one-sided stable density and
numerical Laplace inversion (fixed Talbot, Gaver-Stehfest, Euler and an
adaptive Fourier series).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special

from .errors import AccuracyError, DomainError

__all__ = [
    "parse_values",
    "Grid",
    "RngStream",
    "gamma",
    "quad",
    "stable_density",
    "laplace_transform",
    "laplace_inverse",
    "talbot",
    "stehfest",
    "euler_inversion",
    "fourier_inversion",
]


def parse_values(text):
    """Numbers from ``"a:b:step"`` (``b`` included up to rounding) or ``"a,b,c"``.

    Unlike :class:`Grid` the values may be negative or unordered.
    """
    text = str(text).strip()
    try:
        if ":" in text:
            a, b, step = (float(p) for p in text.split(":"))
            if not step > 0 or b < a:
                raise DomainError(f"bad range {text!r}")
            n = int(round((b - a) / step))
            return np.round(a + step * np.arange(n + 1), 12)
        return np.array([float(p) for p in text.split(",")])
    except ValueError as exc:
        raise DomainError(f"cannot parse {text!r} as numbers") from exc


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing, nonnegative sequence of times."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1)
        if pts.size == 0:
            raise DomainError("grid must be nonempty")
        if not np.all(np.isfinite(pts)):
            raise DomainError("grid points must be finite")
        if pts[0] < 0:
            raise DomainError("grid must start at a nonnegative time")
        if np.any(np.diff(pts) <= 0):
            raise DomainError("grid points must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, stop, n, start=0.0):
        """``n`` equal steps from ``start`` to ``stop`` (``n + 1`` points)."""
        if n < 1:
            raise DomainError("need at least one step")
        return cls(np.linspace(start, stop, n + 1))

    @classmethod
    def parse(cls, text):
        """Parse ``"a:b:step"`` (inclusive of b up to rounding) or ``"a,b,c"``."""
        return cls(parse_values(text))

    def __len__(self):
        return self.points.size

    def __array__(self, dtype=None, copy=None):
        return self.points if dtype is None else self.points.astype(dtype)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, item):
        return self.points[item]

    @property
    def start(self):
        return float(self.points[0])

    @property
    def stop(self):
        return float(self.points[-1])

    @property
    def is_uniform(self):
        if len(self) < 3:
            return True
        d = np.diff(self.points)
        return bool(np.allclose(d, d[0], rtol=1e-9, atol=0.0))

    @property
    def step(self):
        if not self.is_uniform or len(self) < 2:
            raise DomainError("grid is not uniform")
        return float((self.points[-1] - self.points[0]) / (len(self) - 1))


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream identified by ``(seed, stream_id, key)``.

    Distinct ids (or child keys) hash to statistically independent
    PCG64 states through :class:`numpy.random.SeedSequence`.
    """

    seed: int
    stream_id: int = 0
    key: tuple = field(default=())

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")

    def generator(self):
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id), *self.key))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, i):
        return RngStream(self.seed, self.stream_id, (*self.key, int(i)))

    def split(self, n=2):
        return tuple(self.child(i) for i in range(n))


def gamma(x):
    """Euler gamma function on the positive axis (array friendly)."""
    if np.ndim(x) == 0:
        x = float(x)
        if not x > 0:
            raise DomainError(f"gamma requires x > 0, got {x}")
        return math.gamma(x)
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("gamma requires x > 0")
    return special.gamma(x)


def _substituted(f, a, b, exponent):
    # s = a + L u^p with p = 1/(1 - exponent) removes an (s - a)^-exponent blow-up
    p = 1.0 / (1.0 - exponent)
    length = b - a

    def g(u):
        return f(a + length * u**p) * (length * p * u ** (p - 1.0))

    return g


def quad(f, a, b, tol=1e-10, singularity=None, limit=500, points=None, vectorized=False,
         rtol=0.0):
    """Adaptive integral of ``f`` over ``(a, b)``; ``b`` may be ``np.inf``.

    Parameters
    ----------
    f : callable
        Integrand. With ``vectorized=True`` it may return an array, in
        which case all components are integrated together.
    tol : float
        Absolute error target; the returned estimate carries an error
        estimate not above ``max(tol, rtol * |value|)``.
    singularity : float, optional
        Exponent ``g`` in ``f(s) ~ (s - a)**(-g)`` near the left endpoint,
        ``0 <= g < 1``. The substitution ``s = a + L u**(1/(1-g))`` is
        applied on ``(a, min(b, a + 1))``.
    points : sequence, optional
        Interior break points (finite intervals only).

    Raises
    ------
    AccuracyError
        If the error estimate exceeds ``tol``; ``estimate`` holds the value.
    """
    if b == a:
        return 0.0
    if b < a:
        raise DomainError("quad requires a <= b")
    if singularity is not None:
        if not 0.0 <= singularity < 1.0:
            raise DomainError("singularity exponent must lie in [0, 1)")
        if singularity > 0.0:
            mid = b if np.isfinite(b) else a + 1.0
            head = quad(_substituted(f, a, mid, singularity), 0.0, 1.0, tol=tol / 2,
                        limit=limit, vectorized=vectorized, rtol=rtol)
            if mid == b:
                return head
            return head + quad(f, mid, b, tol=tol / 2, limit=limit, vectorized=vectorized,
                               rtol=rtol)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if vectorized:
            val, err = integrate.quad_vec(f, a, b, epsabs=tol, epsrel=rtol, limit=limit,
                                          points=points, norm="max")
            err = float(err)
        else:
            kw = {"points": points} if points is not None and np.isfinite(b) else {}
            val, err = integrate.quad(f, a, b, epsabs=tol, epsrel=rtol, limit=limit, **kw)
    bound = max(tol, rtol * float(np.max(np.abs(val))))
    if not np.all(np.isfinite(val)) or err > bound:
        raise AccuracyError(f"quadrature on ({a}, {b}) reached error {err:.3g} > {bound:.3g}",
                            estimate=val, error=err)
    return val


# --- one-sided stable density ------------------------------------------------

def _zolotarev_a(alpha, phi):
    # Kanter/Zolotarev shape function, increasing on (0, pi)
    s_a = np.sin(alpha * phi)
    return (s_a / np.sin(phi)) ** (1.0 / (1.0 - alpha)) * np.sin((1.0 - alpha) * phi) / s_a


def _stable_tail_series(alpha, x, terms=40):
    # convergent expansion in x**-alpha, used far in the right tail
    k = np.arange(1, terms + 1)
    coef = np.exp(special.gammaln(k * alpha + 1) - special.gammaln(k + 1))
    return float(np.sum((-1.0) ** (k + 1) * coef * np.sin(k * np.pi * alpha)
                        * x ** (-k * alpha - 1.0)) / np.pi)


def _stable_density_scalar(alpha, x):
    if x ** -alpha < 0.05:
        return _stable_tail_series(alpha, x)
    c = x ** (-alpha / (1.0 - alpha))
    a0 = alpha ** (alpha / (1.0 - alpha)) * (1.0 - alpha)  # limit of A at phi -> 0
    log_pref = math.log(alpha / (1.0 - alpha) / np.pi) - math.log(x) / (1.0 - alpha) - c * a0
    if log_pref < -745.0:
        return 0.0

    def integrand(phi):
        if phi <= 0.0:
            return a0
        if phi >= np.pi:
            return 0.0
        a = _zolotarev_a(alpha, phi)
        return a * math.exp(-c * max(a - a0, 0.0))

    # mass concentrates near phi = 0 when c is large and near phi = pi when small
    if c > 16:
        w = 1.0 / math.sqrt(c)
        brk = [p for p in (w, 3 * w, 10 * w, 30 * w) if p < np.pi / 2]
    elif c * (_zolotarev_a(alpha, np.pi / 2) - a0) < 1.0:
        star = optimize.brentq(lambda p: math.log(_zolotarev_a(alpha, p) - a0) + math.log(c),
                               np.pi / 2, np.pi * (1 - 1e-15))
        brk = [star, 0.5 * (star + np.pi)]
    else:
        brk = None
    val = quad(integrand, 0.0, np.pi, tol=1e-16, rtol=1e-10, points=brk)
    return math.exp(log_pref) * val


def stable_density(alpha, x):
    """Density of the one-sided stable law with Laplace exponent ``lam**alpha``.

    Evaluated from Zolotarev's single-integral representation.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    xs = np.asarray(x, dtype=float)
    if np.any(~(xs > 0)):
        raise DomainError("stable_density requires x > 0")
    if xs.ndim == 0:
        return _stable_density_scalar(alpha, float(xs))
    return np.array([_stable_density_scalar(alpha, float(v)) for v in xs.ravel()]).reshape(xs.shape)


# --- Laplace transforms ------------------------------------------------------

def laplace_transform(f, lam, tol=1e-12, singularity=None):
    """Numerical Laplace transform ``int_0^inf exp(-lam t) f(t) dt``.

    ``lam`` may be complex with positive real part; oscillatory parts are
    handled with Fourier-weighted quadrature.
    """
    lam = complex(lam)
    c, w = lam.real, lam.imag
    if c <= 0:
        raise DomainError("forward transform needs Re(lam) > 0")
    damped = lambda t: f(t) * math.exp(-c * t)  # noqa: E731
    if w == 0.0:
        return quad(damped, 0.0, np.inf, tol=tol, singularity=singularity)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        re, err_re = integrate.quad(damped, 0.0, np.inf, weight="cos", wvar=w, epsabs=tol, limlst=100)
        im, err_im = integrate.quad(damped, 0.0, np.inf, weight="sin", wvar=w, epsabs=tol, limlst=100)
    if max(err_re, err_im) > 100 * tol:
        raise AccuracyError("oscillatory Laplace transform did not converge",
                            estimate=complex(re, -im), error=max(err_re, err_im))
    return complex(re, -im)


def talbot(F, t, M=32):
    """Fixed-Talbot inversion (Abate-Valko) of a vectorised transform ``F``."""
    if t <= 0:
        raise DomainError("inversion time must be positive")
    r = 2.0 * M / (5.0 * t)
    k = np.arange(1, M)
    th = k * np.pi / M
    cot = 1.0 / np.tan(th)
    delta = r * th * (cot + 1j)
    sig = th + (th * cot - 1.0) * cot
    vals = F(delta)
    head = 0.5 * np.real(F(np.array([r + 0j]))[0]) * math.exp(r * t)
    body = np.real(np.exp(t * delta) * vals * (1.0 + 1j * sig))
    return float(r / M * (head + body.sum()))


@lru_cache(maxsize=None)
def _stehfest_weights(N):
    half = N // 2
    out = []
    for k in range(1, N + 1):
        acc = Fraction(0)
        for j in range((k + 1) // 2, min(k, half) + 1):
            acc += Fraction(
                j**half * math.factorial(2 * j),
                math.factorial(half - j) * math.factorial(j) * math.factorial(j - 1)
                * math.factorial(k - j) * math.factorial(2 * j - k),
            )
        out.append(float((-1) ** (k + half) * acc))
    return np.array(out)


def stehfest(F, t, N=14):
    """Gaver-Stehfest inversion; ``F`` is only evaluated on the real axis."""
    if t <= 0:
        raise DomainError("inversion time must be positive")
    if N % 2:
        raise DomainError("Stehfest order must be even")
    ln2t = math.log(2.0) / t
    lam = ln2t * np.arange(1, N + 1)
    return float(ln2t * np.dot(_stehfest_weights(N), np.real(F(lam.astype(complex)))))


@lru_cache(maxsize=None)
def _euler_weights(M):
    xi = np.zeros(2 * M + 1)
    xi[0] = 0.5
    xi[1:M + 1] = 1.0
    xi[2 * M] = 2.0**-M
    for k in range(1, M):
        xi[2 * M - k] = xi[2 * M - k + 1] + 2.0**-M * math.comb(M, k)
    return (-1.0) ** np.arange(2 * M + 1) * xi


def euler_inversion(F, t, M=18):
    """Abate-Whitt Euler-summation inversion on a vertical Bromwich line.

    All nodes have real part ``M ln(10) / (3 t) > 0``, so transforms that
    are only computable in the right half-plane can be inverted.
    """
    if t <= 0:
        raise DomainError("inversion time must be positive")
    beta = M * math.log(10.0) / 3.0 + 1j * np.pi * np.arange(2 * M + 1)
    vals = np.real(F(beta / t))
    return float(10.0 ** (M / 3.0) / t * np.dot(_euler_weights(M), vals))


def fourier_inversion(F, t, A=24.0, m=11, rtol=1e-13, atol=1e-15, block=32,
                      max_terms=20000):
    """Fourier-series inversion with Euler (binomial) averaging of the partial sums.

    The Bromwich line sits at ``A / (2 t)``; discretisation error is about
    ``exp(-A)`` and roundoff about ``exp(A / 2)`` ulp, balanced near
    ``A = 24``. Terms are added in blocks until the averaged estimate moves
    by less than ``max(rtol |f|, atol)``, so functions that are sharply
    concentrated at large ``t`` (where a fixed node count fails) get as
    many terms as they need. ``atol`` is raised to the roundoff level of
    the partial sums when that is larger.
    """
    if t <= 0:
        raise DomainError("inversion time must be positive")
    weights = special.comb(m, np.arange(m + 1)) / 2.0**m
    scale = math.exp(A / 2.0) / t
    total = 0.5 * np.real(F(np.array([A / (2.0 * t) + 0j]))[0])
    sums = [total]
    prev = None
    k0 = 1
    while True:
        k = np.arange(k0, k0 + block)
        terms = np.real(F((A + 2j * math.pi * k) / (2.0 * t))) * (1.0 - 2.0 * (k % 2))
        sums.extend(total + np.cumsum(terms))
        total = sums[-1]
        k0 += block
        est = scale * float(np.dot(weights, sums[-m - 1:]))
        # partial sums carry roundoff of a few ulp of their largest magnitude
        noise = 64.0 * np.finfo(float).eps * scale * float(np.max(np.abs(sums)))
        if prev is not None and abs(est - prev) <= max(rtol * abs(est), atol, noise):
            return est
        if k0 > max_terms:
            raise AccuracyError(f"Fourier-series inversion needs more than {max_terms} terms",
                                estimate=est, error=abs(est - prev))
        prev = est


_INVERTERS = {"talbot": talbot, "stehfest": stehfest, "euler": euler_inversion,
              "fourier": fourier_inversion}


def laplace_inverse(F, t, method="talbot", cross_check=False, tol=1e-4, **kw):
    """Invert a Laplace transform at ``t``.

    ``F`` must accept a complex ndarray. With ``cross_check=True`` the
    Gaver-Stehfest estimate is also computed and an :class:`AccuracyError`
    is raised when the two differ by more than ``tol`` (relative to
    ``max(1, |value|)``).
    """
    try:
        inv = _INVERTERS[method]
    except KeyError:
        raise DomainError(f"unknown inversion method {method!r}") from None
    with np.errstate(over="ignore", invalid="ignore"):
        value = inv(F, t, **kw)
        if not math.isfinite(value):
            raise AccuracyError(f"{method} inversion produced a non-finite value", estimate=value)
        if cross_check:
            other = stehfest(F, t)
            gap = abs(value - other) / max(1.0, abs(value))
            if gap > tol:
                raise AccuracyError(f"Talbot/Stehfest discrepancy {gap:.3g} > {tol:.3g}",
                                    estimate=value, error=gap)
    return value
