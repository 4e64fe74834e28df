import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tcfou import DomainError, FouModel, Grid, ProcessPath, RngStream
from tcfou.fou import (abs_moment, abs_moment_const, covariance, covariance_matrix, density_p,
                       fgn_autocov, fou_filter, fou_from_fbm, sample_fbm, sample_fbm_batch,
                       variance_limit, variance_v2, variance_v2_prime)
from tcfou.numerics import quad

M = FouModel(0.75)


def test_model_validation():
    for H in (0.4, 1.0):
        with pytest.raises(DomainError):
            FouModel(H)
    with pytest.raises(DomainError):
        FouModel(0.7, theta=0.0)


def test_variance_frozen():
    assert variance_v2(M, 1.0) == pytest.approx(0.41165680837766444, rel=1e-13)
    assert variance_v2_prime(M, 1.0) == pytest.approx(0.2969225824633117, rel=1e-13)
    assert covariance(M, 2.0, 1.0) == pytest.approx(0.3160667854747234, rel=1e-13)


def test_brownian_case_closed_form():
    m = FouModel(0.5, theta=2.0, sigma=1.5)
    t = np.array([0.1, 1.0, 7.0])
    assert np.allclose(variance_v2(m, t), 1.125 * 2.0 * (1 - np.exp(-t)) , rtol=1e-14)


@pytest.mark.parametrize("t", [0.01, 0.7, 3.0, 25.0])
@pytest.mark.parametrize("H", [0.55, 0.75, 0.95])
def test_variance_methods_agree(H, t):
    m = FouModel(H, theta=1.3, sigma=0.8)
    v = variance_v2(m, t)
    assert variance_v2(m, t, method="quad") == pytest.approx(v, rel=1e-9)
    assert variance_v2(m, t, method="cumulative") == pytest.approx(v, rel=1e-9)


def test_variance_limit_and_small_t():
    assert variance_limit(M) == pytest.approx(0.75 * math.gamma(1.5), rel=1e-15)
    assert variance_v2(M, 60.0) == pytest.approx(variance_limit(M), abs=1e-12)
    # U behaves like sigma B^H near 0
    t = 1e-6
    assert variance_v2(M, t) / t**1.5 == pytest.approx(1.0, rel=1e-5)
    assert variance_v2_prime(M, t) / (1.5 * t**0.5) == pytest.approx(1.0, rel=1e-5)


def test_derivative_matches_finite_difference():
    for t in (0.05, 1.0, 8.0):
        h = 1e-5 * t
        fd = (variance_v2(M, t + h) - variance_v2(M, t - h)) / (2 * h)
        assert variance_v2_prime(M, t) == pytest.approx(fd, rel=1e-7)


def test_series_continuous_at_half():
    near = FouModel(0.5 + 1e-9)
    half = FouModel(0.5)
    assert covariance(near, 2.0, 0.7) == pytest.approx(covariance(half, 2.0, 0.7), abs=1e-7)
    assert variance_v2_prime(near, 0.3) == pytest.approx(variance_v2_prime(half, 0.3), abs=1e-7)


def test_covariance_structure():
    assert covariance(M, 1.7, 1.7) == pytest.approx(variance_v2(M, 1.7), rel=1e-13)
    assert covariance(M, 1.0, 2.0) == covariance(M, 2.0, 1.0)
    assert covariance(M, 3.0, 0.0) == 0.0
    C = covariance_matrix(M, np.linspace(0.1, 5, 30))
    assert np.linalg.eigvalsh(C).min() > -1e-12


def test_covariance_wiener_integral():
    # Cov = H(2H-1) int_0^t int_0^s e^{-(t-u)-(s-v)} |u-v|^{2H-2} du dv for theta = sigma = 1
    t, s, H = 1.2, 0.6, 0.75
    c = H * (2 * H - 1)

    def inner(u):
        g = lambda v: math.exp(-(s - v)) * abs(u - v) ** (2 * H - 2)  # noqa: E731
        if u < s:
            val = quad(g, 0, u, singularity=2 - 2 * H) + \
                quad(lambda w: g(s - w), 0, s - u, singularity=2 - 2 * H)
        else:
            val = quad(lambda w: g(s - w), 0, s, singularity=0.0) if u - s > 1e-3 else \
                quad(lambda w: math.exp(-w) * (u - s + w) ** (2 * H - 2), 0, s)
        return math.exp(-(t - u)) * val

    brute = c * quad(inner, 0.0, t, points=[s], tol=1e-9)
    assert covariance(M, t, s) == pytest.approx(brute, rel=1e-7)


def test_abs_moments():
    assert abs_moment_const(1) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-15)
    assert abs_moment_const(4) == pytest.approx(3.0, rel=1e-14)
    assert abs_moment(M, 2, 1.0) == pytest.approx(variance_v2(M, 1.0), rel=1e-14)


def test_density_integrates_to_one():
    v = quad(lambda x: density_p(M, 0.8, x), -math.inf, math.inf)
    assert v == pytest.approx(1.0, abs=1e-10)


def test_fgn_autocov():
    g = fgn_autocov(0.5, 5)
    assert np.allclose(g, [1, 0, 0, 0, 0])


@pytest.mark.parametrize("H", [0.5, 0.7, 0.9])
def test_fbm_variance_and_increment_covariance(H):
    n, dt = 64, 1 / 64
    B = sample_fbm_batch(H, n, dt, 20000, np.random.default_rng(1))
    var = B[:, -1].var()
    assert var == pytest.approx(1.0, abs=4 * math.sqrt(2 / B.shape[0]))
    inc = np.diff(B, axis=1) / dt**H
    lag1 = np.mean(inc[:, 10] * inc[:, 11])
    assert lag1 == pytest.approx(fgn_autocov(H, 2)[1], abs=0.05)


def test_fou_paths_match_variance_and_covariance():
    n, T = 512, 2.0
    B = sample_fbm_batch(0.75, n, T / n, 20000, np.random.default_rng(5))
    U = fou_filter(B, T / n, 1.0)
    v = U[:, -1].var()
    assert abs(v - variance_v2(M, T)) < 4 * v * math.sqrt(2 / U.shape[0])
    c = np.mean(U[:, -1] * U[:, n // 2])
    assert c == pytest.approx(covariance(M, T, 1.0), abs=0.02)


def test_single_paths_and_labels():
    g = Grid.uniform(1.0, 128)
    b = sample_fbm(0.7, g, RngStream(1))
    u = fou_from_fbm(b, 1.0)
    assert b.label == "fbm" and u.label == "fou" and u.values[0] == 0.0
    with pytest.raises(DomainError):
        fou_from_fbm(u, 1.0)
    with pytest.raises(DomainError):
        ProcessPath(g, np.zeros(3))
    assert u(0.5) == pytest.approx(u.values[64])


@settings(max_examples=40, deadline=None)
@given(st.floats(0.5, 0.99), st.floats(1e-3, 40.0), st.floats(0.0, 1.0))
def test_covariance_cauchy_schwarz(H, t, frac):
    m = FouModel(H)
    s = t * frac
    c = covariance(m, t, s)
    # the series sums O(1) terms, so its absolute roundoff is about 1e-16
    assert abs(c) <= math.sqrt(variance_v2(m, t) * variance_v2(m, s)) * (1 + 1e-10) + 1e-15
