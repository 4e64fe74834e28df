import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from tcfou import DomainError, FouModel, Grid, ProcessPath, RngStream
from tcfou.convergence import (ConvergenceReport, covariance_lipschitz, holder_seminorm,
                               j1_bruteforce, j1_distance, ks_distance, ks_two_sample,
                               sup_norm_density, sup_norm_moments, track_report,
                               vprime_envelope, vprime_small_t)
from tcfou.fou import abs_moment_const, fou_filter, sample_fbm_batch, variance_limit
from tcfou.timechange import sample_tcfou_batch

TRACK = (0.6, 0.55, 0.52, 0.51)


def step(at, T=1.0, h=1e-3, label="tcfou"):
    g = Grid.uniform(T, int(round(T / h)))
    return ProcessPath(g, (g.points >= at - 1e-12).astype(float), label)


def test_report_shape_and_verdicts():
    r = track_report("m", [0.6, 0.55], [0.2, 0.1], threshold=0.15)
    assert r.verdict and r.to_dict()["verdicts"] == {"monotone_decreasing": True,
                                                     "below_threshold": True}
    assert track_report("m", [0.6], [1.0]).verdict
    assert not track_report("m", [0.6, 0.55], [0.1, 0.1]).verdict
    with pytest.raises(DomainError):
        ConvergenceReport([0.6], "m", [1.0, 2.0])


def test_moment_sup_norm_track():
    vals = [sup_norm_moments(2, H) for H in TRACK]
    assert vals == pytest.approx([0.0509, 0.0258, 0.0107, 0.00543], rel=2e-2)
    assert sup_norm_moments(2, 0.5) == 0.0
    with pytest.raises(DomainError):
        sup_norm_moments(2, 0.6, t_grid=Grid.uniform(5.0, 100))


def test_moment_chain_bounds():
    V = max(variance_limit(FouModel(H)) for H in TRACK)
    for H in TRACK:
        d2 = sup_norm_moments(2, H)
        assert sup_norm_moments(1, H) <= math.sqrt(2 / math.pi * d2) + 1e-10
        for n in (4, 6):
            L = abs_moment_const(n) * (n / 2) * V ** (n / 2 - 1)
            assert sup_norm_moments(n, H) <= L * d2 * (1 + 1e-12)


def test_density_sup_norms(model):
    tg = Grid.parse("0.5:20:0.5")
    xg = Grid.parse("0.5:2:0.25")
    vals = [sup_norm_density(model, H, t_grid=tg, x_grid=xg) for H in (0.6, 0.55, 0.52)]
    assert vals[0] > vals[1] > vals[2] > 0
    par = [sup_norm_density(model, H, parent=True) for H in (0.6, 0.55, 0.52)]
    assert par[0] > par[1] > par[2] > 0
    assert sup_norm_density(model, 0.5) == 0.0
    with pytest.raises(DomainError):
        sup_norm_density(model, 0.6, K=(0.0, 1.0))


def test_ks_null_power_and_errors():
    gen = np.random.default_rng(0)
    z = gen.standard_normal(100000)
    r = ks_distance(z, stats.norm.cdf)
    assert r.passes(0.01) and r.crit_1 == pytest.approx(1.6276 / math.sqrt(1e5), rel=1e-3)
    assert not ks_distance(z[:1000], stats.norm(0.5).cdf).passes(0.01)
    with pytest.raises(DomainError):
        ks_distance([], stats.norm.cdf)


def test_marginals_near_half_are_close(model):
    g = Grid.parse("0,1")
    a = sample_tcfou_batch(model.with_H(0.51), g, 100000, RngStream(31), backend="exact")
    b = sample_tcfou_batch(model.with_H(0.5), g, 100000, RngStream(32), backend="exact")
    assert ks_two_sample(a[:, -1], b[:, -1]).passes(0.05)


def test_j1_shifted_steps():
    d = j1_distance(step(0.5), step(0.55), 1.0)
    assert 0.049 <= d <= 0.051
    assert j1_distance(step(0.5), step(0.5), 1.0) == 0.0


def small_paths():
    gen = np.random.default_rng(42)
    for n, m in itertools.product(range(1, 9), repeat=2):
        for _ in range(3):
            ft = np.sort(gen.choice(np.arange(1, 20), n - 1, replace=False)) / 20.0
            gt = np.sort(gen.choice(np.arange(1, 20), m - 1, replace=False)) / 20.0
            f = ProcessPath(Grid(np.concatenate([[0.0], ft])), gen.integers(0, 3, n) / 2.0)
            g = ProcessPath(Grid(np.concatenate([[0.0], gt])), gen.integers(0, 3, m) / 2.0)
            yield f, g


def test_j1_dp_equals_bruteforce():
    for f, g in small_paths():
        assert j1_distance(f, g, 1.0) == j1_bruteforce(f, g, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=12, max_size=12))
def test_j1_symmetric_triangle_and_identity_bound(vals):
    g = Grid.uniform(1.0, 3)
    a, b, c = (ProcessPath(g, vals[i:i + 4]) for i in (0, 4, 8))
    ab, ba = j1_distance(a, b, 1.0), j1_distance(b, a, 1.0)
    assert ab == pytest.approx(ba, abs=1e-12)
    assert ab <= np.max(np.abs(a.values - b.values)) + 1e-12
    assert ab <= j1_distance(a, c, 1.0) + j1_distance(c, b, 1.0) + 2 * (1 / 3)


def test_holder():
    g = Grid.uniform(1.0, 50)
    assert holder_seminorm(ProcessPath(g, np.ones(51)), 0.5) == 0.0
    assert holder_seminorm(ProcessPath(g, g.points), 1.0) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        holder_seminorm(ProcessPath(g, g.points), 0.0)


def test_holder_of_fou_stays_bounded():
    n = 256
    med = []
    for i, H in enumerate((0.6, 0.55, 0.52)):
        B = sample_fbm_batch(H, n, 1 / n, 200, np.random.default_rng(i))
        U = fou_filter(B, 1 / n, 1.0)
        g = Grid.uniform(1.0, n)
        med.append(np.median([holder_seminorm(ProcessPath(g, u), 0.45) for u in U]))
    assert max(med) < 1.5 * min(med)


def test_vprime_envelope():
    vals = [vprime_envelope(H) for H in TRACK]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vprime_envelope(0.5) == 0.0
    for H in (0.55, 0.52):
        assert vprime_small_t(H) <= 1.1


def test_covariance_lipschitz_uniform_in_H():
    vals = [covariance_lipschitz(FouModel(H)) for H in (0.5, 0.6, 0.7, 0.75)]
    assert vals == pytest.approx([0.903, 0.625, 0.509, 0.483], abs=2e-3)
    # the kink of C at t = s is largest in the Brownian case; one constant covers all
    assert max(vals) < 1.0
