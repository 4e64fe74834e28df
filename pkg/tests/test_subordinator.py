import math

import numpy as np
import pytest
from scipy import special, stats

from tcfou import BernsteinFunction, DomainError, Grid, HorizonError, RngStream
from tcfou.numerics import quad
from tcfou.subordinator import (SubordinatorPath, cutoff_check, expectation, identity_path,
                                inverse_density, inverse_mean, invert_path, neg_moment,
                                pure_drift, sample_inverse_batch, sample_inverse_marginal,
                                sample_stable_subordinator, sample_subordinator, support_bound)

STABLE = BernsteinFunction.stable(0.5)
GAMMA = BernsteinFunction.gamma()
TEMPERED = BernsteinFunction.tempered_stable(0.5, 1.0)


def levy_cdf(s, t):
    """P(E(t) <= s) for alpha = 1/2, where E(t) = |N(0, 2t)|."""
    return special.erf(s / (2.0 * math.sqrt(t)))


def test_half_stable_density_closed_form():
    s = np.array([0.1, 1.0, 3.0])
    assert np.allclose(inverse_density(STABLE, s, 2.0),
                       np.exp(-s * s / 8.0) / math.sqrt(2 * math.pi), rtol=1e-14)


@pytest.mark.parametrize("method", ["euler", "talbot"])
def test_inversion_matches_closed_form(method):
    for s, t in ((0.2, 0.5), (1.0, 1.0), (3.0, 4.0)):
        exact = math.exp(-s * s / (4 * t)) / math.sqrt(math.pi * t)
        assert inverse_density(STABLE, s, t, method=method) == pytest.approx(exact, abs=1e-8)


def test_scaling_relation_matches_inversion():
    f = BernsteinFunction.stable(0.7)
    for s in (0.1, 0.8, 2.5):
        assert inverse_density(f, s, 1.5) == pytest.approx(
            inverse_density(f, s, 1.5, method="euler"), abs=1e-8)


@pytest.mark.parametrize("f", [STABLE, BernsteinFunction.stable(0.8), GAMMA, TEMPERED],
                         ids=["stable0.5", "stable0.8", "gamma", "tempered"])
def test_density_normalised_with_renewal_mean(f):
    assert expectation(f, lambda s: 1.0, 1.3) == pytest.approx(1.0, abs=1e-8)
    assert expectation(f, lambda s: s, 1.3) == pytest.approx(inverse_mean(f, 1.3), rel=1e-7)


def test_renewal_function_oracles():
    assert inverse_mean(STABLE, 1.0) == pytest.approx(2 / math.sqrt(math.pi), rel=1e-15)
    # Gamma(1, 1): frozen value of the inverted 1 / (lam log(1 + lam))
    assert inverse_mean(GAMMA, 2.0) == pytest.approx(2.4961078998464448, rel=1e-8)
    assert inverse_density(GAMMA, 1.0, 2.0) == pytest.approx(0.22082542621912338, rel=1e-7)


def test_neg_moment():
    assert neg_moment(STABLE, 0.5, 1.0) == pytest.approx(math.gamma(0.5) / math.gamma(0.75),
                                                         rel=1e-8)
    for g in (0.0, 1.0):
        with pytest.raises(DomainError):
            neg_moment(STABLE, g, 1.0)


def test_support_bound_is_conservative():
    s = support_bound(STABLE, 1.0)
    assert 1 - levy_cdf(s, 1.0) < 1e-17


def test_pure_drift_expectation():
    assert expectation(pure_drift(2.0), lambda s: s * s, 3.0) == pytest.approx(2.25)
    with pytest.raises(DomainError):
        inverse_density(pure_drift(), 1.0, 1.0)


def test_invert_identity_and_horizon():
    g = Grid.uniform(2.0, 200)
    E = invert_path(identity_path(g), Grid.parse("0:1.5:0.5"))
    assert np.allclose(E.values, [0, 0.5, 1.0, 1.5])
    with pytest.raises(HorizonError) as info:
        invert_path(identity_path(g), Grid.parse("0,3"))
    assert info.value.required == pytest.approx(3.0)


def test_path_must_be_nondecreasing():
    with pytest.raises(DomainError):
        SubordinatorPath(Grid.parse("0,1"), [1.0, 0.5])


def test_stable_subordinator_marginal():
    g = Grid.parse("0,1")
    rng = RngStream(11)
    x = np.array([sample_stable_subordinator(0.5, g, rng.child(i)).values[-1]
                  for i in range(2000)])
    # sigma(1) for alpha = 1/2 is Levy with scale 1/2
    assert stats.kstest(x, stats.levy(scale=0.5).cdf).pvalue > 1e-3


def test_inverse_marginal_exact_draws():
    x = sample_inverse_marginal(STABLE, 1.0, 20000, RngStream(3))
    assert stats.kstest(x, lambda s: levy_cdf(s, 1.0)).pvalue > 1e-3


def test_inverse_batch_against_marginal_law():
    E = sample_inverse_batch(STABLE, Grid.parse("0,0.5,1"), 3000, RngStream(4))
    assert np.all(np.diff(E, axis=1) >= 0)
    assert stats.kstest(E[:, -1], lambda s: levy_cdf(s, 1.0)).pvalue > 1e-3


def test_inverse_batch_gamma_mean():
    E = sample_inverse_batch(GAMMA, Grid.parse("0,2"), 4000, RngStream(9))[:, -1]
    se = E.std(ddof=1) / math.sqrt(E.size)
    assert abs(E.mean() - inverse_mean(GAMMA, 2.0)) < 4 * se


def test_inverse_batch_is_deterministic():
    g = Grid.parse("0:1:0.25")
    a = sample_inverse_batch(TEMPERED, g, 50, RngStream(1), batch=16)
    b = sample_inverse_batch(TEMPERED, g, 50, RngStream(1), batch=16)
    assert np.array_equal(a, b)


def test_subordinator_cutoff_mean():
    g = Grid.parse("0:1:0.5")
    vals = np.array([sample_subordinator(GAMMA, g, RngStream(2, i)).values[-1]
                     for i in range(3000)])
    assert abs(vals.mean() - 1.0) < 4 * vals.std(ddof=1) / math.sqrt(vals.size)


def test_cutoff_check():
    out = cutoff_check(TEMPERED, RngStream(8), n=5000)
    assert out["ok"]
    assert abs(out["fine"] - out["exact"]) < 4 * out["fine_se"]


def test_expectation_of_indicator_is_cdf():
    p = expectation(STABLE, lambda s: 1.0 if s <= 1.0 else 0.0, 1.0)
    assert p == pytest.approx(levy_cdf(1.0, 1.0), abs=1e-8)
    assert quad(lambda s: inverse_density(STABLE, s, 1.0), 0, 1) == pytest.approx(p, abs=1e-10)
