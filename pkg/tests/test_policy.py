import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from lrpg.factored import FactoredMatrix
from lrpg.policy import (FactoredSigma, FixedSigma, PolicyParams, dlogp_dmu, dlogp_dsigma,
                         log_prob, mu_of, sample, sigma_of)

PEAK = -0.5 * math.log(2 * math.pi)


def _policy(mu_L, mu_R, sigma):
    return PolicyParams(FactoredMatrix(mu_L, mu_R), sigma)


def test_mu_of():
    assert mu_of(_policy(np.zeros((2, 1)), np.zeros((1, 3)), FixedSigma(1.0)), 1, 2) == 0.0
    assert mu_of(_policy([[2.0]], [[3.0]], FixedSigma(1.0)), 0, 0) == 6.0
    assert mu_of(_policy(np.eye(2), [[1.0, -1.0], [0.0, 4.0]], FixedSigma(1.0)), 1, 1) == 4.0
    with pytest.raises(IndexError):
        mu_of(_policy([[2.0]], [[3.0]], FixedSigma(1.0)), 1, 0)


def test_sigma_of():
    p = _policy(np.zeros((3, 1)), np.zeros((1, 3)), FixedSigma(0.5))
    assert {sigma_of(p, i, j) for i in range(3) for j in range(3)} == {0.5}
    floored = _policy([[1.0]], [[1.0]], FactoredSigma(FactoredMatrix([[-3.0]], [[1.0]]), 1e-3))
    assert sigma_of(floored, 0, 0) == 1e-3
    active = _policy([[1.0]], [[1.0]], FactoredSigma(FactoredMatrix([[4.0]], [[0.5]]), 1e-3))
    assert sigma_of(active, 0, 0) == 2.0


def test_invalid_sigma_models():
    with pytest.raises(ValueError):
        FixedSigma(0.0)
    with pytest.raises(ValueError):
        FactoredSigma(FactoredMatrix([[1.0]], [[1.0]]), 0.0)
    with pytest.raises(ValueError):
        PolicyParams(FactoredMatrix(np.ones((2, 1)), np.ones((1, 2))),
                     FactoredSigma(FactoredMatrix([[1.0]], [[1.0]])))


@settings(max_examples=100, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.integers(1, 4))
def test_sigma_floor_holds_for_negative_entries(a, b, k):
    F = FactoredMatrix(np.full((1, k), a), np.full((k, 1), b))
    p = PolicyParams(FactoredMatrix([[0.0]], [[0.0]]), FactoredSigma(F, 0.01))
    assert sigma_of(p, 0, 0) >= 0.01


def test_sample_is_deterministic():
    p = _policy([[1.0]], [[0.3]], FixedSigma(0.7))
    assert sample(p, 0, 0, np.random.default_rng(5)) == sample(p, 0, 0, np.random.default_rng(5))


def test_sample_moments_floor_sigma():
    p = _policy([[1.5]], [[1.0]], FactoredSigma(FactoredMatrix([[-1.0]], [[1.0]]), 1e-3))
    rng = np.random.default_rng(0)
    n = 10**6
    draws = np.array([sample(p, 0, 0, rng) for _ in range(n)])
    assert abs(draws.mean() - 1.5) < 5 * 1e-3 / math.sqrt(n)


def test_sample_moments_unit_sigma():
    p = _policy([[0.0]], [[0.0]], FixedSigma(1.0))
    rng = np.random.default_rng(1)
    draws = np.array([sample(p, 0, 0, rng) for _ in range(10**6)])
    assert 0.99 <= draws.var() <= 1.01


def test_log_prob_values():
    assert log_prob(0.3, 0.3, 1.0) == pytest.approx(PEAK, abs=1e-15)
    assert log_prob(2.0, 1.5, 0.5) == pytest.approx(-math.log(0.5) + PEAK - 0.5, abs=1e-14)
    assert log_prob(-0.4, 1.0, 1.0) == pytest.approx(PEAK - 0.98, abs=1e-14)
    with pytest.raises(ValueError):
        log_prob(0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        log_prob(0.0, 0.0, -1.0)


@pytest.mark.parametrize("sigma", [0.1, 1.0, 5.0])
def test_density_integrates_to_one(sigma):
    mu = 0.7
    total, _ = integrate.quad(lambda a: math.exp(log_prob(a, mu, sigma)), mu - 40 * sigma,
                              mu + 40 * sigma, points=[mu], epsabs=1e-12, epsrel=1e-12, limit=200)
    assert abs(total - 1.0) < 1e-6


def test_score_examples():
    assert dlogp_dmu(1.0, 0.0, 1.0) == 1.0
    assert dlogp_dmu(2.5, 2.5, 0.3) == 0.0
    assert dlogp_dsigma(1.0, 1.0, 0.5) == -2.0
    assert dlogp_dsigma(1.0 + 0.5, 1.0, 0.5) == pytest.approx(0.0, abs=1e-15)


def _fd(f, x):
    h = 1e-5 * max(1.0, abs(x))
    return (f(x + h) - f(x - h)) / (2 * h)


@settings(max_examples=300, deadline=None)
@given(st.floats(-5, 5), st.floats(0.05, 5), st.floats(-4, 4))
def test_scores_match_finite_differences(mu, sigma, z):
    a = mu + sigma * z
    fd_mu = _fd(lambda m: log_prob(a, m, sigma), mu)
    fd_sigma = _fd(lambda s: log_prob(a, mu, s), sigma)
    # both scores subtract nearly equal quantities somewhere; errors are
    # measured relative to the size of the terms being subtracted
    assert abs(dlogp_dmu(a, mu, sigma) - fd_mu) <= 1e-6 * ((abs(a) + abs(mu)) / sigma**2 + 1.0 / sigma)
    terms = z * z / sigma + 1.0 / sigma
    assert abs(dlogp_dsigma(a, mu, sigma) - fd_sigma) <= 1e-6 * terms
