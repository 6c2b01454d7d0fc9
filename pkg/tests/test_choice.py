from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from conftest import assert_prob_vector
from eunit_sue.choice import (
    EUnitParams,
    ExpUniform,
    MNLParams,
    MNWParams,
    bc_prob,
    eunit_prob,
    eunit_prob_from_utilities,
    eunit_variance,
    exp_uniform_cdf,
    exp_uniform_moments,
    exp_uniform_quantile,
    mnl_prob,
    mnw_prob,
    mnw_variance,
    sensitivity,
)
from eunit_sue.errors import DomainError, EmptySupportError

# frozen oracle values (high-precision evaluation of the stated formulas)
MNL_1_2 = 0.73105857863000487925  # 1 / (1 + e^-1)
BC_10_12 = 0.88537125287615260592  # (e^5 - 1) / ((e^5 - 1) + (e^3 - 1))
MNW_VAR_25_10 = 18.310454684292170488  # Weibull variance, shape 2.5, mean 10


class TestMnl:
    def test_symmetry(self):
        pv = mnl_prob([7.0, 7.0, 7.0], 1.0)
        assert np.allclose(pv.probs, 1.0 / 3.0)
        assert_prob_vector(pv)

    def test_two_routes(self):
        pv = mnl_prob([1.0, 2.0], 1.0)
        assert pv.probs[0] == pytest.approx(MNL_1_2, abs=1e-12)
        assert pv.probs[1] == pytest.approx(1.0 - MNL_1_2, abs=1e-12)

    def test_singleton(self):
        assert mnl_prob([5.0], 3.0).probs[0] == 1.0

    def test_overflow_safe(self):
        pv = mnl_prob([1e4, 1e4 + 1.0], 1.0)
        assert_prob_vector(pv)
        assert pv.probs[0] > 0.7

    def test_empty_rejected(self):
        with pytest.raises(DomainError):
            mnl_prob([], 1.0)

    def test_bad_dispersion(self):
        with pytest.raises(DomainError):
            mnl_prob([1.0], 0.0)


class TestMnw:
    def test_symmetry(self):
        assert np.allclose(mnw_prob([3.0, 3.0], 2.5).probs, 0.5)

    def test_two_routes(self):
        pv = mnw_prob([1.0, 2.0], 2.0)
        assert pv.probs[0] == pytest.approx(0.8, abs=1e-12)
        assert pv.probs[1] == pytest.approx(0.2, abs=1e-12)

    @given(c=st.floats(0.01, 100.0))
    def test_scale_invariance_at_zero_location(self, c):
        base = mnw_prob([2.0, 3.0, 5.0], 1.7).probs
        scaled = mnw_prob([2.0 * c, 3.0 * c, 5.0 * c], 1.7).probs
        assert np.allclose(base, scaled, atol=1e-12)

    def test_location_violation(self):
        with pytest.raises(DomainError):
            mnw_prob([1.0, 2.0], 2.0, location=1.0)


class TestMnwVariance:
    def test_zero_at_location(self):
        assert mnw_variance(2.0, 3.0, location=2.0) == 0.0

    def test_exponential_special_case(self):
        # shape 1 with mean 1 is Exponential(1): variance 1
        assert mnw_variance(1.0, 1.0) == pytest.approx(1.0, abs=1e-12)

    def test_frozen_value(self):
        assert mnw_variance(10.0, 2.5) == pytest.approx(MNW_VAR_25_10, rel=1e-12)

    def test_monte_carlo_agreement(self):
        shape, mean = 2.5, 10.0
        scale = mean / math.gamma(1.0 + 1.0 / shape)
        rng = np.random.default_rng(42)
        draws = scale * rng.weibull(shape, size=10**6)
        sample_var = draws.var(ddof=1)
        # standard error of the sample variance from the sample's own moments
        centered = draws - draws.mean()
        se = math.sqrt((np.mean(centered**4) - sample_var**2) / draws.size)
        assert abs(sample_var - mnw_variance(mean, shape)) <= 3.0 * se

    def test_increasing_in_time(self):
        values = [mnw_variance(g, 2.5) for g in (1.0, 5.0, 20.0)]
        assert values[0] < values[1] < values[2]


class TestBoundedChoice:
    def test_symmetry(self):
        pv = bc_prob([10.0, 10.0], 1.0, 5.0)
        assert np.allclose(pv.probs, 0.5)

    def test_cutoff_exact_zero(self):
        pv = bc_prob([10.0, 16.0], 1.0, 5.0)
        assert pv.probs[0] == 1.0
        assert pv.probs[1] == 0.0
        assert not pv.support[1]

    def test_boundary_exact_zero(self):
        pv = bc_prob([10.0, 15.0], 1.0, 5.0)
        assert pv.probs[1] == 0.0

    def test_two_routes_inside(self):
        pv = bc_prob([10.0, 12.0], 1.0, 5.0)
        assert pv.probs[0] == pytest.approx(BC_10_12, abs=1e-12)

    def test_large_scale_no_overflow(self):
        pv = bc_prob([10.0, 12.0], 100.0, 25.0)
        assert_prob_vector(pv)

    def test_threshold_zero_keeps_minimum(self):
        with pytest.raises(EmptySupportError):
            bc_prob([10.0, 12.0], 1.0, 0.0)


class TestEUnitProb:
    def test_weights_3_1_0(self):
        pv = eunit_prob([5.0, 6.0, 8.0], 4.0, 8.0)
        assert pv.probs[0] == pytest.approx(0.75, abs=1e-12)
        assert pv.probs[1] == pytest.approx(0.25, abs=1e-12)
        assert pv.probs[2] == 0.0
        assert list(pv.support) == [True, True, False]

    def test_symmetry(self):
        assert np.allclose(eunit_prob([6.0, 6.0], 4.0, 8.0).probs, 0.5)

    def test_singleton(self):
        assert eunit_prob([5.0], 4.0, 8.0).probs[0] == 1.0

    def test_at_or_above_upper_is_zero(self):
        pv = eunit_prob([5.0, 8.0, 9.0], 4.0, 8.0)
        assert pv.probs[1] == 0.0 and pv.probs[2] == 0.0

    def test_time_at_lower_rejected(self):
        with pytest.raises(DomainError):
            eunit_prob([4.0, 5.0], 4.0, 8.0)

    def test_empty_support(self):
        with pytest.raises(EmptySupportError):
            eunit_prob([8.0, 9.0], 4.0, 8.0)

    @given(
        shift=st.floats(-50.0, 50.0),
        g1=st.floats(1.1, 9.9),
        g2=st.floats(1.1, 9.9),
    )
    def test_shift_invariance(self, shift, g1, g2):
        base = eunit_prob([g1, g2], 1.0, 10.0).probs
        shifted = eunit_prob([g1 + shift, g2 + shift], 1.0 + shift, 10.0 + shift).probs
        assert np.allclose(base, shifted, atol=1e-12)

    @given(
        g1=st.floats(1.2, 9.8),
        g2=st.floats(1.2, 9.8),
        delta=st.floats(0.01, 0.1),
    )
    def test_monotone_dominance(self, g1, g2, delta):
        if g1 - delta <= 1.0:
            return
        before = eunit_prob([g1, g2], 1.0, 10.0).probs[0]
        after = eunit_prob([g1 - delta, g2], 1.0, 10.0).probs[0]
        assert after > before


class TestEUnitUtilities:
    def test_symmetry(self):
        assert np.allclose(eunit_prob_from_utilities([2.0, 2.0], 0.0, 4.0).probs, 0.5)

    def test_oriented_weights(self):
        pv = eunit_prob_from_utilities([3.0, 1.0], 0.0, 4.0)
        assert pv.probs[0] == pytest.approx(0.9, abs=1e-12)
        assert pv.probs[1] == pytest.approx(0.1, abs=1e-12)

    def test_beta_form_identity(self):
        v = np.array([1.0, 2.5, 3.5])
        lower, upper = 0.0, 4.0
        beta = (v - lower) / (upper - v)
        expected = beta / beta.sum()
        assert np.allclose(eunit_prob_from_utilities(v, lower, upper).probs, expected, atol=1e-15)

    def test_out_of_bounds_rejected(self):
        with pytest.raises(DomainError):
            eunit_prob_from_utilities([0.0, 2.0], 0.0, 4.0)
        with pytest.raises(DomainError):
            eunit_prob_from_utilities([2.0, 4.0], 0.0, 4.0)


class TestExpUniform:
    def test_uniform_case(self):
        assert exp_uniform_cdf(5.0, ExpUniform(0.0, 10.0, 1.0)) == 0.5

    def test_squared_case(self):
        assert exp_uniform_cdf(0.5, ExpUniform(0.0, 1.0, 2.0)) == 0.25

    def test_quantile_inverse(self):
        assert exp_uniform_quantile(0.25, ExpUniform(0.0, 1.0, 2.0)) == 0.5

    @given(
        p=st.floats(0.01, 1.0),
        lower=st.floats(-5.0, 5.0),
        width=st.floats(0.1, 20.0),
        shape=st.floats(0.5, 8.0),
    )
    def test_round_trip(self, p, lower, width, shape):
        # small shapes push p**(1/shape) below the ulp scale of `lower`, where
        # the x - l cancellation makes 1e-12 unattainable in float64
        dist = ExpUniform(lower, lower + width, shape)
        x = exp_uniform_quantile(p, dist)
        assert exp_uniform_cdf(x, dist) == pytest.approx(p, abs=1e-12)

    def test_outside_domain(self):
        dist = ExpUniform(0.0, 1.0, 2.0)
        with pytest.raises(DomainError):
            exp_uniform_cdf(1.5, dist)
        assert exp_uniform_cdf(1.5, dist, clamp=True) == 1.0

    def test_moments_uniform(self):
        mean, var = exp_uniform_moments(ExpUniform(0.0, 10.0, 1.0))
        assert mean == 5.0
        assert var == pytest.approx(100.0 / 12.0, rel=1e-15)

    def test_moments_shape_three(self):
        mean, var = exp_uniform_moments(ExpUniform(0.0, 4.0, 3.0))
        assert mean == pytest.approx(3.0, abs=1e-15)

    def test_moments_monte_carlo(self):
        dist = ExpUniform(0.0, 4.0, 3.0)
        rng = np.random.default_rng(7)
        draws = np.array([exp_uniform_quantile(p, dist) for p in rng.random(10**6)])
        mean, var = exp_uniform_moments(dist)
        se_mean = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - mean) <= 3 * se_mean
        centered = draws - draws.mean()
        se_var = math.sqrt((np.mean(centered**4) - var**2) / draws.size)
        assert abs(draws.var(ddof=1) - var) <= 3 * se_var

    def test_degenerate_limit(self):
        mean, var = exp_uniform_moments(ExpUniform(0.0, 10.0, 1e6))
        assert abs(mean - 10.0) < 1e-4
        assert var < 1e-4


class TestEUnitVariance:
    def test_midpoint_uniform(self):
        assert eunit_variance(5.0, 0.0, 10.0) == pytest.approx(100.0 / 12.0, rel=1e-15)

    def test_frozen_value(self):
        assert eunit_variance(2.0, 0.0, 10.0) == pytest.approx(64.0 / 9.0, rel=1e-14)

    def test_boundary_degeneracy(self):
        for g in (1e-6 * 10.0, 10.0 - 1e-6 * 10.0):
            assert eunit_variance(g, 0.0, 10.0) < 1e-4 * 100.0

    def test_at_bounds_rejected(self):
        with pytest.raises(DomainError):
            eunit_variance(0.0, 0.0, 10.0)
        with pytest.raises(DomainError):
            eunit_variance(10.0, 0.0, 10.0)

    @given(
        lower=st.floats(0.0, 5.0),
        width=st.floats(0.5, 30.0),
        frac=st.floats(1e-6, 1.0 - 1e-6),
    )
    def test_matches_distribution_moments(self, lower, width, frac):
        upper = lower + width
        g = lower + frac * width
        if not lower < g < upper:
            return
        shape = (g - lower) / (upper - g)
        _, var = exp_uniform_moments(ExpUniform(lower, upper, shape))
        assert eunit_variance(g, lower, upper) == pytest.approx(var, rel=1e-12)

    def test_monte_carlo(self):
        lower, upper, g = 0.0, 10.0, 2.0
        dist = ExpUniform(lower, upper, (g - lower) / (upper - g))
        rng = np.random.default_rng(11)
        draws = np.array([exp_uniform_quantile(p, dist) for p in rng.random(10**6)])
        var = eunit_variance(g, lower, upper)
        centered = draws - draws.mean()
        se = math.sqrt((np.mean(centered**4) - var**2) / draws.size)
        assert abs(draws.var(ddof=1) - var) <= 3 * se


class TestSensitivity:
    def test_eunit_zero_at_midpoint(self):
        assert sensitivity(5.0, EUnitParams(0.0, 10.0)) == 0.0

    def test_eunit_signs_at_bounds(self):
        params = EUnitParams(0.0, 10.0)
        assert sensitivity(1e-9 * 10.0, params) > 20.0
        assert sensitivity(10.0 - 1e-9 * 10.0, params) < -20.0

    def test_eunit_sign_change_across_midpoint(self):
        params = EUnitParams(0.0, 10.0)
        assert sensitivity(4.0, params) > 0 > sensitivity(6.0, params)

    def test_mnl_linear(self):
        assert sensitivity(3.0, MNLParams(2.0)) == -6.0

    def test_mnw_log(self):
        assert sensitivity(math.e, MNWParams(2.0)) == pytest.approx(-2.0, rel=1e-15)
        with pytest.raises(DomainError):
            sensitivity(0.0, MNWParams(2.0))


class TestDistributionalLink:
    def test_log_uniform_is_exponential(self):
        u = np.random.default_rng(0).random(20000)
        result = stats.kstest(-np.log(u), "expon")
        assert result.pvalue > 0.01


@settings(max_examples=50, deadline=None)
@given(
    times=st.lists(st.floats(1.5, 9.5), min_size=1, max_size=6),
)
def test_all_kernels_produce_valid_probabilities(times):
    for pv in (
        mnl_prob(times, 0.7),
        mnw_prob(times, 2.0),
        bc_prob(times, 1.0, 30.0),
        eunit_prob(times, 1.0, 10.0),
    ):
        assert_prob_vector(pv)
