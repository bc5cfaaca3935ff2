import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from accelstats.distributions import (
    ExpParams,
    GpdParams,
    NormalParams,
    exp_pdf,
    gpd_cdf,
    gpd_logpdf,
    gpd_pdf,
    gpd_quantile,
    gpd_sample,
    normal_pdf,
)
from accelstats.errors import DomainError, ParameterError

# Parameter sets from the four fitted acceleration sections.
SECTION_PARAMS = [
    GpdParams(0.2978, 0.1370),
    GpdParams(0.3177, 0.1356),
    GpdParams(-0.0429, 0.5063),
    GpdParams(0.0894, 0.4544),
]


class TestGpdPdf:
    def test_at_origin_is_inverse_scale(self):
        assert gpd_pdf(0.0, GpdParams(0.3, 0.136)) == pytest.approx(1 / 0.136, rel=1e-12)

    def test_exponential_limit_at_mean(self):
        assert gpd_pdf(1.0, GpdParams(0.0, 1.0)) == pytest.approx(np.exp(-1.0), rel=1e-12)

    def test_frozen_high_precision_value(self):
        # mpmath (40 digits): (1/0.4544)*(1 + 0.0894/0.4544)**(-1 - 1/0.0894)
        assert gpd_pdf(1.0, GpdParams(0.0894, 0.4544)) == pytest.approx(
            0.2466423931925795, rel=1e-12)

    def test_outside_support_raises(self):
        with pytest.raises(DomainError):
            gpd_pdf(-0.1, GpdParams(0.3, 1.0))
        with pytest.raises(DomainError):
            gpd_pdf(21.0, GpdParams(-0.05, 1.0))  # support ends at 20

    def test_invalid_params_raise(self):
        with pytest.raises(ParameterError):
            GpdParams(0.3, 0.0)
        with pytest.raises(ParameterError):
            GpdParams(np.nan, 1.0)

    def test_continuity_at_k_zero(self):
        sigma = 0.7
        x = np.linspace(0.0, 5 * sigma, 101)
        limit = np.exp(-x / sigma) / sigma
        for k in (1e-6, -1e-6):
            vals = gpd_pdf(x, GpdParams(k, sigma))
            assert np.max(np.abs(vals - limit) / limit) <= 1e-4

    @pytest.mark.parametrize("p", SECTION_PARAMS)
    def test_integrates_to_one(self, p):
        hi = p.upper if np.isfinite(p.upper) else np.inf
        total, err = integrate.quad(lambda t: gpd_pdf(t, p), 0.0, hi)
        assert total == pytest.approx(1.0, abs=1e-6)


class TestGpdCdf:
    def test_zero_at_origin(self):
        assert gpd_cdf(0.0, GpdParams(0.3, 0.136)) == 0.0

    def test_one_at_upper_endpoint(self):
        p = GpdParams(-0.25, 1.0)
        assert gpd_cdf(p.upper, p) == pytest.approx(1.0, abs=1e-12)

    def test_against_quadrature_oracle(self):
        p = GpdParams(0.2978, 0.1370)
        live, _ = integrate.quad(lambda t: gpd_pdf(t, p), 0.0, 0.2)
        assert gpd_cdf(0.2, p) == pytest.approx(live, rel=1e-9)
        # frozen mpmath quadrature of the same integral
        assert gpd_cdf(0.2, p) == pytest.approx(0.70245168130200127, rel=1e-12)

    def test_monotone(self):
        p = GpdParams(0.0894, 0.4544)
        x = np.linspace(0, 10, 200)
        assert np.all(np.diff(gpd_cdf(x, p)) >= 0)


class TestGpdQuantile:
    def test_zero_prob(self):
        assert gpd_quantile(0.0, GpdParams(0.3, 0.136)) == 0.0

    def test_exponential_mean_quantile(self):
        assert gpd_quantile(1 - np.exp(-1.0), GpdParams(0.0, 1.0)) == pytest.approx(1.0, rel=1e-12)

    def test_frozen_bisection_oracle(self):
        # 200-step mpmath bisection on the CDF
        assert gpd_quantile(0.99, GpdParams(0.3, 0.136)) == pytest.approx(
            1.3514191731758542, rel=1e-12)

    def test_prob_one_rejected(self):
        with pytest.raises(DomainError):
            gpd_quantile(1.0, GpdParams(0.3, 0.136))
        with pytest.raises(DomainError):
            gpd_quantile(-0.01, GpdParams(0.3, 0.136))

    @settings(max_examples=80, derandomize=True)
    @given(k=st.floats(-0.9, 3.0), sigma=st.floats(1e-3, 1e3),
           u=st.floats(1e-9, 1 - 1e-9))
    def test_round_trip_with_cdf(self, k, sigma, u):
        p = GpdParams(k, sigma)
        x = gpd_quantile(u, p)
        assert gpd_quantile(gpd_cdf(x, p), p) == pytest.approx(x, rel=1e-9, abs=1e-300)


class TestGpdSample:
    def test_single_draw_is_quantile_of_first_uniform(self):
        p = GpdParams(0.3, 0.136)
        u = np.random.default_rng(99).random(1)[0]
        assert gpd_sample(1, p, seed=99)[0] == gpd_quantile(u, p)

    def test_seed_determinism_is_byte_level(self):
        p = GpdParams(0.2978, 0.1370)
        a = gpd_sample(10_000, p, seed=5)
        b = gpd_sample(10_000, p, seed=5)
        assert a.tobytes() == b.tobytes()

    def test_bounded_support_for_negative_shape(self):
        p = GpdParams(-0.0429, 0.5063)
        x = gpd_sample(100_000, p, seed=3)
        assert x.max() <= 0.5063 / 0.0429
        assert x.min() >= 0.0

    def test_empirical_tail_quantile(self):
        p = GpdParams(0.3, 0.136)
        x = gpd_sample(10**6, p, seed=11)
        q = np.quantile(x, 0.99)
        assert abs(q - 1.3514191731758542) <= 0.02 * 1.3514191731758542

    def test_count_validated(self):
        with pytest.raises(DomainError):
            gpd_sample(0, GpdParams(0.3, 0.136), seed=1)


class TestOtherDensities:
    def test_normal_mode(self):
        assert normal_pdf(0.0, NormalParams(0.0, 1.0)) == pytest.approx(
            1 / np.sqrt(2 * np.pi), rel=1e-12)

    def test_normal_frozen_value(self):
        # mpmath: exp(-1/8) / (2*sqrt(2*pi))
        assert normal_pdf(1.0, NormalParams(0.0, 2.0)) == pytest.approx(
            0.17603266338214974, rel=1e-12)

    def test_exp_at_origin(self):
        assert exp_pdf(0.0, ExpParams(2.5)) == pytest.approx(1 / 2.5, rel=1e-12)

    def test_exp_negative_x_rejected(self):
        with pytest.raises(DomainError):
            exp_pdf(-1.0, ExpParams(1.0))

    def test_param_validation(self):
        with pytest.raises(ParameterError):
            NormalParams(0.0, -1.0)
        with pytest.raises(ParameterError):
            ExpParams(0.0)

    def test_normal_integrates_to_one(self):
        p = NormalParams(1.3, 0.4)
        total, _ = integrate.quad(lambda t: normal_pdf(t, p), -np.inf, np.inf)
        assert total == pytest.approx(1.0, abs=1e-6)


def test_logpdf_matches_log_of_pdf():
    p = GpdParams(0.2978, 0.1370)
    x = np.linspace(0.0, 3.0, 50)
    assert np.allclose(gpd_logpdf(x, p), np.log(gpd_pdf(x, p)), rtol=1e-12)
