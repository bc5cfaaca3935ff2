import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import accelstats.fitselect as fitselect
from accelstats.distributions import (
    ExpParams,
    GpdParams,
    NormalParams,
    exp_logpdf,
    gpd_logpdf,
    gpd_sample,
    normal_logpdf,
)
from accelstats.errors import DegeneracyError, DomainError
from accelstats.fitselect import (
    aic,
    bic,
    fit_exponential,
    fit_gpd_mle,
    fit_normal,
    rank_models,
)


class TestInformationCriteria:
    def test_aic_trivial(self):
        assert aic(2, 0.0) == 4.0

    def test_bic_log_n_one_vanishes(self):
        assert bic(1, 3, 5.0) == -10.0

    def test_bic_frozen_value(self):
        # mpmath: 2*ln(100) - 200
        assert bic(100, 2, 100.0) == pytest.approx(-190.78965962802382, rel=1e-14)

    def test_domain_checks(self):
        with pytest.raises(DomainError):
            aic(0, 1.0)
        with pytest.raises(DomainError):
            bic(0, 1, 1.0)

    @settings(max_examples=50, derandomize=True)
    @given(l1=st.floats(-1e6, 1e6), l2=st.floats(-1e6, 1e6), c=st.floats(-1e5, 1e5),
           n=st.integers(1, 10**9))
    def test_differences_invariant_to_common_shift(self, l1, l2, c, n):
        assert aic(2, l1 + c) - aic(1, l2 + c) == pytest.approx(aic(2, l1) - aic(1, l2), abs=1e-6)
        assert bic(n, 2, l1 + c) - bic(n, 1, l2 + c) == pytest.approx(
            bic(n, 2, l1) - bic(n, 1, l2), abs=1e-6)


class TestClosedFormFits:
    def test_normal_two_points(self):
        rep = fit_normal(np.array([-1.0, 1.0]))
        assert rep.theta == {"mu": 0.0, "sigma": 1.0}
        assert rep.r == 2 and rep.n == 2

    def test_exponential_constant(self):
        rep = fit_exponential(np.array([2.0, 2.0, 2.0]))
        assert rep.theta == {"mu": 2.0}
        assert rep.r == 1

    def test_normal_recovery(self):
        x = np.random.default_rng(1).normal(3.0, 2.0, 100_000)
        rep = fit_normal(x)
        assert rep.theta["mu"] == pytest.approx(3.0, abs=0.02)
        assert rep.theta["sigma"] == pytest.approx(2.0, abs=0.02)

    def test_normal_zero_variance(self):
        with pytest.raises(DegeneracyError):
            fit_normal(np.full(10, 3.3))

    def test_exponential_zero_mean(self):
        with pytest.raises(DegeneracyError):
            fit_exponential(np.zeros(5))


class TestGpdMle:
    def test_recovers_lateral_section_parameters(self):
        truth = GpdParams(0.2978, 0.1370)
        rep = fit_gpd_mle(gpd_sample(200_000, truth, seed=11))
        assert rep.theta["k"] == pytest.approx(truth.k, abs=0.02)
        assert rep.theta["sigma"] == pytest.approx(truth.sigma, rel=0.02)

    def test_exponential_data_lands_at_shape_zero(self):
        x = np.random.default_rng(3).exponential(1.0, 100_000)
        rep = fit_gpd_mle(x)
        assert -0.02 <= rep.theta["k"] <= 0.02
        assert 0.97 <= rep.theta["sigma"] <= 1.03

    def test_feasibility_holds_for_every_sample(self):
        x = gpd_sample(5_000, GpdParams(-0.3, 1.0), seed=4)
        rep = fit_gpd_mle(x)
        assert np.all(1.0 + rep.theta["k"] * x / rep.theta["sigma"] > 0)

    def test_two_distinct_values_never_fit_silently(self):
        data = np.array([0.0] * 20 + [1.0] * 20)
        try:
            rep = fit_gpd_mle(data)
        except DegeneracyError:
            return
        assert "boundary" in rep.flags or "fallback_exponential" in rep.flags

    def test_preconditions(self):
        with pytest.raises(DegeneracyError):
            fit_gpd_mle(np.ones(40))
        with pytest.raises(DegeneracyError):
            fit_gpd_mle(np.arange(10.0))
        with pytest.raises(DomainError):
            fit_gpd_mle(np.linspace(-1, 1, 50))

    def test_determinism_bit_identical(self):
        x = gpd_sample(20_000, GpdParams(0.3, 0.136), seed=5)
        r1, r2 = fit_gpd_mle(x), fit_gpd_mle(x)
        assert r1 == r2


@pytest.mark.parametrize("seed", [0, 1])
def test_reported_loglik_matches_reevaluation(seed):
    x = gpd_sample(30_000, GpdParams(0.25, 0.5), seed=seed)
    gpd_rep = fit_gpd_mle(x)
    direct = float(np.sum(gpd_logpdf(x, GpdParams(**gpd_rep.theta))))
    assert gpd_rep.logL == pytest.approx(direct, rel=1e-8)

    norm_rep = fit_normal(x)
    direct = float(np.sum(normal_logpdf(x, NormalParams(**norm_rep.theta))))
    assert norm_rep.logL == pytest.approx(direct, rel=1e-8)

    exp_rep = fit_exponential(x)
    direct = float(np.sum(exp_logpdf(x, ExpParams(**exp_rep.theta))))
    assert exp_rep.logL == pytest.approx(direct, rel=1e-8)


@pytest.mark.parametrize("data", [
    gpd_sample(5_000, GpdParams(0.3, 0.136), seed=7),
    gpd_sample(5_000, GpdParams(-0.1, 1.0), seed=8),
    np.random.default_rng(9).exponential(0.4, 5_000),
])
def test_gpd_never_beaten_by_its_exponential_slice(data):
    assert fit_gpd_mle(data).logL >= fit_exponential(data).logL - 1e-6


class TestRankModels:
    def test_pareto_data_ordering_matches_selection_study(self):
        x = gpd_sample(100_000, GpdParams(0.3, 0.136), seed=5)
        ranking = rank_models(x)
        assert ranking.aic_order == ["gpd", "exponential", "normal"]
        assert ranking.bic_order == ["gpd", "exponential", "normal"]

    def test_exponential_data_prefers_one_parameter_by_bic(self):
        x = np.random.default_rng(6).exponential(1.0, 50_000)
        ranking = rank_models(x)
        assert ranking.bic_order.index("exponential") < ranking.bic_order.index("normal")

    def test_below_minimum_count_is_an_error(self):
        with pytest.raises(DegeneracyError):
            rank_models(np.abs(np.random.default_rng(7).normal(size=10)))

    def test_negative_samples_rejected(self):
        with pytest.raises(DomainError):
            rank_models(np.linspace(-1, 1, 100))

    def test_fit_error_is_carried_and_excluded(self, monkeypatch):
        def broken(_):
            raise DegeneracyError("synthetic failure")

        monkeypatch.setitem(fitselect._FITTERS, "normal", broken)
        x = gpd_sample(1_000, GpdParams(0.2, 1.0), seed=8)
        ranking = rank_models(x)
        assert "normal" in ranking.errors
        assert "normal" not in ranking.aic_order
        assert set(ranking.aic_order) == {"gpd", "exponential"}

    def test_report_json_fields_exact(self):
        x = gpd_sample(2_000, GpdParams(0.2, 1.0), seed=9)
        rep = fit_gpd_mle(x)
        assert list(rep.to_json_dict()) == ["model", "theta", "logL", "r", "n", "aic", "bic"]

    def test_report_invariants(self):
        x = gpd_sample(2_000, GpdParams(0.2, 1.0), seed=10)
        for rep in rank_models(x).reports.values():
            assert rep.aic == pytest.approx(2 * rep.r - 2 * rep.logL, rel=1e-14)
            assert rep.bic == pytest.approx(math.log(rep.n) * rep.r - 2 * rep.logL, rel=1e-14)
