"""Tests for the Monte Carlo coding, information-density and warden engine."""

import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from covertgg import colored, simkit
from covertgg.budget import BudgetSpec
from covertgg.errors import ParameterError, UnsupportedShapeError
from covertgg.ggdist import GGParams

INFO_DENSITY_EXAMPLE = 0.1986159649  # ln 1.1 + 0.25 / 2.42
# mpmath, 40 digits
VB_P1_G101 = 0.0396039603960396
VB_P05_G11 = 4.670993664969138
VB_P1_A2_G22 = 0.3636363636363636
WARDEN_P1_G101_N1000 = 0.8749963418373154


def experiment(p=1.0, delta=1.0, n=200, m=4, trials=300, seed=1, **kw):
    return simkit.CodingExperiment(BudgetSpec(GGParams(p), delta, n), m, trials, seed, **kw)


class TestInfoDensity:
    def test_single_symbol_example(self):
        value = simkit.info_density([0.5], [0.5], GGParams(2.0), 1.1)
        assert value == pytest.approx(INFO_DENSITY_EXAMPLE, rel=1e-9)

    @given(st.floats(0.3, 4), st.floats(0.2, 3), st.lists(st.floats(-20, 20), min_size=1, max_size=30))
    def test_zero_without_signal(self, p, alpha, z):
        assert simkit.info_density(np.zeros(len(z)), z, GGParams(p, alpha), alpha) == pytest.approx(0.0, abs=1e-12)

    def test_validation(self):
        with pytest.raises(ParameterError):
            simkit.info_density([0.0, 1.0], [0.0], GGParams(1.0), 1.1)
        with pytest.raises(ParameterError):
            simkit.info_density([0.0], [0.0], GGParams(1.0), 0.9)

    @pytest.mark.parametrize("p", [0.5, 1.0, 2.0])
    def test_mean_is_log_scale_ratio(self, p):
        gamma = 1.08
        terms = simkit.information_density_sample(GGParams(p), gamma, 200000, seed=2)
        se = terms.std(ddof=1) / math.sqrt(len(terms))
        assert abs(terms.mean() - math.log(gamma)) <= 5 * se

    def test_sample_independent_of_workers(self):
        a = simkit.information_density_sample(GGParams(1.0), 1.05, 150000, seed=3)
        b = simkit.information_density_sample(GGParams(1.0), 1.05, 150000, seed=3, workers=3)
        assert np.array_equal(a, b)


class TestCodingTrials:
    def test_single_message_always_decoded(self):
        exp = experiment(m=1, trials=20)
        assert all(simkit.run_coding_trial(exp, i).decoded_ok for i in range(20))

    def test_validation(self):
        with pytest.raises(ParameterError):
            experiment(m=0)
        with pytest.raises(ParameterError):
            experiment(trials=0)
        with pytest.raises(ParameterError):
            experiment(threshold_gamma=-1.0)
        with pytest.raises(ParameterError):
            experiment(decoder="guess")
        with pytest.raises(UnsupportedShapeError):
            experiment(p=1.5)

    def test_default_slack(self):
        exp = experiment(n=256)
        assert exp.slack == pytest.approx(256 ** 0.25)
        assert exp.threshold() == pytest.approx(math.log(4) + 4.0)

    def test_feasible_two_message_code(self):
        exp = experiment(p=2.0, delta=1.0, n=400, m=2, trials=2000, seed=5)
        res = simkit.run_experiment(exp, workers=4)
        assert res.error_rate < 0.05

    def test_rate_above_mutual_information_fails(self):
        exp = experiment(p=2.0, delta=0.01, n=16, trials=2000, seed=6)
        dens = simkit.block_information_density(exp)
        log_m = exp.n * math.log(exp.gamma_n) + 3 * math.sqrt(dens.var(ddof=1))
        m = math.ceil(math.exp(log_m))
        assert m <= simkit.M_MAX_CODEBOOK
        assert simkit.run_experiment(exp.with_messages(m)).error_rate > 0.5

    def test_codes_are_nested(self):
        # a trial that decodes with M messages decodes with any smaller M
        exp = experiment(n=100, trials=150)
        ok = {m: [simkit.run_coding_trial(exp.with_messages(m), i).decoded_ok for i in range(exp.trials)]
              for m in (2, 8, 64, 512)}
        for small, big in [(2, 8), (8, 64), (64, 512)]:
            assert all(a or not b for a, b in zip(ok[small], ok[big]))

    def test_ml_never_worse_than_threshold(self):
        exp = experiment(n=100, m=16, trials=200)
        thr = simkit.run_experiment(exp).error_rate
        ml = simkit.run_experiment(dataclasses.replace(exp, decoder=simkit.ML)).error_rate
        assert ml <= thr

    def test_transmitted_density_shared(self):
        exp = experiment(n=64, trials=40)
        dens = simkit.block_information_density(exp)
        sent = [simkit.run_coding_trial(exp, i).info_density_sent for i in range(exp.trials)]
        assert np.array_equal(dens, sent)

    def test_result_fields(self):
        res = simkit.run_experiment(experiment(p=0.5, n=100, trials=100))
        assert 0.0 <= res.error_ci[0] <= res.error_rate <= res.error_ci[1] <= 1.0
        assert res.info_density_var >= 0
        assert res.variance_bound is not None
        assert res.theory_mean == pytest.approx(math.log(experiment(p=0.5, n=100).gamma_n))

    def test_deterministic_across_workers(self):
        exp = experiment(p=0.5, n=100, m=8, trials=300)
        one = simkit.run_experiment(exp, workers=1).to_json()
        many = simkit.run_experiment(exp, workers=4).to_json()
        assert one == many
        assert json.loads(one)["trials"] == 300


class TestRateEstimation:
    def test_feinstein_bounds_codebook(self):
        exp = experiment(n=200, trials=1000, seed=9)
        dens = simkit.block_information_density(exp)
        for m in (2, 16, 128):
            bound, _ = simkit.feinstein_error(dens, math.log(m), exp.slack)
            actual = simkit.run_experiment(exp.with_messages(m), workers=4)
            assert actual.error_ci[0] <= bound

    def test_feinstein_monotone_in_m(self):
        exp = experiment(n=400, trials=500)
        est = simkit.estimate_rate(exp, 0.05)
        eps = [pt.eps_hat for pt in est.points]
        assert all(a <= b for a, b in zip(eps, eps[1:]))
        assert est.k_hat_ci[0] <= est.k_hat_norm <= est.k_hat_ci[1]
        assert est.k_hat_norm <= simkit.rate_cap_normalized(exp.budget)

    def test_codebook_sweep(self):
        exp = experiment(n=200, trials=200, seed=4)
        est = simkit.estimate_rate(exp, 0.2, method="codebook", grid=[2, 4, 8, 16, 32, 64])
        assert est.positive
        eps = [pt.eps_hat for pt in est.points]
        assert all(a <= b for a, b in zip(eps, eps[1:]))
        assert est.eps_hat <= 0.2

    def test_vanishing_budget_has_no_rate(self):
        est = simkit.estimate_rate(experiment(delta=1e-12, n=100, trials=200), 0.05)
        assert est.k_hat == 0.0 and not est.positive
        assert math.isnan(est.eps_hat)

    def test_bad_arguments(self):
        exp = experiment(trials=20)
        with pytest.raises(ParameterError):
            simkit.estimate_rate(exp, 1.5)
        with pytest.raises(ParameterError):
            simkit.estimate_rate(exp, 0.1, method="oracle")
        with pytest.raises(ParameterError):
            simkit.estimate_rate(exp, 0.1, method="codebook", grid=[2, 8192])

    def test_csv_row(self):
        exp = experiment(n=100, trials=100)
        row = simkit.csv_row(simkit.estimate_rate(exp, 0.1), exp.noise, 0.97)
        assert tuple(row) == simkit.CSV_COLUMNS
        assert row["warden_sum"] == 0.97


class TestVariance:
    def test_frozen_bounds(self):
        assert simkit.variance_bound(GGParams(1.0), 1.01) == pytest.approx(VB_P1_G101, rel=1e-12)
        assert simkit.variance_bound(GGParams(0.5), 1.1) == pytest.approx(VB_P05_G11, rel=1e-12)
        assert simkit.variance_bound(GGParams(1.0, 2.0), 2.2) == pytest.approx(VB_P1_A2_G22, rel=1e-12)

    @given(st.floats(0.2, 1.0), st.floats(1.0001, 3.0))
    def test_printed_form_agrees_at_unit_alpha(self, p, ratio):
        noise = GGParams(p)
        assert simkit.variance_bound(noise, ratio, as_printed=True) == pytest.approx(simkit.variance_bound(noise, ratio))

    @pytest.mark.parametrize("p", [0.3, 0.5, 1.0])
    def test_bound_shrinks_toward_zero(self, p):
        values = [simkit.variance_bound(GGParams(p), r) for r in (1.1, 1.01, 1.001, 1.0)]
        assert all(a > b for a, b in zip(values, values[1:-1]))
        assert values[-1] == 0.0

    def test_degenerate_case(self):
        check = simkit.variance_check(GGParams(0.5), 1.0, 1000, seed=1)
        assert check.empirical_var == 0.0 and check.bound == 0.0

    def test_empirical_below_bound(self):
        check = simkit.variance_check(GGParams(1.0), 1.01, 200000, seed=2)
        # standard error of a sample variance, from the fourth moment
        terms = simkit.information_density_sample(GGParams(1.0), 1.01, 200000, seed=2)
        m4 = ((terms - terms.mean()) ** 4).mean()
        se = math.sqrt(max(m4 - check.empirical_var**2, 0.0) / len(terms))
        assert check.empirical_var <= check.bound + 5 * se

    def test_rejects_p_above_one(self):
        with pytest.raises(UnsupportedShapeError):
            simkit.variance_bound(GGParams(2.0), 1.1)


class TestWarden:
    def test_blind_guessing(self):
        res = simkit.warden_test(GGParams(1.0), 1.0, 50, 200, seed=1)
        assert res.sum_errors == 1.0 and res.exact_sum == 1.0
        assert res.p_false_alarm == 0.0

    def test_exact_oracle(self):
        assert simkit.warden_exact(GGParams(1.0), 1.01, 1000) == pytest.approx(WARDEN_P1_G101_N1000, rel=1e-10)

    @pytest.mark.parametrize("p", [0.5, 1.0, 2.0])
    def test_simulation_matches_exact(self, p):
        res = simkit.warden_test(GGParams(p), 1.02, 500, 3000, seed=7, workers=4)
        assert res.ci[0] <= res.exact_sum <= res.ci[1]

    def test_pinsker(self):
        noise = GGParams(1.0)
        spec = BudgetSpec(noise, 0.5, 1000)
        from covertgg.budget import gamma_achievable

        b = gamma_achievable(spec)
        res = simkit.warden_test(noise, b.gamma_n, spec.n, 2000, seed=3)
        assert res.ci[1] >= simkit.pinsker_floor(b.total_kl)
        assert res.exact_sum >= simkit.pinsker_floor(b.total_kl)


class TestIntervals:
    @given(st.integers(0, 500), st.integers(1, 500))
    def test_interval_contains_estimate(self, k, extra):
        n = k + extra
        lo, hi = simkit.proportion_interval(k, n)
        assert 0.0 <= lo <= k / n <= hi <= 1.0

    def test_wilson_at_zero(self):
        lo, hi = simkit.wilson_interval(0, 100)
        assert lo == 0.0 and 0.03 < hi < 0.04


class TestColoredEquivalence:
    def test_coupled_decisions_identical(self):
        transport = colored.whiten(colored.ar1_model(32, 0.8, mu=np.linspace(0, 1, 32)))
        exp = experiment(p=2.0, delta=0.5, n=32, m=4, trials=300, seed=12)
        outcomes = simkit.run_coupled(exp, transport)
        assert all(o.white_decision == o.colored_decision for o in outcomes)
        decided = sum(o.white_decision is not None for o in outcomes)
        assert 0 < decided < len(outcomes)

    def test_requires_unit_gaussian(self):
        transport = colored.whiten(colored.ar1_model(32, 0.8))
        with pytest.raises(ParameterError):
            simkit.run_coupled_trial(experiment(p=1.0, n=32), transport, 0)
