"""Tests for the covertness budget formulas."""

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from covertgg import budget
from covertgg.budget import BudgetSpec
from covertgg.errors import ParameterError
from covertgg.ggdist import GGParams, kl_gg

CONVERSE_P1_GAP = 1.414880307592368e-3  # mpmath root of x' - ln(1 + x') = 1e-6, as gamma/alpha - 1


def test_worked_example_p1():
    res = budget.gamma_achievable(BudgetSpec(GGParams(1.0), 0.01, 10**4))
    assert res.gamma_n == pytest.approx(1.0014142, abs=5e-8)
    assert res.total_kl <= 0.01
    assert res.total_kl == pytest.approx(0.0099906, abs=1e-7)


def test_worked_example_p2():
    res = budget.gamma_achievable(BudgetSpec(GGParams(2.0), 0.01, 10**4))
    assert res.gamma_n == pytest.approx(1.0009995, abs=5e-8)


def test_converse_worked_example():
    gamma = budget.gamma_converse_max(BudgetSpec(GGParams(1.0), 0.01, 10**4))
    assert gamma - 1.0 == pytest.approx(CONVERSE_P1_GAP, rel=1e-9)


@pytest.mark.parametrize("delta, n", [(0, 10), (-1, 10), (math.nan, 10), (0.1, 0), (0.1, 2.5), (0.1, 10**10)])
def test_spec_validation(delta, n):
    with pytest.raises(ParameterError):
        BudgetSpec(GGParams(1.0), delta, n)


@given(st.floats(0.05, 20), st.floats(0.1, 5), st.floats(1e-4, 10), st.integers(1, 10**9))
def test_budget_met_and_sandwiched(p, alpha, delta, n):
    spec = BudgetSpec(GGParams(p, alpha), delta, n)
    res = budget.gamma_achievable(spec)
    assert res.gamma_n >= alpha
    assert n * kl_gg(res.gamma_n, spec.noise) <= delta * (1 + 1e-9)
    gmax = budget.gamma_converse_max(spec)
    assert gmax >= res.gamma_n * (1 - 1e-12)
    # the converse scale spends the whole budget
    assert n * kl_gg(gmax, spec.noise) == pytest.approx(delta, rel=1e-8)


@given(st.floats(0.05, 20), st.floats(1e-3, 1.0))
def test_gamma_decreases_with_n(p, delta):
    noise = GGParams(p)
    gammas = [budget.gamma_achievable(BudgetSpec(noise, delta, n)).gamma_n for n in (10, 100, 1000, 10**4)]
    assert all(a > b for a, b in zip(gammas, gammas[1:]))


@pytest.mark.parametrize("p", [0.5, 1.0, 2.0])
def test_trend_approaches_L(p):
    trend = budget.normalized_rate_trend(GGParams(p), 0.1, [10**2, 10**4, 10**6, 10**8])
    L, status = budget.L_theoretical(GGParams(p))
    assert status == budget.EXACT
    assert all(a < b for a, b in zip(trend, trend[1:]))
    assert abs(trend[-1] - L) / L < 1e-3


def test_L_status():
    assert budget.L_theoretical(GGParams(3.0)) == pytest.approx((math.sqrt(2 / 3), budget.UPPER_BOUND))
    assert budget.L_theoretical(GGParams(1.5))[1] == budget.UPPER_BOUND
    assert budget.L_theoretical(GGParams(0.3))[1] == budget.EXACT
    assert budget.L_theoretical(GGParams(2.0), budget.GAUSSIAN_MEMORY) == (1.0, budget.EXACT)
    with pytest.raises(ParameterError):
        budget.L_theoretical(GGParams(2.0), "other")


def test_trend_rejects_unproven_shapes():
    with pytest.raises(ParameterError):
        budget.normalized_rate_trend(GGParams(1.5), 0.1, [100])


def test_rate_cap():
    noise = GGParams(1.0, 2.0)
    assert budget.rate_cap(2.2, noise) == pytest.approx(math.log(1.1))
    assert budget.rate_cap(2.2, noise, linear=True) == pytest.approx(0.1)
    assert budget.rate_cap(2.0, noise) == 0.0
    with pytest.raises(ParameterError):
        budget.rate_cap(1.9, noise)


def test_huge_n_formula_only():
    spec = BudgetSpec(GGParams(1.0), 0.01, 10**9)
    res = budget.gamma_achievable(spec)
    assert res.total_kl == pytest.approx(0.01, rel=1e-3)
    assert budget.block_divergence(res.gamma_n, spec) == pytest.approx(res.total_kl, rel=1e-9)
