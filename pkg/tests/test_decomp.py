"""Tests for the self-decomposable covert input law."""

import math

import numpy as np
import pytest
from scipy import stats

from covertgg import decomp, ggdist
from covertgg.errors import DecompositionError, ParameterError, UnsupportedShapeError
from covertgg.ggdist import GGParams


@pytest.fixture(scope="module")
def half_spec():
    return decomp.decompose(GGParams(0.5, 1.0), 1.5)


class TestCharacteristicFunction:
    def test_closed_forms(self):
        t = np.linspace(0, 30, 61)
        np.testing.assert_allclose(decomp.cf_gg(GGParams(2.0, 1.3), t), np.exp(-0.5 * (1.3 * t) ** 2), atol=1e-15)
        # N_1(0, a) is Laplace with scale 2a
        np.testing.assert_allclose(decomp.cf_gg(GGParams(1.0, 0.7), t), 1 / (1 + (1.4 * t) ** 2), rtol=1e-14)

    @pytest.mark.parametrize("p", [1.0, 0.7, 0.5, 0.3])
    def test_series_and_quadrature_agree(self, p):
        t = np.array([0.0, 0.3, 2.0, 7.5, 40.0, 300.0])
        auto = decomp.cf_gg(GGParams(p), t)
        quad = decomp.cf_gg(GGParams(p), t, method="quad")
        np.testing.assert_allclose(auto, quad, rtol=1e-8, atol=1e-13)
        assert auto[0] == pytest.approx(1.0)

    @pytest.mark.parametrize("p", [0.5, 1.0, 2.0])
    def test_matches_empirical_cf(self, p):
        z = ggdist.sample(GGParams(p), 200000, seed=1).values
        for t in (0.3, 1.0, 2.0):
            assert decomp.cf_gg(GGParams(p), t) == pytest.approx(np.cos(t * z).mean(), abs=5e-3)


class TestDecompose:
    def test_beta_one_is_point_mass(self):
        spec = decomp.decompose(GGParams(0.7), 1.0)
        assert spec.atom_at_zero == 1.0
        assert np.all(decomp.sample_input(spec, 100, seed=0).values == 0.0)

    @pytest.mark.parametrize("p, kind", [(2.0, decomp.CLOSED_FORM_GAUSSIAN), (1.0, decomp.CLOSED_FORM_LAPLACE),
                                         (0.6, decomp.TABULATED)])
    def test_representation(self, p, kind):
        assert decomp.decompose(GGParams(p), 1.2).representation == kind

    def test_laplace_atom(self):
        assert decomp.decompose(GGParams(1.0, 3.0), 2.0).atom_at_zero == pytest.approx(0.25)

    @pytest.mark.parametrize("p, beta", [(0.5, 2.0), (0.7, 1.1), (0.3, 1.5)])
    def test_atom_limit(self, p, beta):
        spec = decomp.decompose(GGParams(p), beta)
        assert spec.atom_at_zero == pytest.approx(beta ** -(1 + p), rel=1e-12)

    @pytest.mark.parametrize("p, beta", [(1.5, 1.2), (3.0, 1.2), (0.2, 1.2)])
    def test_rejects_unsupported_shapes(self, p, beta):
        with pytest.raises(UnsupportedShapeError):
            decomp.decompose(GGParams(p), beta)

    def test_rejects_beta_below_one(self):
        with pytest.raises(ParameterError):
            decomp.decompose(GGParams(1.0), 0.9)

    def test_tabulated_invariants(self, half_spec):
        assert half_spec.atom_at_zero + half_spec.weights.sum() * half_spec.grid_step == pytest.approx(1.0, abs=1e-12)
        assert np.all(half_spec.weights >= 0)
        assert half_spec.clipped_mass <= 1e-6
        cdf = half_spec.continuous_cdf()
        assert np.all(np.diff(cdf) >= 0)
        assert not half_spec.weights.flags.writeable

    def test_symmetric(self, half_spec):
        edges = np.linspace(-40, 40, 801)
        masses = decomp.continuous_cell_masses(half_spec, edges)
        np.testing.assert_allclose(masses, masses[::-1], atol=1e-9)

    def test_sum_matches_output_law(self, half_spec):
        rng = np.random.default_rng(3)
        y = decomp.draw_input(half_spec, rng, 100000) + ggdist.draw(half_spec.noise, rng, 100000)
        target = GGParams(0.5, half_spec.gamma)
        assert stats.kstest(y, lambda v: ggdist.cdf(target, v)).pvalue > 1e-3

    def test_p_moment_of_output(self, half_spec):
        rng = np.random.default_rng(8)
        y = decomp.draw_input(half_spec, rng, 10**6) + ggdist.draw(half_spec.noise, rng, 10**6)
        m = np.abs(y) ** 0.5
        expected = ggdist.abs_moment_p(GGParams(0.5, half_spec.gamma))
        assert abs(m.mean() - expected) <= 5 * m.std(ddof=1) / math.sqrt(len(m))

    def test_convolution_l1(self, half_spec):
        assert decomp.convolution_l1(half_spec) <= 1e-3

    def test_fft_branch_matches_laplace_closed_form(self):
        noise = GGParams(1.0)
        closed = decomp.decompose(noise, 1.4)
        table = decomp.decompose(noise, 1.4, force_tabulated=True)
        edges = np.linspace(-60, 60, 4001)
        l1 = np.abs(decomp.continuous_cell_masses(closed, edges) - decomp.continuous_cell_masses(table, edges)).sum()
        assert l1 + abs(closed.atom_at_zero - table.atom_at_zero) <= 1e-3

    def test_gaussian_variance(self):
        spec = decomp.decompose(GGParams(2.0, 2.0), 1.5)
        x = decomp.sample_input(spec, 200000, seed=5).values
        assert x.var() == pytest.approx(4.0 * (1.5**2 - 1), rel=0.02)


class TestSerialization:
    def test_roundtrip(self, half_spec):
        back = decomp.DecompositionSpec.from_json(half_spec.to_json())
        assert back.representation == half_spec.representation
        assert back.atom_at_zero == half_spec.atom_at_zero
        assert np.array_equal(back.weights, half_spec.weights)
        rng_a, rng_b = np.random.default_rng(1), np.random.default_rng(1)
        assert np.array_equal(decomp.draw_input(back, rng_a, 50), decomp.draw_input(half_spec, rng_b, 50))

    def test_closed_form_roundtrip(self):
        spec = decomp.decompose(GGParams(1.0, 2.0), 1.3)
        assert decomp.DecompositionSpec.from_json(spec.to_json()).atom_at_zero == spec.atom_at_zero

    @pytest.mark.parametrize("doc", [{"p": 1, "alpha": 1}, {"p": 1, "alpha": 1, "beta": 2, "representation": "magic",
                                                            "atom_at_zero": 0.2}])
    def test_rejects_bad_documents(self, doc):
        with pytest.raises(ParameterError):
            decomp.spec_from_dict(doc)


def test_error_types_are_distinct():
    assert issubclass(DecompositionError, ArithmeticError)
    assert issubclass(UnsupportedShapeError, ParameterError)
