import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from monret import analysis as a
from monret import distributions as d
from monret import superoperator as so
from monret import trajectory as tr
from monret import two_level_oracle as o
from monret.errors import ConfigError, ResonanceError

from conftest import FAMILIES

OMEGA_64 = np.linspace(0.05, 2 * np.pi - 0.05, 64)


def params(dist, J=1.0):
    return o.TwoLevelParams(J, dist)


class TestParams:
    @pytest.mark.parametrize("J", [0.0, -1.0, np.inf, np.nan])
    def test_invalid(self, J):
        with pytest.raises(ConfigError):
            o.TwoLevelParams(J, d.Exponential(1.0))

    def test_constants(self):
        p = params(d.Exponential(1.0))
        assert p.y == pytest.approx(1 / (1 - 2j), abs=1e-15)
        assert p.C == pytest.approx(0.2, abs=1e-15)
        np.testing.assert_allclose(p.model.energies, [-1, 1])
        np.testing.assert_allclose(p.model.weights, [0.5, 0.5])

    def test_exponential_c(self):
        # <cos 2 J tau> for rate r is r^2 / (r^2 + 4 J^2)
        for rate, J in [(1.0, 1.0), (2.0, 0.3), (0.5, 3.0)]:
            assert o.TwoLevelParams(J, d.Exponential(rate)).C == pytest.approx(
                rate ** 2 / (rate ** 2 + 4 * J ** 2), rel=1e-14)


class TestAmplitudes:
    def test_quarter_periods(self):
        np.testing.assert_allclose(o.phi_k_closed(params(d.Fixed(1)), [np.pi / 2] * 2), [0, -1],
                                   atol=1e-15)

    def test_immediate_detection_limit(self):
        assert abs(o.phi_k_closed(params(d.Fixed(1)), [1e-9, 1.0])[0] - 1) < 1e-15

    def test_matches_engine(self):
        rng = np.random.default_rng(12)
        p = params(d.Exponential(1.0), J=0.8)
        for _ in range(20):
            taus = rng.exponential(size=12)
            np.testing.assert_allclose(o.phi_k_closed(p, taus),
                                       tr.amplitudes_for(p.model, taus).amplitudes, atol=1e-12)

    def test_survival(self):
        p = params(d.Fixed(1))
        assert o.survival_closed(p, [np.pi / 2, np.pi / 2]) == pytest.approx(0, abs=1e-30)
        assert o.survival_closed(p, [np.pi / 2, 0.4, 1.0]) == pytest.approx(
            np.cos(0.4) ** 2 * np.cos(1.0) ** 2, rel=1e-14)

    @given(st.lists(st.floats(0.01, 5.0), min_size=1, max_size=15), st.floats(0.1, 3.0))
    def test_survival_partial_sum(self, taus, J):
        p = params(d.Fixed(1), J)
        phi = o.phi_k_closed(p, taus)
        assert abs(o.survival_closed(p, taus) - (1 - np.sum(np.abs(phi) ** 2))) < 1e-12
        assert abs(o.survival_closed(p, taus) - tr.amplitudes_for(p.model, taus).survival[-1]) < 1e-12

    def test_bad_taus(self):
        with pytest.raises(ValueError):
            o.phi_k_closed(params(d.Fixed(1)), [])
        with pytest.raises(ValueError):
            o.survival_closed(params(d.Fixed(1)), [0.0])


class TestGeneratingFunctions:
    def test_normalized_with_mean_two(self, family):
        p = params(family)
        assert abs(o.closed_F(p, 0.0) - 1) < 1e-14
        h = 1e-4
        deriv = (o.closed_F(p, h) - o.closed_F(p, -h)) / (2 * h)
        assert abs(-1j * deriv - 2) < 1e-7

    def test_fluctuations_exponential(self):
        p = params(d.Exponential(1.0))
        h = 1e-4
        second = -(o.closed_F(p, h) - 2 * o.closed_F(p, 0) + o.closed_F(p, -h)) / h ** 2
        assert abs(second - 7) < 1e-5

    def test_fluctuations_stroboscopic(self):
        p = params(d.Fixed(np.pi / 2))
        h = 1e-4
        second = -(o.closed_F(p, h) - 2 * o.closed_F(p, 0) + o.closed_F(p, -h)) / h ** 2
        assert abs(second - 4) < 1e-5

    def test_matches_engine_at_64_points(self, family):
        p = params(family, J=0.9)
        for w in OMEGA_64:
            assert abs(o.closed_F(p, w) - a.generating_F(p.model, family, w)) < 1e-10
            assert abs(o.closed_F_tau(p, w) - a.generating_F_tau(p.model, family, w)) < 1e-10

    def test_resonance(self):
        p = params(d.Fixed(np.pi))
        with pytest.raises(ResonanceError):
            o.closed_F(p, 0.0)
        with pytest.raises(ResonanceError):
            o.closed_F_tau(p, 0.0)


class TestMoments:
    def test_examples(self):
        assert o.closed_moments(params(d.Exponential(1.0)), 2) == pytest.approx({1: 2, 2: 7})
        assert o.closed_moments(params(d.Exponential(1.0)), 2, "t") == pytest.approx({1: 2, 2: 9})
        assert o.closed_moments(params(d.Fixed(np.pi / 2)), 3) == pytest.approx({1: 2, 2: 4, 3: 8})

    def test_match_engine(self, family):
        p = params(family, J=0.7)
        for var in ("k", "t"):
            closed = o.closed_moments(p, 3, var)
            for m in (1, 2, 3):
                exact = a.moment_resolvent(p.model, family, m, var)
                assert abs(closed[m] - exact) < 1e-9 * exact

    def test_second_moment_formula(self, family):
        p = params(family, J=0.7)
        assert o.closed_moments(p, 2)[2] == pytest.approx(o.second_moment(p.C), rel=1e-12)

    def test_report(self):
        rep = o.closed_form_report(o.exponential_params(1.0), 3)
        exact = a.exact_report(rep_model := o.exponential_params(1.0).model, d.Exponential(1.0), 3)
        assert rep.method == "closed_form_2ls" and rep_model.n == rep.n
        for m in (1, 2, 3):
            assert rep.moments_k[m] == pytest.approx(exact.moments_k[m], rel=1e-10)
            assert rep.moments_t[m] == pytest.approx(exact.moments_t[m], rel=1e-10)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            o.closed_moments(params(d.Exponential(1.0)), 0)
        with pytest.raises(ValueError):
            o.closed_moments(params(d.Exponential(1.0)), 2, "x")


class TestFluctuationCurves:
    def test_random_curve(self):
        assert o.random_curve(1.0) == 7
        assert o.random_curve(1e4) == pytest.approx(6, abs=1e-7)
        rows = o.fluctuation_curves([1.0, 1e4], 1.0)
        assert rows[0][1] == pytest.approx(7, abs=1e-12)
        assert rows[1][1] == pytest.approx(6, abs=1e-7)

    def test_stroboscopic_curve(self):
        rows = o.fluctuation_curves([np.pi / 2, np.pi, 0.3], 1.0)
        assert rows[0][2] == pytest.approx(4, abs=1e-12)
        assert rows[1][2] == math.inf
        c = np.cos(0.6)
        assert rows[2][2] == pytest.approx(2 * (3 - c) / (1 - c), rel=1e-12)

    @given(st.floats(0.05, 10.0), st.floats(0.1, 3.0))
    def test_curves_match_engine(self, J, tau):
        _, rand, strob = o.fluctuation_curves([J], tau)[0]
        model = o.two_level(J)
        assert rand == pytest.approx(a.moment_resolvent(model, d.Exponential(1 / tau), 2),
                                     rel=1e-6)
        if math.isfinite(strob) and strob < 1e6:
            assert strob == pytest.approx(a.moment_resolvent(model, d.Fixed(tau), 2), rel=1e-6)

    def test_bad_grid(self):
        with pytest.raises(ValueError):
            o.fluctuation_curves([-1.0], 1.0)
        with pytest.raises(ValueError):
            o.fluctuation_curves([1.0], 0.0)


class TestAveragedPropagator:
    def test_gamma_matches_build(self, family):
        p = params(family, J=1.1)
        np.testing.assert_allclose(so.build(p.model, family).gamma, o.gamma_closed(p), atol=1e-14)

    def test_determinant(self, family):
        p = params(family, J=1.1)
        g = o.gamma_closed(p)
        for z in np.random.default_rng(10).normal(size=10) * 0.8 + 0.3j:
            assert abs(np.linalg.det(np.eye(4) - z * g) - o.det_closed(p, z)) < 1e-12

    def test_eigenvalue_and_radius(self):
        p = o.exponential_params(1.0)
        assert o.eigenvalue_closed(p) == pytest.approx(0.6, abs=1e-15)
        s = so.build(p.model, p.dist)
        assert abs(so.spectral_radius(s) - 0.6) < 1e-12

    def test_eigenvalue_is_cos_squared(self, family):
        p = params(family, J=0.4)
        assert o.eigenvalue_closed(p) == pytest.approx((1 + p.C) / 2, abs=1e-15)
