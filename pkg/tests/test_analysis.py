import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from monret import analysis as a
from monret import distributions as d
from monret import spectral as sp
from monret import superoperator as so
from monret import trajectory as tr
from monret import winding
from monret.errors import NumericalHealthError, ResonanceError, TruncationError

from conftest import FAMILIES
from oracles import damped_u

# frozen from the closed-form two-level oracle (series algebra in char_fn
# derivatives), cross-checked against the resolvent jets of the engine
TLS_EXP_T2 = 9.0


class TestGeneratingFunctions:
    def test_normalization(self, rng, family):
        m = sp.random_model(4, rng)
        assert abs(a.generating_F(m, family, 0.0) - 1) < 1e-10
        assert abs(a.generating_F_tau(m, family, 0.0) - 1) < 1e-10

    def test_single_level(self):
        m = sp.from_levels([0.4], [1.0])
        for w in (0.3, 2.0):
            assert abs(a.generating_F(m, d.Exponential(1.0), w) - np.exp(1j * w)) < 1e-14
            assert abs(a.generating_F_tau(m, d.Fixed(0.6), w) - np.exp(0.6j * w)) < 1e-14

    def test_series_definition(self, rng):
        m = sp.random_model(3, rng)
        dist = d.Uniform(0.3, 1.2)
        s = so.build(m, dist)
        probs = so.return_probs(s, 3000)
        for w in (0.5, 2.5):
            series = np.sum(np.exp(1j * w * np.arange(1, 3001)) * probs)
            assert abs(a.generating_F(m, dist, w) - series) < 1e-12

    def test_tau_transform_matches_monte_carlo(self, rng):
        m = sp.random_model(2, rng)
        dist = d.Exponential(1.0)
        batch = tr.sample_first_detections(m, dist, 100_000, seed=4)
        w = 0.7
        samples = np.exp(1j * w * batch.t)
        se = np.sqrt(np.var(samples.real) / samples.size)
        assert abs(samples.real.mean() - a.generating_F_tau(m, dist, w).real) < 4 * se

    def test_fixed_shift_multiple_of_period(self, tls):
        # a common phase exp(2 pi i) is harmless; only a singular solve is resonant
        value = a.generating_F_tau(tls, d.Fixed(0.5), 2 * np.pi / 0.5)
        assert abs(value - 1) < 1e-12

    def test_resonant_parameters(self, tls):
        with pytest.raises(ResonanceError):
            a.generating_F(tls, d.Fixed(np.pi), 0.3)


class TestMeans:
    def test_single_level(self):
        m = sp.from_levels([1.3], [1.0])
        assert a.mean_k(m, d.Gamma(2, 3)) == pytest.approx(1, abs=1e-14)
        assert a.mean_t(m, d.Gamma(2, 3)) == pytest.approx(2 / 3, rel=1e-12)

    def test_two_level_exponential(self, tls):
        assert abs(a.mean_k(tls, d.Exponential(1.0)) - 2) < 1e-8
        assert abs(a.mean_t(tls, d.Exponential(1.0)) - 2) < 1e-8

    def test_seven_levels_uniform(self):
        m = sp.random_model(7, np.random.default_rng(70))
        assert abs(a.mean_k(m, d.Uniform(0.3, 1.1)) - 7) < 1e-8

    def test_fixed_three_levels(self):
        m = sp.from_levels([-1.0, 0.35, 1.2], [0.3, 0.3, 0.4])
        assert abs(a.mean_t(m, d.Fixed(0.7)) - 2.1) < 1e-8

    @given(st.integers(1, 8), st.integers(0, 2 ** 32 - 1), st.sampled_from(sorted(FAMILIES)))
    def test_quantized(self, n, seed, name):
        m = sp.random_model(n, np.random.default_rng(seed))
        dist = FAMILIES[name]
        assert abs(a.mean_k(m, dist) - n) < 1e-8
        assert abs(a.mean_t(m, dist) - dist.mean() * n) < 1e-8 * max(1, dist.mean() * n)

    def test_mean_t_check_trips(self, monkeypatch, tls):
        monkeypatch.setattr(a, "generating_F_tau", lambda *args: 1.0 + 0j)
        with pytest.raises(NumericalHealthError):
            a.mean_t(tls, d.Exponential(1.0))

    def test_richardson(self):
        assert abs(a.richardson_derivative(np.sin, 0.3, 1) - np.cos(0.3)) < 1e-12
        assert abs(a.richardson_derivative(np.exp, 0.0, 2) - 1) < 1e-7
        with pytest.raises(ValueError):
            a.richardson_derivative(np.sin, 0.0, 3)


class TestMoments:
    def test_two_level_exponential(self, tls):
        assert abs(a.moment(tls, d.Exponential(1.0), 2) - 7) < 1e-6

    def test_two_level_stroboscopic(self, tls):
        assert abs(a.moment(tls, d.Fixed(np.pi / 2), 2) - 4) < 1e-8

    def test_single_level_any_order(self):
        m = sp.from_levels([0.0], [1.0])
        for k in (1, 2, 5):
            assert a.moment(m, d.Exponential(1.0), k) == pytest.approx(1, abs=1e-14)

    def test_resonance_never_nan(self, tls):
        with pytest.raises(ResonanceError):
            a.moment(tls, d.Fixed(np.pi), 2)

    def test_near_resonance_is_large_but_finite(self, tls):
        v = a.moment(tls, d.Fixed(np.pi - 0.05), 2, check=False)
        c = np.cos(2 * (np.pi - 0.05))
        assert math.isfinite(v) and abs(v - 2 * (3 - c) / (1 - c)) < 1e-6 * v

    def test_series_matches_resolvent(self, rng, family):
        m = sp.random_model(4, rng)
        for order in (1, 2, 3):
            series = a.moment_series(m, family, order).value
            exact = a.moment_resolvent(m, family, order, "k")
            assert abs(series - exact) < 1e-9 * exact

    def test_time_moments_match_monte_carlo(self, tls):
        dist = d.Exponential(1.0)
        assert abs(a.moment_resolvent(tls, dist, 2, "t") - TLS_EXP_T2) < 1e-10
        batch = tr.sample_first_detections(tls, dist, 100_000, seed=21)
        rep = a.monte_carlo_report(batch)
        assert abs(rep.moments_t[2] - TLS_EXP_T2) < 4 * rep.stderr_t[2]

    def test_tail_bound_is_certified(self, rng):
        m = sp.random_model(3, rng)
        res = a.moment_series(m, d.Gamma(2.0, 1.5), 2, rel_tol=1e-6)
        exact = a.moment_resolvent(m, d.Gamma(2.0, 1.5), 2)
        assert 0 <= exact - res.value <= res.tail_bound + 1e-12 * exact

    def test_term_cap(self, rng):
        m = sp.random_model(3, rng)
        with pytest.raises(TruncationError):
            a.moment_series(m, d.Exponential(1.0), 2, max_terms=3)

    def test_bad_order(self, tls):
        with pytest.raises(ValueError):
            a.moment(tls, d.Exponential(1.0), 0)
        with pytest.raises(ValueError):
            a.moment_resolvent(tls, d.Exponential(1.0), 2, "x")

    @given(st.integers(1, 5), st.integers(0, 2 ** 32 - 1), st.sampled_from(sorted(FAMILIES)))
    def test_variance_nonnegative(self, n, seed, name):
        m = sp.random_model(n, np.random.default_rng(seed))
        second = a.moment(m, FAMILIES[name], 2)
        assert second >= n ** 2 - 1e-9

    @pytest.mark.parametrize("n", [2, 3])
    def test_agree_with_monte_carlo(self, n):
        m = sp.random_model(n, np.random.default_rng(300 + n))
        dist = d.Uniform(0.4, 1.4)
        rep = a.monte_carlo_report(tr.sample_first_detections(m, dist, 100_000, seed=n))
        assert abs(rep.mean_k - a.mean_k(m, dist)) < 4 * rep.stderr_k[1]
        assert abs(rep.moments_k[2] - a.moment(m, dist, 2)) < 4 * rep.stderr_k[2]


class TestStroboscopic:
    def test_single_level_half_turn(self):
        m = sp.from_levels([0.0], [1.0])
        assert abs(a.stroboscopic_u(m, 1.0, np.pi) + 0.5) < 1e-15

    def test_two_level_damped_series_oracle(self, tls):
        r = 1 - 1e-4
        series = damped_u(tls.energies, tls.weights, np.pi / 2, 0.3, r, 400_000)
        assert abs(a.stroboscopic_u(tls, np.pi / 2, 0.3, radius=r) - series) < 1e-9
        assert abs(a.stroboscopic_u(tls, np.pi / 2, 0.3).real + 0.5) < 1e-12

    def test_random_four_levels(self):
        m = sp.random_model(4, np.random.default_rng(44))
        r = 1 - 1e-4
        for w in np.linspace(0.1, 6.1, 16):
            series = damped_u(m.energies, m.weights, 0.37, w, r, 400_000)
            assert abs(a.stroboscopic_u(m, 0.37, w, radius=r) - series) < 1e-8
            assert abs(a.stroboscopic_u(m, 0.37, w).real + 0.5) < 1e-10

    def test_unimodular(self, tls):
        w = np.linspace(0.05, 2 * np.pi - 0.05, 64)
        phi = a.stroboscopic_phi(tls, np.pi / 2, w)
        assert np.max(np.abs(np.abs(phi) - 1)) < 1e-9
        u = a.stroboscopic_u(tls, np.pi / 2, w)
        np.testing.assert_allclose(phi, -u / np.conj(u), atol=1e-12)

    def test_windings(self, tls):
        res = winding.winding_of(lambda w: a.stroboscopic_phi(tls, 0.9, w + 1e-3))
        assert res.value == 2
        single = sp.from_levels([0.25], [1.0])
        assert winding.winding_of(lambda w: a.stroboscopic_phi(single, 1.0, w + 0.1)).value == 1
        np.testing.assert_allclose(a.stroboscopic_phi(single, 1.0, 0.6), np.exp(1j * (0.6 - 0.25)),
                                   atol=1e-14)

    @pytest.mark.parametrize("tau0", [np.pi, 2 * np.pi])
    def test_level_resonance(self, tls, tau0):
        with pytest.raises(ResonanceError):
            a.stroboscopic_u(tls, tau0, 0.3)
        with pytest.raises(ResonanceError):
            a.stroboscopic_phi(tls, tau0, 0.3)

    def test_resonant_omega(self, tls):
        # zeta_j = 1 when omega = E_j tau0 mod 2 pi
        with pytest.raises(ResonanceError):
            a.stroboscopic_u(tls, 0.5, 0.5)

    def test_bad_tau(self, tls):
        with pytest.raises(ValueError):
            a.stroboscopic_u(tls, 0.0, 0.1)


class TestReports:
    def test_exact_report(self, tls):
        rep = a.exact_report(tls, d.Exponential(1.0), m_max=3)
        assert rep.method == "exact" and rep.n == 2
        assert rep.moments_k[2] == pytest.approx(7, abs=1e-9)
        assert rep.moments_t[2] == pytest.approx(TLS_EXP_T2, abs=1e-9)
        assert rep.tail_bound >= 0 and rep.truncation_K > 0
        json.dumps(rep.to_dict())

    def test_monte_carlo_report(self, tls):
        batch = tr.sample_first_detections(tls, d.Exponential(1.0), 100_000, seed=1)
        rep = a.monte_carlo_report(batch)
        assert rep.method == "monte_carlo" and rep.seed == 1
        assert abs(rep.mean_k - 2) < 3 * rep.stderr_k[1]
        assert abs(rep.moments_k[2] - 7) < 3 * rep.stderr_k[2]

    def test_invariants_enforced(self):
        with pytest.raises(NumericalHealthError):
            a.MomentReport(mean_k=0.5, mean_t=1.0, moments_k={1: 0.5}, moments_t={1: 1.0},
                           method="exact")
        with pytest.raises(NumericalHealthError):
            a.MomentReport(mean_k=2.0, mean_t=1.0, moments_k={1: 2.0, 2: 3.0},
                           moments_t={1: 1.0}, method="exact")

    def test_too_few_samples(self, tls):
        batch = tr.sample_first_detections(tls, d.Fixed(np.pi / 2), 10, seed=0, k_max=1)
        with pytest.raises(NumericalHealthError):
            a.monte_carlo_report(batch)


class TestNormCheck:
    def test_two_level(self, tls):
        r = a.avg_norm_check(tls, d.Exponential(1.0))
        assert r.max_deviation <= 1e-5 and r.tail_bound < 1e-6

    def test_custom_grid(self, rng):
        m = sp.random_model(3, rng)
        r = a.avg_norm_check(m, d.Gamma(2, 2), omega=[0.1, 1.0, 4.0])
        assert r.values.shape == (3,) and r.max_deviation <= 1e-5
