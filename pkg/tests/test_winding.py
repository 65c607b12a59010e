import numpy as np
import pytest
from hypothesis import given, strategies as st

from monret import analysis as a
from monret import distributions as d
from monret import spectral as sp
from monret import winding as wd
from monret.errors import GridResolutionError, NumericalHealthError, UndefinedWindingError


def _coeffs_away_from_circle(rng, m):
    """Coefficients whose polynomial has no root with modulus in [0.95, 1.05]."""
    while True:
        c = rng.normal(size=m) + 1j * rng.normal(size=m)
        if m == 1:
            return c
        mod = np.abs(np.polynomial.polynomial.polyroots(c))
        if np.all(np.abs(mod - 1) > 0.05):
            return c


class TestSampledWinding:
    @pytest.mark.parametrize("n", [0, 1, 2, 5, -3])
    def test_monomial(self, n):
        w = wd.omega_grid(256)
        assert wd.winding_from_samples(np.exp(1j * n * w)).value == n

    def test_constant_shift(self):
        w = wd.omega_grid(128)
        assert wd.winding_from_samples(3 + np.exp(1j * w)).value == 0

    def test_zero_on_curve(self):
        w = wd.omega_grid(64)
        with pytest.raises(UndefinedWindingError):
            wd.winding_from_samples(1 + np.exp(1j * w))

    def test_coarse_grid(self):
        with pytest.raises(GridResolutionError):
            wd.winding_from_samples(np.exp(1j * 40 * wd.omega_grid(64)))
        with pytest.raises(GridResolutionError):
            wd.winding_from_samples([1, 1j])

    def test_grid_doubling(self):
        res = wd.winding_of(lambda w: np.exp(1j * 40 * w), n_points=16)
        assert res.value == 40 and res.diagnostics["points"] >= 256
        with pytest.raises(GridResolutionError):
            # phase noise is unresolved on every grid
            noise = np.random.default_rng(0)
            wd.winding_of(lambda w: np.exp(2j * np.pi * noise.random(w.size)), n_points=16,
                          max_points=1024)

    def test_stable_under_refinement(self):
        c = _coeffs_away_from_circle(np.random.default_rng(5), 10)
        values = {wd.trajectory_winding(c, n).value for n in (64, 256, 1024, 4096)}
        assert len(values) == 1

    def test_snapped(self):
        assert wd.WindingResult(1.99999, "x").snapped == 2


class TestPolynomialWinding:
    def test_single_term(self):
        assert wd.winding_poly([0.3 + 0.1j]).value == 1

    def test_pure_square(self):
        assert wd.winding_poly([0, -1]).value == 2
        assert wd.trajectory_winding([0, -1]).value == 2

    def test_vanishing_leading_coefficient(self):
        with pytest.raises(UndefinedWindingError):
            wd.winding_poly([1.0, 0.0])
        with pytest.raises(ValueError):
            wd.winding_poly([])

    def test_root_on_circle(self):
        with pytest.raises(UndefinedWindingError):
            wd.winding_poly([1.0, 1.0])

    def test_agrees_with_unwrap(self):
        rng = np.random.default_rng(200)
        for _ in range(200):
            c = _coeffs_away_from_circle(rng, int(rng.integers(1, 13)))
            assert wd.winding_poly(c).value == wd.trajectory_winding(c).value

    @given(st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3),
           st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3))
    def test_two_term_rule(self, p1, p2):
        ratio = abs(p1 / p2)
        if abs(ratio - 1) < 1e-3:
            return
        expected = 1 if ratio > 1 else 2
        assert wd.winding_poly([p1, p2]).value == expected
        assert wd.trajectory_winding([p1, p2]).value == expected


class TestAveragedWinding:
    def test_equals_mean_k(self, rng, family):
        m = sp.random_model(3, rng)
        res = wd.averaged_winding(m, family)
        assert res.value == a.mean_k(m, family)
        assert res.diagnostics["distance_to_integer"] < 1e-8

    def test_correlator_single_level(self):
        m = sp.from_levels([0.2], [1.0])
        res = wd.correlator_winding(m, d.Exponential(1.0))
        assert abs(res.value - 1) < 1e-9

    def test_correlator_two_level(self, tls):
        res = wd.correlator_winding(tls, d.Exponential(1.0))
        assert abs(res.value - 2) < 0.02
        assert res.diagnostics["max_denominator_deviation"] <= 1e-5

    def test_correlator_three_levels(self):
        m = sp.random_model(3, np.random.default_rng(3))
        res = wd.correlator_winding(m, d.Uniform(0.5, 1.5))
        assert abs(res.value - 3) < 0.02

    def test_correlator_coarse_truncation_fails_loudly(self, tls):
        # a truncation far too short leaves the normalization visibly broken
        with pytest.raises(NumericalHealthError):
            wd.correlator_winding(tls, d.Exponential(1.0), k_trunc=2)

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_stroboscopic_winding_is_dimension(self, n):
        m = sp.random_model(n, np.random.default_rng(10 + n))
        tau0 = 0.61
        # shift the grid off the resonant points omega = E_j tau0 mod 2 pi
        offset = 0.5 * np.min(np.abs(np.angle(np.exp(1j * (wd.omega_grid(4096)[:, None]
                                                            - m.energies * tau0))))) + 1e-3
        res = wd.winding_of(lambda w: a.stroboscopic_phi(m, tau0, w + offset), 4096)
        assert res.value == n
