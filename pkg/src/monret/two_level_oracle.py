"""Closed forms for the symmetric two-level system.

Levels ``-J, +J`` with weights ``1/2, 1/2``. With ``c_k = cos(J tau_k)`` and
``s_k = sin(J tau_k)`` the return amplitudes are

    phi_1 = c_1
    phi_k = -s_1 c_2 ... c_{k-1} s_k        (k >= 2)

so every averaged quantity depends on the waiting-time law only through
``<exp(i w tau) cos^2(J tau)>`` and ``<exp(i w tau) sin^2(J tau)>``. These
are assembled from the characteristic function by linearity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import MomentReport
from .distributions import Exponential, TimeDistribution
from .errors import ConfigError, ResonanceError
from .spectral import CanonicalSpectralModel, two_level

DENOM_TOL = 1e-10
CURVE_COLUMNS = ("J", "second_moment_random", "second_moment_stroboscopic")


@dataclass(frozen=True)
class TwoLevelParams:
    J: float
    dist: TimeDistribution

    def __post_init__(self):
        if not (np.isfinite(self.J) and self.J > 0):
            raise ConfigError("J must be finite and positive")

    @property
    def model(self) -> CanonicalSpectralModel:
        return two_level(self.J)

    @property
    def y(self) -> complex:
        """``<exp(2 i J tau)>``."""
        return complex(self.dist.char_fn(2 * self.J))

    @property
    def C(self) -> float:
        """``<cos(2 J tau)>``."""
        return cos2_avg(self.dist, self.J, 0.0).real


def cos2_avg(dist, J, omega=0.0, order=0) -> complex:
    """``d^order/dw^order <exp(i w tau) cos(2 J tau)>``."""
    if order == 0:
        return 0.5 * complex(dist.char_fn(omega + 2 * J) + dist.char_fn(omega - 2 * J))
    return 0.5 * complex(dist.char_fn_deriv(omega + 2 * J, order)
                         + dist.char_fn_deriv(omega - 2 * J, order))


def _taus(taus):
    taus = np.asarray(taus, dtype=float).ravel()
    if taus.size == 0 or np.any(taus <= 0) or not np.all(np.isfinite(taus)):
        raise ValueError("taus must be nonempty, finite and strictly positive")
    return taus


def phi_k_closed(p: TwoLevelParams, taus) -> np.ndarray:
    """Return amplitudes ``phi_1..phi_n`` for the step sequence ``taus``."""
    taus = _taus(taus)
    c, s = np.cos(p.J * taus), np.sin(p.J * taus)
    out = np.empty(taus.size, dtype=complex)
    out[0] = c[0]
    if taus.size > 1:
        # running product c_2 ... c_{k-1}, empty for k = 2
        inner = np.concatenate(([1.0], np.cumprod(c[1:-1])))
        out[1:] = -s[0] * inner * s[1:]
    return out


def survival_closed(p: TwoLevelParams, taus) -> float:
    """Probability of no detection in the first ``len(taus)`` measurements."""
    taus = _taus(taus)
    return float(np.sin(p.J * taus[0]) ** 2 * np.prod(np.cos(p.J * taus[1:]) ** 2))


def _check_denominator(den, what):
    if abs(den) < DENOM_TOL:
        raise ResonanceError(f"{what} denominator {abs(den):.3g} vanishes (resonance)",
                             condition=math.inf)


def closed_F(p: TwoLevelParams, omega: float) -> complex:
    """``sum_k exp(i k w) <|phi_k|^2>``."""
    z = np.exp(1j * omega)
    c = p.C
    den = z * (c + 1) - 2
    _check_denominator(den, "F")
    return complex(z * ((2 * z - 1) * c - 1) / den)


def _ab(p: TwoLevelParams, omega: float, order: int = 0):
    """Derivatives of ``<exp(i w tau) cos^2(J tau)>`` and ``<exp(i w tau) sin^2(J tau)>``."""
    e = complex(p.dist.char_fn(omega) if order == 0 else p.dist.char_fn_deriv(omega, order))
    cw = cos2_avg(p.dist, p.J, omega, order)
    return (e + cw) / 2, (e - cw) / 2


def closed_F_tau(p: TwoLevelParams, omega: float) -> complex:
    """``sum_k <exp(i w t_k) |phi_k|^2>``, equal to ``A + B^2 / (1 - A)``."""
    a, b = _ab(p, omega)
    _check_denominator(1 - a, "F_tau")
    return complex(a + b * b / (1 - a))


def _series_mul(x, y):
    return np.convolve(x, y)[: len(x)]


def _series_moments(a, b):
    """Moments from Taylor coefficients of ``A`` and ``B`` about ``w = 0``.

    ``F = A + B^2 / (1 - A)``; the m-th moment is ``m! (-i)^m [w^m] F``.
    """
    one_minus = -np.asarray(a, dtype=complex)
    one_minus[0] += 1
    _check_denominator(one_minus[0], "moment")
    inv = np.zeros_like(one_minus)
    inv[0] = 1 / one_minus[0]
    for n in range(1, len(a)):
        inv[n] = -np.dot(one_minus[1: n + 1], inv[n - 1:: -1][:n]) / one_minus[0]
    f = a + _series_mul(_series_mul(b, b), inv)
    return {m: float((math.factorial(m) * (-1j) ** m * f[m]).real) for m in range(1, len(a))}


def closed_moments(p: TwoLevelParams, m_max: int = 2, variable: str = "k") -> dict:
    """Moments of the first-detection step (``"k"``) or time (``"t"``), orders ``1..m_max``."""
    if m_max < 1:
        raise ValueError("m_max must be at least 1")
    orders = range(m_max + 1)
    if variable == "k":
        c = p.C
        a = np.array([1j ** n / math.factorial(n) * (1 + c) / 2 for n in orders])
        b = np.array([1j ** n / math.factorial(n) * (1 - c) / 2 for n in orders])
    elif variable == "t":
        pairs = [_ab(p, 0.0, n) for n in orders]
        a = np.array([x / math.factorial(n) for n, (x, _) in zip(orders, pairs)])
        b = np.array([y / math.factorial(n) for n, (_, y) in zip(orders, pairs)])
    else:
        raise ValueError("variable must be 'k' or 't'")
    return _series_moments(a, b)


def second_moment(c: float) -> float:
    """``<k^2>`` as a function of ``C = <cos 2 J tau>``; infinite when ``C = 1``."""
    if 1 - c < DENOM_TOL:
        return math.inf
    return 2 * (3 - c) / (1 - c)


def fluctuation_curves(j_grid, tau: float):
    """Second moment of ``k`` for random and stroboscopic protocols with mean step ``tau``.

    The random protocol uses exponential waiting times of mean ``tau``,
    the stroboscopic one the fixed step ``tau``. Rows are
    ``(J, random, stroboscopic)``; resonant points (``J tau`` a multiple
    of ``pi``) carry ``inf``.
    """
    j = np.asarray(j_grid, dtype=float).ravel()
    if not (np.isfinite(tau) and tau > 0):
        raise ValueError("tau must be finite and positive")
    if np.any(j <= 0) or not np.all(np.isfinite(j)):
        raise ValueError("J grid values must be finite and positive")
    rate = 1.0 / tau
    random_c = rate ** 2 / (rate ** 2 + 4 * j ** 2)
    strob_c = np.cos(2 * j * tau)
    return [(float(jj), float(second_moment(rc)), float(second_moment(sc)))
            for jj, rc, sc in zip(j, random_c, strob_c)]


def random_curve(J: float, rate: float = 1.0) -> float:
    """``(rate^2 + 6 J^2) / J^2``, the exponential-protocol second moment."""
    return (rate ** 2 + 6 * J ** 2) / J ** 2


def gamma_closed(p: TwoLevelParams) -> np.ndarray:
    """The 4x4 averaged propagator in the ``(j1, j2)`` row-major basis.

    ``Gamma = diag(1, y*, y, 1) s s^T / 4`` with ``s = (1, -1, -1, 1)``.
    """
    y = p.y
    s = np.array([1.0, -1.0, -1.0, 1.0])
    return np.array([1, np.conj(y), y, 1])[:, None] * np.outer(s, s) / 4


def det_closed(p: TwoLevelParams, z) -> complex:
    """``det(1 - z Gamma) = 1 - z <cos^2 J tau>``."""
    return 1 - z * (1 + p.C) / 2


def eigenvalue_closed(p: TwoLevelParams) -> float:
    """Only nonzero eigenvalue of ``Gamma``, ``(2 + y + y*) / 4``."""
    y = p.y
    return float(((2 + y + np.conj(y)) / 4).real)


def closed_form_report(p: TwoLevelParams, m_max: int = 2) -> MomentReport:
    mk = closed_moments(p, m_max, "k")
    mt = closed_moments(p, m_max, "t")
    return MomentReport(mean_k=mk[1], mean_t=mt[1], moments_k=mk, moments_t=mt,
                        method="closed_form_2ls", n=2)


def exponential_params(J: float, rate: float = 1.0) -> TwoLevelParams:
    return TwoLevelParams(J, Exponential(rate))
