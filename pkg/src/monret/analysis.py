"""Generating functions and moments of the first-detection number and time.

    F(w)     = sum_k exp(i k w) <|phi_k|^2>
             = exp(i w) pi^T (1 - exp(i w) Gamma)^-1 g
    F_tau(w) = sum_k <exp(i w t_k) |phi_k|^2>
             = pi^T (1 - Gamma_w)^-1 g_w

where ``Gamma_w`` and ``g_w`` are built with the frequency shift ``w``.
Moments of ``k`` and ``t`` are ``(-i d/dw)^m`` of these at ``w = 0``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import lu_solve

from . import superoperator as so
from .errors import NumericalHealthError, ResonanceError, ResonanceWarning, TruncationError
from .spectral import CanonicalSpectralModel

RADIUS_TOL = 1e-8
MAX_TERMS = 1_000_000
FD_STEP = 1e-4
FD_REL_TOL = 1e-4
STROBOSCOPIC_TOL = 1e-9
_IMAG_TOL = 1e-9


def checked_set(model: CanonicalSpectralModel, dist, omega_shift: float = 0.0,
                resonance_tol: float = so.RESONANCE_TOL) -> so.SuperoperatorSet:
    """Build the superoperators, turning a resonance warning into an error."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", ResonanceWarning)
        try:
            return so.build(model, dist, omega_shift, resonance_tol)
        except ResonanceWarning as w:
            raise ResonanceError(f"resonant parameters: {w}", condition=np.inf) from None


def _real(value, what, tol=_IMAG_TOL):
    value = complex(value)
    if abs(value.imag) > tol * max(1.0, abs(value.real)):
        raise NumericalHealthError(f"{what} has imaginary part {value.imag:.3g}")
    return value.real


def generating_F(model: CanonicalSpectralModel, dist, omega: float, s=None) -> complex:
    """``F(omega)``, the discrete Fourier transform of ``<|phi_k|^2>`` in ``k``."""
    s = s if s is not None else checked_set(model, dist)
    z = np.exp(1j * omega)
    x = so.resolvent_apply(s, z, s.g)
    return complex(z * (s.pi @ x))


def generating_F_tau(model: CanonicalSpectralModel, dist, omega: float) -> complex:
    """``F_tau(omega)``, the transform weighted by ``exp(i omega t_k)``.

    Phase factors near one are expected at a nonzero shift (a fixed step
    with ``omega tau0`` a multiple of ``2 pi``) and are harmless there, so
    only the condition estimate of the solve decides about resonance.
    """
    if omega == 0.0:
        s = checked_set(model, dist)
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ResonanceWarning)
            s = so.build(model, dist, omega_shift=omega)
    x = so.resolvent_apply(s, 1.0, s.g)
    return complex(s.pi @ x)


def mean_k(model: CanonicalSpectralModel, dist, s=None) -> float:
    """Mean number of measurements until first detection.

    ``Tr[(1 - Gamma)^-2 G]`` evaluated as two solves against one LU factor.
    """
    s = s if s is not None else checked_set(model, dist)
    lu, piv, _ = so.factor(np.eye(s.dim) - s.gamma)
    x = lu_solve((lu, piv), lu_solve((lu, piv), s.g))
    return _real(s.pi @ x, "mean_k")


def richardson_derivative(f, x0: float, order: int, h: float = FD_STEP) -> complex:
    """Central finite difference of order 1 or 2 with one Richardson step."""
    def central(step):
        if order == 1:
            return (f(x0 + step) - f(x0 - step)) / (2 * step)
        if order == 2:
            return (f(x0 + step) - 2 * f(x0) + f(x0 - step)) / step ** 2
        raise ValueError("only first and second derivatives are supported")
    return (4 * central(h / 2) - central(h)) / 3


def fd_step(s, scale: float = 1.0) -> float:
    """Finite-difference step well inside the distance to the nearest pole.

    Poles of the resolvent sit roughly ``(1 - rho) / scale`` from the real
    axis, where ``rho`` is the spectral radius of ``Gamma`` and ``scale``
    the rate at which the shift enters (``<tau>`` for time transforms).
    """
    gap = 1.0 - so.spectral_radius(s)
    return min(FD_STEP, 0.01 * gap / scale) if gap > 0 else FD_STEP


def mean_t(model: CanonicalSpectralModel, dist, check: bool = True,
           h: float | None = None, rel_tol: float = 1e-5) -> float:
    """Mean first-detection time, ``<tau> * mean_k``.

    With ``check`` the value is compared with ``-i F_tau'(0)`` obtained by
    Richardson-extrapolated central differences.
    """
    s = checked_set(model, dist)
    value = dist.mean() * mean_k(model, dist, s=s)
    if check:
        h = h if h is not None else fd_step(s, max(dist.mean(), 1.0))
        fd = (-1j * richardson_derivative(lambda w: generating_F_tau(model, dist, w), 0.0, 1, h)).real
        if abs(fd - value) > rel_tol * abs(value):
            raise NumericalHealthError(
                f"mean_t {value:.12g} disagrees with -iF_tau'(0) = {fd:.12g}")
    return value


@dataclass(frozen=True)
class SeriesResult:
    value: float
    terms: int
    tail_bound: float


def _tail(bound: so.PowerBound, k: int, m: int) -> float:
    """Upper bound on ``sum_{k' > k} k'^m |<|phi_k'|^2>|``."""
    if bound.rate == 0.0:
        return 0.0 if k >= bound.vanish_from else math.inf
    r = bound.rate
    theta = ((k + 2) / (k + 1)) ** m * r
    if theta >= 1.0:
        return math.inf
    return bound.scale * (k + 1) ** m * r ** k / (1.0 - theta)


def moment_series(model: CanonicalSpectralModel, dist, m: int, rel_tol: float = 1e-12,
                  max_terms: int = MAX_TERMS, s=None) -> SeriesResult:
    """``sum_k k^m <|phi_k|^2>`` truncated where a certified tail bound drops below ``rel_tol``.

    Raises
    ------
    ResonanceError
        If the spectral radius of ``Gamma`` is within 1e-8 of one.
    TruncationError
        If ``max_terms`` terms do not reach the requested tail bound.
    """
    if m < 1:
        raise ValueError("moment order must be at least 1")
    s = s if s is not None else checked_set(model, dist)
    rho = so.spectral_radius(s)
    if rho >= 1.0 - RADIUS_TOL:
        raise ResonanceError(f"spectral radius {rho:.12g} is at the unit circle; "
                             "fluctuations diverge", radius=rho)
    bound = so.power_bound(s)
    pi, gamma = s.pi, s.gamma
    v = s.g.astype(complex)
    total = 0.0
    for k in range(1, max_terms + 1):
        total += k ** m * _real(pi @ v, f"<|phi_{k}|^2>")
        tail = _tail(bound, k, m)
        if tail <= rel_tol * abs(total):
            return SeriesResult(total, k, tail)
        v = gamma @ v
    raise TruncationError(f"tail bound still {tail:.3g} after {max_terms} terms "
                          f"(spectral radius {rho:.12g})")


def _taylor_solve(lu_piv, a_coeffs, b_coeffs):
    """Taylor coefficients of ``x(w)`` solving ``(1 - A(w)) x = b(w)``."""
    c = []
    for n in range(len(b_coeffs)):
        rhs = b_coeffs[n].astype(complex)
        for l in range(1, n + 1):
            rhs = rhs + a_coeffs[l] @ c[n - l]
        c.append(lu_solve(lu_piv, rhs))
    return c


def moment_resolvent(model: CanonicalSpectralModel, dist, m: int, variable: str = "k") -> float:
    """Exact ``m``-th moment of ``k`` or ``t`` from Taylor coefficients of the resolvent.

    Expands ``Gamma(w)`` and ``g(w)`` to order ``m`` in ``w`` (using the
    derivatives of the characteristic function for ``variable="t"``) and
    solves order by order with a single LU factor; no series truncation.
    """
    if m < 1:
        raise ValueError("moment order must be at least 1")
    s = checked_set(model, dist)
    lu, piv, _ = so.factor(np.eye(s.dim) - s.gamma)
    if variable == "k":
        a = [s.gamma * (1j ** n / math.factorial(n)) for n in range(m + 1)]
        b = [s.g * (1j ** n / math.factorial(n)) for n in range(m + 1)]
    elif variable == "t":
        diffs = np.subtract.outer(model.energies, model.energies).ravel()
        b = [np.asarray(dist.char_fn_deriv(diffs, n), dtype=complex) / math.factorial(n)
             for n in range(m + 1)]
        a = [bn[:, None] * s.chat for bn in b]
    else:
        raise ValueError("variable must be 'k' or 't'")
    c = _taylor_solve((lu, piv), a, b)
    value = (-1j) ** m * math.factorial(m) * (s.pi @ c[m])
    return _real(value, f"moment_{variable}({m})")


def moment(model: CanonicalSpectralModel, dist, m: int, rel_tol: float = 1e-12,
           check: bool = True) -> float:
    """``m``-th moment of the number of measurements until first detection.

    Summed as a truncated series with a certified geometric tail. For
    ``m`` in {1, 2} and ``check=True`` the result is compared with
    finite differences of ``F`` at ``w = 0`` (relative tolerance 1e-4).
    """
    s = checked_set(model, dist)
    value = moment_series(model, dist, m, rel_tol, s=s).value
    if check and m in (1, 2):
        fd = ((-1j) ** m * richardson_derivative(
            lambda w: generating_F(model, dist, w, s=s), 0.0, m, fd_step(s))).real
        if abs(fd - value) > FD_REL_TOL * abs(value):
            raise NumericalHealthError(
                f"series moment {value:.12g} disagrees with finite difference {fd:.12g}")
    return value


# stroboscopic closed forms

def _stroboscopic_phases(model, tau0, omega, radius):
    if not (np.isfinite(tau0) and tau0 > 0):
        raise ValueError("tau0 must be finite and positive")
    theta = np.mod(model.energies * tau0, 2 * np.pi)
    if model.n > 1:
        gaps = np.abs(np.subtract.outer(theta, theta))
        gaps = np.minimum(gaps, 2 * np.pi - gaps)[np.triu_indices(model.n, 1)]
        if gaps.min() < STROBOSCOPIC_TOL:
            raise ResonanceError("levels are degenerate modulo 2*pi/tau0 (stroboscopic resonance)",
                                 condition=np.inf)
    zeta = radius * np.exp(1j * (np.multiply.outer(np.asarray(omega, dtype=float), np.ones(model.n))
                                 - theta))
    if np.any(np.abs(1.0 - zeta) < STROBOSCOPIC_TOL):
        raise ResonanceError("omega is resonant with a stroboscopic phase", condition=np.inf)
    return zeta


def stroboscopic_u(model: CanonicalSpectralModel, tau0: float, omega, radius: float = 1.0):
    """``u(omega) = sum_j p_j zeta_j / (1 - zeta_j)``, ``zeta_j = r exp(i (omega - E_j tau0))``.

    ``radius < 1`` evaluates the generating function inside the unit disk.
    """
    zeta = _stroboscopic_phases(model, tau0, omega, radius)
    return (zeta / (1.0 - zeta)) @ model.weights


def stroboscopic_phi(model: CanonicalSpectralModel, tau0: float, omega, radius: float = 1.0):
    """``phi(omega) = 1 - 1 / (1 + u(omega))``; unimodular on the unit circle."""
    u = stroboscopic_u(model, tau0, omega, radius)
    return 1.0 - 1.0 / (1.0 + u)


@dataclass(frozen=True)
class NormCheck:
    """Averaged spectral normalization ``<|phi~(w)|^2> = 1`` on a grid."""

    omega: np.ndarray
    values: np.ndarray
    k_trunc: int
    tail_bound: float

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.values - 1.0)))


def avg_norm_check(model: CanonicalSpectralModel, dist, omega=None, omega_points: int = 16,
                   k_trunc: int | None = None, tail_tol: float = 1e-6) -> NormCheck:
    """Evaluate ``sum_{k,k'} exp(i w (k' - k)) <phi_k^* phi_k'>`` from the truncated correlators.

    ``omega`` defaults to ``omega_points`` uniformly spaced values in
    ``[0, 2 pi)``. ``k_trunc`` defaults to the smallest truncation whose
    certified tail is below ``tail_tol``.
    """
    s = checked_set(model, dist)
    if k_trunc is None:
        k_trunc = so.correlator_truncation(s, tail_tol)
    if omega is None:
        omega = 2 * np.pi * np.arange(omega_points) / omega_points
    omega = np.asarray(omega, dtype=float).ravel()
    offsets, den, _ = so.correlator_diagonals(s, k_trunc)
    values = np.exp(1j * np.multiply.outer(omega, offsets)) @ den
    for w, val in zip(omega, values):
        _real(val, f"<|phi~({w:.3g})|^2>")
    tail = so.correlator_tails(s, k_trunc)[0]
    return NormCheck(omega, values.real.copy(), int(k_trunc), float(tail))


# reports

@dataclass
class MomentReport:
    mean_k: float
    mean_t: float
    moments_k: dict
    moments_t: dict
    method: str
    truncation_K: int = 0
    tail_bound: float = 0.0
    censored_fraction: float = 0.0
    stderr_k: dict = field(default_factory=dict)
    stderr_t: dict = field(default_factory=dict)
    n: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.mean_k < 1 - 1e-9 or self.mean_t <= 0 or self.tail_bound < 0:
            raise NumericalHealthError(f"invalid moment report: {self}")
        if 2 in self.moments_k and self.moments_k[2] - self.mean_k ** 2 < -1e-9:
            raise NumericalHealthError("negative variance in moment report")

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("moments_k", "moments_t", "stderr_k", "stderr_t"):
            d[key] = {str(k): v for k, v in d[key].items()}
        return d


def exact_report(model: CanonicalSpectralModel, dist, m_max: int = 2,
                 rel_tol: float = 1e-12) -> MomentReport:
    """Exact moments ``k^m`` and ``t^m`` for ``m = 1..m_max``."""
    s = checked_set(model, dist)
    mk = mean_k(model, dist, s=s)
    moments_k, moments_t = {1: mk}, {1: dist.mean() * mk}
    terms, tail = 0, 0.0
    for m in range(1, m_max + 1):
        res = moment_series(model, dist, m, rel_tol, s=s)
        terms, tail = max(terms, res.terms), max(tail, res.tail_bound)
        if m > 1:
            moments_k[m] = res.value
            moments_t[m] = moment_resolvent(model, dist, m, variable="t")
    return MomentReport(mean_k=mk, mean_t=moments_t[1], moments_k=moments_k,
                        moments_t=moments_t, method="exact", truncation_K=terms,
                        tail_bound=tail, n=model.n)


def monte_carlo_report(batch, m_max: int = 2) -> MomentReport:
    """Empirical moments and standard errors from a first-detection batch.

    Censored samples are excluded from the estimates; their fraction is
    reported so callers can judge the bias.
    """
    ok = ~batch.censored
    k = batch.k[ok].astype(float)
    t = batch.t[ok]
    if k.size < 2:
        raise NumericalHealthError("fewer than two uncensored samples")
    moments_k, moments_t, se_k, se_t = {}, {}, {}, {}
    for m in range(1, m_max + 1):
        km, tm = k ** m, t ** m
        moments_k[m], moments_t[m] = float(km.mean()), float(tm.mean())
        se_k[m] = float(km.std(ddof=1) / np.sqrt(k.size))
        se_t[m] = float(tm.std(ddof=1) / np.sqrt(t.size))
    return MomentReport(mean_k=moments_k[1], mean_t=moments_t[1], moments_k=moments_k,
                        moments_t=moments_t, method="monte_carlo",
                        censored_fraction=batch.censored_fraction,
                        stderr_k=se_k, stderr_t=se_t, seed=batch.seed)
