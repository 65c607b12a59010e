"""Winding numbers of return-amplitude transforms around the origin."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import analysis
from . import superoperator as so
from .errors import GridResolutionError, NumericalHealthError, UndefinedWindingError
from .trajectory import truncated_ft

ZERO_TOL = 1e-9
ROOT_MARGIN = 1e-6
MAX_JUMP = np.pi / 2
SNAP_TOL = 0.05
DEFAULT_POINTS = 1024


@dataclass(frozen=True)
class WindingResult:
    value: float
    method: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def snapped(self) -> int:
        return int(round(self.value))


def omega_grid(n_points: int) -> np.ndarray:
    return 2 * np.pi * np.arange(n_points) / n_points


def winding_from_samples(phi_on_grid, zero_tol: float = ZERO_TOL,
                         max_jump: float = MAX_JUMP) -> WindingResult:
    """Winding of a closed curve sampled on a uniform periodic grid over ``[0, 2 pi)``.

    Adjacent phase differences (including the closing one) are wrapped to
    ``(-pi, pi]`` and summed.

    Raises
    ------
    UndefinedWindingError
        If any sample has modulus below ``zero_tol``.
    GridResolutionError
        If an adjacent phase difference exceeds ``max_jump``.
    """
    phi = np.asarray(phi_on_grid, dtype=complex).ravel()
    if phi.size < 3:
        raise GridResolutionError("need at least three samples")
    min_abs = float(np.min(np.abs(phi)))
    if min_abs < zero_tol:
        raise UndefinedWindingError(f"curve passes within {min_abs:.3g} of the origin")
    steps = np.angle(np.roll(phi, -1) / phi)
    worst = float(np.max(np.abs(steps)))
    if worst > max_jump:
        raise GridResolutionError(f"phase jump {worst:.3g} exceeds {max_jump:.3g}")
    turns = steps.sum() / (2 * np.pi)
    value = int(round(turns))
    residual = abs(turns - value)
    if residual >= SNAP_TOL:
        raise NumericalHealthError(f"winding {turns:.6g} is not near an integer")
    return WindingResult(value, "phase_unwrap",
                         {"min_abs": min_abs, "max_jump": worst, "residual": residual,
                          "points": int(phi.size)})


def winding_of(func, n_points: int = DEFAULT_POINTS, max_points: int = 2 ** 20,
               zero_tol: float = ZERO_TOL) -> WindingResult:
    """Winding of ``func(omega)`` with the grid doubled until it resolves every phase step."""
    n = n_points
    while True:
        try:
            return winding_from_samples(func(omega_grid(n)), zero_tol)
        except GridResolutionError:
            if 2 * n > max_points:
                raise
            n *= 2


def trajectory_winding(amplitudes, n_points: int = DEFAULT_POINTS) -> WindingResult:
    """Winding of ``sum_{k<=M} exp(i omega k) phi_k`` for one realization."""
    return winding_of(lambda w: truncated_ft(amplitudes, w), n_points)


def winding_poly(coeffs, zero_tol: float = ZERO_TOL,
                 root_margin: float = ROOT_MARGIN) -> WindingResult:
    """Count zeros of ``sum_{k=1}^{M} phi_k z^k`` inside the unit circle.

    The factor ``z`` always contributes one zero at the origin; the rest
    are eigenvalues of the companion matrix of ``sum_k phi_k z^(k-1)``.
    """
    c = np.asarray(coeffs, dtype=complex).ravel()
    if c.size == 0:
        raise ValueError("empty coefficient list")
    if abs(c[-1]) <= zero_tol:
        raise UndefinedWindingError("leading coefficient vanishes")
    if c.size == 1:
        roots = np.empty(0, dtype=complex)
    else:
        roots = np.linalg.eigvals(np.polynomial.polynomial.polycompanion(c))
    moduli = np.abs(roots)
    if np.any(np.abs(moduli - 1.0) < root_margin):
        raise UndefinedWindingError("a root lies on the unit circle")
    value = 1 + int(np.count_nonzero(moduli < 1.0))
    return WindingResult(value, "poly_roots", {"root_moduli": np.sort(moduli).tolist()})


def averaged_winding(model, dist) -> WindingResult:
    """Time-averaged winding, equal to ``sum_k k <|phi_k|^2>``."""
    value = analysis.mean_k(model, dist)
    return WindingResult(value, "series_mean", {"distance_to_integer": abs(value - round(value))})


def correlator_winding(model, dist, omega_points: int = 256, k_trunc: int | None = None,
                       tail_tol: float = 1e-6, max_terms: int = 200_000) -> WindingResult:
    """Winding of the averaged amplitude correlator.

    Averages ``-i num(w) / den(w)`` (see
    :func:`superoperator.correlator_transform`) over a grid that resolves
    every frequency of the truncated sums. ``num`` is the exact derivative
    in the shift of the second argument, so no finite differences enter.
    The truncation is certified by :func:`superoperator.correlator_tails`.
    """
    s = analysis.checked_set(model, dist)
    if k_trunc is None:
        k_trunc = so.correlator_truncation(s, tail_tol, max_terms)
    den_tail, num_tail = so.correlator_tails(s, k_trunc)
    omega, den, num = so.correlator_transform(s, k_trunc, omega_points)
    n_grid = omega.size

    den_dev = float(np.max(np.abs(den - 1.0)))
    if den_dev > 10 * den_tail + 1e-9:
        raise NumericalHealthError(f"<|phi(w)|^2> deviates from 1 by {den_dev:.3g}")
    integral = np.mean(-1j * num / den)
    value = float(integral.real)
    residual = abs(value - round(value))
    if residual > SNAP_TOL:
        raise NumericalHealthError(f"correlator winding {value:.6g} is not near an integer")
    return WindingResult(value, "correlator_contour",
                         {"k_trunc": int(k_trunc), "denominator_tail": den_tail,
                          "numerator_tail": num_tail, "max_denominator_deviation": den_dev,
                          "imag": float(integral.imag), "residual": residual,
                          "grid_points": int(n_grid)})
