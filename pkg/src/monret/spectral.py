"""Energy-basis description of the monitored system.

A model is a list of energy levels ``E_j`` together with the spectral
weights ``p_j = |<E_j|psi>|^2`` of the initial state. Only levels with
nonzero weight are reachable, and degenerate levels act as a single level,
so :func:`canonicalize` reduces any model to the accessible space whose
dimension ``n`` controls every averaged result in this package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

DEGENERACY_TOL = 1e-9
WEIGHT_FLOOR = 1e-12
_SUM_TOL = 1e-10
_INPUT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class RawSpectralModel:
    """Energy levels with weights, possibly degenerate or with zero overlap."""

    energies: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if e.shape != w.shape or e.size == 0:
            raise ConfigError("energies and weights must be non-empty and of equal length")
        if not np.all(np.isfinite(e)):
            raise ConfigError("energies must be finite")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ConfigError("weights must be finite and non-negative")
        if abs(w.sum() - 1.0) > _SUM_TOL:
            raise ConfigError(f"weights sum to {w.sum():.17g}, expected 1")
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True, eq=False)
class CanonicalSpectralModel:
    """Non-degenerate levels, all with strictly positive weight.

    Energies are strictly increasing. ``n`` is the dimension of the
    accessible Hilbert space.
    """

    energies: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if e.shape != w.shape or e.size == 0:
            raise ConfigError("energies and weights must be non-empty and of equal length")
        if not np.all(np.isfinite(e)):
            raise ConfigError("energies must be finite")
        if np.any(np.diff(e) <= 0):
            raise ConfigError("canonical energies must be strictly increasing")
        if np.any(w <= 0):
            raise ConfigError("canonical weights must be strictly positive")
        if abs(w.sum() - 1.0) > _SUM_TOL:
            raise ConfigError(f"weights sum to {w.sum():.17g}, expected 1")
        e.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return int(self.energies.size)

    @property
    def amplitudes(self) -> np.ndarray:
        """Overlaps ``q_j = sqrt(p_j)`` in the real, non-negative phase convention."""
        return np.sqrt(self.weights)

    def to_dict(self) -> dict:
        return {"energies": self.energies.tolist(), "weights": self.weights.tolist()}

    def __eq__(self, other):
        if not isinstance(other, CanonicalSpectralModel):
            return NotImplemented
        return (np.array_equal(self.energies, other.energies)
                and np.array_equal(self.weights, other.weights))

    def __hash__(self):
        return hash((self.energies.tobytes(), self.weights.tobytes()))


@dataclass(frozen=True, eq=False)
class HamiltonianInput:
    """A Hermitian matrix and a normalized initial state in some fixed basis."""

    matrix: np.ndarray
    initial_state: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.matrix, dtype=complex)
        psi = np.asarray(self.initial_state, dtype=complex).ravel()
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ConfigError("Hamiltonian must be a square matrix")
        if psi.size != h.shape[0]:
            raise ConfigError("initial state dimension does not match the Hamiltonian")
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(psi))):
            raise ConfigError("Hamiltonian and state must be finite")
        resid = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
        if resid > _INPUT_TOL:
            raise ConfigError(f"Hamiltonian is not Hermitian (residual {resid:.3g})")
        norm = np.vdot(psi, psi).real
        if abs(norm - 1.0) > _INPUT_TOL:
            raise ConfigError(f"initial state is not normalized (norm^2 = {norm:.17g})")
        object.__setattr__(self, "matrix", h)
        object.__setattr__(self, "initial_state", psi)


def spectral_decompose(h: HamiltonianInput) -> RawSpectralModel:
    """Diagonalize ``h.matrix`` and project the initial state onto its eigenbasis."""
    evals, evecs = np.linalg.eigh(h.matrix)
    weights = np.abs(evecs.conj().T @ h.initial_state) ** 2
    # eigh eigenvectors are orthonormal, so this only absorbs rounding
    weights = weights / weights.sum()
    return RawSpectralModel(evals, weights)


def canonicalize(raw, degeneracy_tol: float = DEGENERACY_TOL,
                 weight_floor: float = WEIGHT_FLOOR) -> CanonicalSpectralModel:
    """Merge degenerate levels, drop unreachable ones and renormalize.

    Levels are sorted and chained into clusters whenever consecutive
    energies differ by at most ``degeneracy_tol``. A cluster's weight is
    the sum of its members' weights and its energy is their weight-averaged
    energy. Clusters with weight below ``weight_floor`` are discarded.

    Accepts a :class:`RawSpectralModel` or an already canonical model.
    """
    if degeneracy_tol <= 0:
        raise ValueError("degeneracy_tol must be positive")
    order = np.argsort(raw.energies, kind="stable")
    e = np.asarray(raw.energies, dtype=float)[order]
    w = np.asarray(raw.weights, dtype=float)[order]

    breaks = np.flatnonzero(np.diff(e) > degeneracy_tol) + 1
    energies, weights = [], []
    for ce, cw in zip(np.split(e, breaks), np.split(w, breaks)):
        total = cw.sum()
        if ce.size == 1:
            energies.append(ce[0])
        else:
            energies.append(np.dot(ce, cw) / total if total > 0 else ce.mean())
        weights.append(total)
    energies = np.array(energies)
    weights = np.array(weights)

    keep = weights >= weight_floor
    if not np.any(keep):
        raise ConfigError("accessible Hilbert space is empty: all weights below floor")
    if np.all(keep):
        # merging preserves the total, so only a drop calls for renormalization
        return CanonicalSpectralModel(energies, weights)
    energies, weights = energies[keep], weights[keep]
    return CanonicalSpectralModel(energies, weights / weights.sum())


def from_hamiltonian(matrix, initial_state, degeneracy_tol: float = DEGENERACY_TOL,
                     weight_floor: float = WEIGHT_FLOOR) -> CanonicalSpectralModel:
    raw = spectral_decompose(HamiltonianInput(matrix, initial_state))
    return canonicalize(raw, degeneracy_tol, weight_floor)


def from_levels(energies, weights, degeneracy_tol: float = DEGENERACY_TOL,
                weight_floor: float = WEIGHT_FLOOR) -> CanonicalSpectralModel:
    return canonicalize(RawSpectralModel(energies, weights), degeneracy_tol, weight_floor)


def two_level(J: float = 1.0) -> CanonicalSpectralModel:
    """Symmetric two-level system: levels ``-J, +J`` with equal weights."""
    if not (np.isfinite(J) and J > 0):
        raise ConfigError("J must be finite and positive")
    return CanonicalSpectralModel(np.array([-J, J]), np.array([0.5, 0.5]))


def random_model(n: int, rng: np.random.Generator, min_gap: float = 0.3,
                 spread: float = 1.0, min_weight: float = 0.02) -> CanonicalSpectralModel:
    """Draw a non-degenerate model with ``n`` levels.

    Gaps are ``min_gap + spread * Exponential(1)`` and weights are Dirichlet
    samples floored at ``min_weight`` before renormalization.
    """
    gaps = min_gap + spread * rng.exponential(size=n - 1)
    energies = np.concatenate([[0.0], np.cumsum(gaps)])
    energies -= energies.mean()
    weights = np.maximum(rng.dirichlet(np.ones(n)), min_weight)
    return CanonicalSpectralModel(energies, weights / weights.sum())
