"""Single-realization monitored evolution and Monte Carlo first detection.

The state is tracked in the energy basis as a complex vector ``a``; with the
initial overlaps ``q_j = sqrt(p_j)`` each measurement step is

    a <- exp(-i E tau_k) * a
    phi_k = q . a
    a <- a - phi_k * q

which costs O(n) per step and never forms the projector explicitly.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import NumericalHealthError
from .spectral import CanonicalSpectralModel

K_MAX = 1_000_000
CHUNK_SIZE = 8192
_SURVIVAL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Trajectory:
    taus: np.ndarray
    amplitudes: np.ndarray
    survival: np.ndarray
    detection_probs: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return np.cumsum(self.taus)

    def __len__(self):
        return self.amplitudes.size

    def rows(self):
        """Rows ``(k, tau_k, t_k, re_phi, im_phi, prob, survival)`` for CSV export."""
        ks = np.arange(1, len(self) + 1)
        return zip(ks.tolist(), self.taus.tolist(), self.times.tolist(),
                   self.amplitudes.real.tolist(), self.amplitudes.imag.tolist(),
                   self.detection_probs.tolist(), self.survival.tolist())


CSV_COLUMNS = ("k", "tau_k", "t_k", "re_phi", "im_phi", "prob", "survival")


@dataclass(frozen=True)
class FirstDetectionSample:
    k: int
    t: float
    censored: bool


@dataclass(frozen=True, eq=False)
class FirstDetectionBatch:
    """Many independent first-detection draws, in deterministic order."""

    k: np.ndarray
    t: np.ndarray
    censored: np.ndarray
    seed: int
    k_max: int

    def __len__(self):
        return self.k.size

    @property
    def censored_fraction(self) -> float:
        return float(np.mean(self.censored)) if len(self) else 0.0


def _check_taus(taus) -> np.ndarray:
    taus = np.asarray(taus, dtype=float)
    if taus.size and (np.any(taus <= 0) or not np.all(np.isfinite(taus))):
        raise ValueError("time steps must be finite and strictly positive")
    return taus


def amplitudes_for(model: CanonicalSpectralModel, taus) -> Trajectory:
    """Return amplitudes and survival probabilities for one time-step sequence.

    Raises
    ------
    ValueError
        If any time step is not strictly positive.
    NumericalHealthError
        If the survival probability computed from the post-measurement state
        norm disagrees with ``1 - sum |phi_k|^2`` by more than 1e-8.
    """
    taus = _check_taus(taus).ravel()
    q = model.amplitudes
    a = q.astype(complex)
    phis = np.empty(taus.size, dtype=complex)
    surv = np.empty(taus.size)
    for k, tau in enumerate(taus):
        a = np.exp(-1j * model.energies * tau) * a
        phi = np.dot(q, a)
        a = a - phi * q
        phis[k] = phi
        surv[k] = np.vdot(a, a).real
    probs = np.abs(phis) ** 2
    mismatch = np.abs(1.0 - np.cumsum(probs) - surv)
    if mismatch.size and mismatch.max() > _SURVIVAL_TOL:
        raise NumericalHealthError(
            f"survival mismatch {mismatch.max():.3g} exceeds {_SURVIVAL_TOL}")
    return Trajectory(taus, phis, surv, probs)


def amplitudes_batch(model: CanonicalSpectralModel, taus) -> np.ndarray:
    """Vectorized amplitudes for many realizations.

    ``taus`` has shape ``(realizations, n_steps)``; the result has the same
    shape and holds ``phi_k`` for every row.
    """
    taus = _check_taus(np.atleast_2d(taus))
    q = model.amplitudes
    a = np.tile(q.astype(complex), (taus.shape[0], 1))
    out = np.empty(taus.shape, dtype=complex)
    for k in range(taus.shape[1]):
        a *= np.exp(-1j * np.multiply.outer(taus[:, k], model.energies))
        phi = a @ q
        a -= np.multiply.outer(phi, q)
        out[:, k] = phi
    return out


def _detect_chunk(model, dist, rng, size, k_max):
    q = model.amplitudes
    energies = model.energies
    state = np.tile(q.astype(complex), (size, 1))
    idx = np.arange(size)
    k_out = np.full(size, k_max, dtype=np.int64)
    t_out = np.zeros(size)
    censored = np.ones(size, dtype=bool)
    k = 0
    while idx.size and k < k_max:
        k += 1
        tau = np.asarray(dist.sample(rng, idx.size), dtype=float)
        t_out[idx] += tau
        state *= np.exp(-1j * np.multiply.outer(tau, energies))
        # state has unit norm, so |phi|^2 is the conditional detection probability
        phi = state @ q
        hit = rng.random(idx.size) < np.abs(phi) ** 2
        if np.any(hit):
            k_out[idx[hit]] = k
            censored[idx[hit]] = False
        keep = ~hit
        idx = idx[keep]
        state = state[keep] - np.multiply.outer(phi[keep], q)
        norms = np.linalg.norm(state, axis=1)
        dead = norms == 0.0
        if np.any(dead):
            # no remaining amplitude: detection was certain, treat as detected
            k_out[idx[dead]] = k
            censored[idx[dead]] = False
            idx, state, norms = idx[~dead], state[~dead], norms[~dead]
        state /= norms[:, None]
    return k_out, t_out, censored


def sample_first_detection(model: CanonicalSpectralModel, dist, rng: np.random.Generator,
                           k_max: int = K_MAX) -> FirstDetectionSample:
    """Draw one first-detection event.

    Time steps are drawn one at a time; after ``k - 1`` null outcomes the
    ``k``-th measurement clicks with probability ``|phi_k|^2 / S_{k-1}``.
    If no click occurs within ``k_max`` steps the sample is returned with
    ``censored=True``, ``k = k_max`` and the elapsed time.
    """
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    k, t, c = _detect_chunk(model, dist, rng, 1, k_max)
    return FirstDetectionSample(int(k[0]), float(t[0]), bool(c[0]))


def default_threads() -> int:
    env = os.environ.get("MONRET_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def sample_first_detections(model: CanonicalSpectralModel, dist, n_samples: int, seed: int,
                            k_max: int = K_MAX, threads: int | None = None) -> FirstDetectionBatch:
    """Draw ``n_samples`` first-detection events reproducibly.

    Samples are generated in fixed-size chunks, chunk ``i`` using the
    ``i``-th child of ``SeedSequence(seed)``, so the output depends only on
    ``seed`` and never on the number of worker threads.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    sizes = [CHUNK_SIZE] * (n_samples // CHUNK_SIZE)
    if n_samples % CHUNK_SIZE:
        sizes.append(n_samples % CHUNK_SIZE)
    children = np.random.SeedSequence(seed).spawn(len(sizes))

    def work(i):
        return _detect_chunk(model, dist, np.random.default_rng(children[i]), sizes[i], k_max)

    threads = threads or default_threads()
    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(i) for i in range(len(sizes))]
    k, t, c = (np.concatenate(x) for x in zip(*parts))
    return FirstDetectionBatch(k, t, c, int(seed), int(k_max))


def truncated_ft(amplitudes, omega_grid) -> np.ndarray:
    """``sum_{k=1}^{M} exp(i omega k) phi_k`` at every grid point.

    ``amplitudes`` is a :class:`Trajectory` or a sequence ``phi_1..phi_M``.
    """
    phis = amplitudes.amplitudes if isinstance(amplitudes, Trajectory) else amplitudes
    phis = np.asarray(phis, dtype=complex).ravel()
    if phis.size == 0:
        raise ValueError("cannot transform an empty trajectory")
    omega = np.asarray(omega_grid, dtype=float)
    ks = np.arange(1, phis.size + 1)
    return np.exp(1j * np.multiply.outer(omega, ks)) @ phis
