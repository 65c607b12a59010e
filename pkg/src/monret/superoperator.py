"""Averaged propagators on the doubled (bra x ket) index space.

Compound indices are row-major over ``(j1, j2)``: index ``j1 * n + j2``.
With that layout ``np.kron(A, B)[j1*n + j2, k1*n + k2] = A[j1, k1] * B[j2, k2]``.

All matrices of the set are stored densely. The rank-one structure of
``G = <D>(E Pi x E Pi)`` is used only to turn traces into inner products:

    G = g pi^T,  g = diag(<D>),  pi = p x p
    Tr[M G] = pi^T M g

so ``<|phi_k|^2> = pi^T Gamma^(k-1) g`` costs one matrix-vector product per
step and involves no eigendecomposition.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, lu_factor, lu_solve

from .errors import NumericalHealthError, ResonanceError, ResonanceWarning, TruncationError
from .spectral import CanonicalSpectralModel

RESONANCE_TOL = 1e-8
RCOND_MIN = 1e-13
_IMAG_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SuperoperatorSet:
    """Averaged superoperators for one (model, distribution, frequency shift).

    ``dhat`` holds the diagonal of the averaged phase matrix,
    ``<exp(i (omega_shift + E_j1 - E_j2) tau)>``, as a vector of length n^2.
    """

    n: int
    weights: np.ndarray
    omega_shift: float
    dhat: np.ndarray
    chat: np.ndarray
    gamma: np.ndarray
    ghat: np.ndarray
    c1: np.ndarray
    c2: np.ndarray

    @property
    def dim(self) -> int:
        return self.n * self.n

    @property
    def g(self) -> np.ndarray:
        """Column factor of ``ghat``: ``ghat = outer(g, pi)``."""
        return self.dhat

    @property
    def pi(self) -> np.ndarray:
        """Row factor of ``ghat``: the vector ``p x p``."""
        return np.kron(self.weights, self.weights)

    @property
    def dhat_matrix(self) -> np.ndarray:
        return np.diag(self.dhat)


def build(model: CanonicalSpectralModel, dist, omega_shift: float = 0.0,
          resonance_tol: float = RESONANCE_TOL) -> SuperoperatorSet:
    """Assemble the averaged superoperators.

    Emits :class:`ResonanceWarning` when an averaged phase factor that is not
    identically one lies within ``resonance_tol`` of one; ``1 - Gamma`` is
    then (nearly) singular.
    """
    n = model.n
    e, p = model.energies, model.weights
    diffs = np.subtract.outer(e, e).ravel()
    dhat = np.asarray(dist.char_fn(omega_shift + diffs), dtype=complex)

    ones = np.ones((n, n))
    e_pi = ones * p[None, :]
    x = np.eye(n) - e_pi
    chat = np.kron(x, x)
    gamma = dhat[:, None] * chat
    ghat = dhat[:, None] * np.kron(e_pi, e_pi)

    d_avg = np.asarray(dist.char_fn(-e), dtype=complex)
    d_conj_avg = np.asarray(dist.char_fn(e), dtype=complex)
    c1 = np.kron(d_conj_avg[:, None] * x, np.eye(n))
    c2 = np.kron(np.eye(n), d_avg[:, None] * x)

    check = np.ones(n * n, dtype=bool)
    if omega_shift == 0.0:
        check[np.arange(n) * (n + 1)] = False
    near = check & (np.abs(1.0 - dhat) < resonance_tol)
    if np.any(near):
        warnings.warn(
            f"{int(near.sum())} averaged phase factor(s) within {resonance_tol:g} of 1; "
            "1 - Gamma is near-singular", ResonanceWarning, stacklevel=2)

    return SuperoperatorSet(n, p.copy(), float(omega_shift), dhat, chat, gamma, ghat, c1, c2)


def _real_checked(value, what):
    if abs(value.imag) > _IMAG_TOL:
        raise NumericalHealthError(f"{what} has imaginary part {value.imag:.3g}")
    return float(value.real)


def return_probs(s: SuperoperatorSet, k_count: int) -> np.ndarray:
    """``<|phi_k|^2>`` for ``k = 1..k_count``."""
    pi = s.pi
    v = s.g.copy()
    out = np.empty(k_count)
    for i in range(k_count):
        out[i] = _real_checked(pi @ v, f"<|phi_{i + 1}|^2>")
        v = s.gamma @ v
    if np.any(out < -_IMAG_TOL) or np.any(out > 1 + _IMAG_TOL):
        raise NumericalHealthError("averaged return probability outside [0, 1]")
    return np.clip(out, 0.0, 1.0)


def avg_return_prob(s: SuperoperatorSet, k: int) -> float:
    """``Tr[Gamma^(k-1) G]``, the averaged first-detection probability at step ``k``."""
    if k < 1:
        raise ValueError("k must be at least 1")
    return float(return_probs(s, k)[-1])


def _row_powers(row, mat, count):
    out = np.empty((count, row.size), dtype=complex)
    r = row.astype(complex)
    for j in range(count):
        out[j] = r
        r = r @ mat
    return out


def correlator_matrix(s: SuperoperatorSet, k_count: int) -> np.ndarray:
    """All correlators ``<phi_k^* phi_k'>`` for ``1 <= k, k' <= k_count``.

    Entry ``[k-1, k'-1]``. For ``k' >= k`` this is
    ``pi^T C2^(k'-k) Gamma^(k-1) g``; for ``k >= k'`` the same with ``C1``.
    """
    vs = np.empty((s.dim, k_count), dtype=complex)
    v = s.g.astype(complex)
    for i in range(k_count):
        vs[:, i] = v
        v = s.gamma @ v
    upper = _row_powers(s.pi, s.c2, k_count) @ vs  # [j, k-1] -> c(k, k+j)
    lower = _row_powers(s.pi, s.c1, k_count) @ vs  # [j, k'-1] -> c(k'+j, k')
    out = np.empty((k_count, k_count), dtype=complex)
    for j in range(k_count):
        cols = np.arange(k_count - j)
        out[cols, cols + j] = upper[j, cols]
        out[cols + j, cols] = lower[j, cols]
    return out


def correlator(s: SuperoperatorSet, k: int, kp: int) -> complex:
    """``<phi_k^* phi_kp>`` averaged over the time steps."""
    if k < 1 or kp < 1:
        raise ValueError("k and kp must be at least 1")
    if k >= kp:
        v = np.linalg.matrix_power(s.gamma, kp - 1) @ s.g
        row = s.pi @ np.linalg.matrix_power(s.c1, k - kp)
    else:
        v = np.linalg.matrix_power(s.gamma, k - 1) @ s.g
        row = s.pi @ np.linalg.matrix_power(s.c2, kp - k)
    return complex(row @ v)


def spectral_radius(s: SuperoperatorSet) -> float:
    """Largest eigenvalue modulus of ``Gamma``."""
    try:
        ev = np.linalg.eigvals(s.gamma)
    except np.linalg.LinAlgError as exc:
        raise NumericalHealthError(f"eigenvalue solver failed: {exc}") from exc
    return float(np.max(np.abs(ev)))


def factor(a: np.ndarray, what: str = "1 - Gamma", radius=None):
    """LU-factor ``a`` and refuse it if the 1-norm condition estimate is too large."""
    lu, piv = lu_factor(a, check_finite=True)
    anorm = np.linalg.norm(a, 1)
    gecon = lapack.zgecon if np.iscomplexobj(lu) else lapack.dgecon
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0 or not np.isfinite(rcond) or rcond < RCOND_MIN:
        cond = np.inf if rcond <= 0 else 1.0 / rcond
        raise ResonanceError(f"{what} is singular to working precision (cond ~ {cond:.3g})",
                             condition=cond, radius=radius)
    return lu, piv, 1.0 / rcond


def resolvent_apply(s: SuperoperatorSet, z: complex, rhs: np.ndarray) -> np.ndarray:
    """Solve ``(1 - z Gamma) x = rhs``."""
    lu, piv, _ = factor(np.eye(s.dim) - z * s.gamma)
    return lu_solve((lu, piv), rhs)


@dataclass(frozen=True)
class IdentityReport:
    """Residuals of the exact matrix identities of the averaged dynamics.

    ``row_identity``: max-norm of ``u^T W (<D>^-1 - C) - (p x p)^T`` where
    ``u`` is the all-ones vector and ``W = diag(p_1, 0_n, p_2, ..., p_n)``.
    ``sequence``: max over ``(j1, j2)`` of
    ``|sum_{j3,j4} [(<D>^-1 - C)^-1]_{j1j2;j3j4} - delta_{j1j2} / p_j1|``.
    """

    row_identity: float
    sequence: float
    condition: float

    @property
    def max_residual(self) -> float:
        return max(self.row_identity, self.sequence)


def verify_identities(s: SuperoperatorSet) -> IdentityReport:
    """Check the two exact identities tying ``<D>``, ``C`` and ``p`` together.

    ``(<D>^-1 - C)^-1 = (1 - Gamma)^-1 <D>``, so the row sums needed for the
    second identity come from one solve and ``<D>`` is never inverted on
    entries the weight mask discards.
    """
    if s.omega_shift != 0.0:
        raise ValueError("identities hold only for the unshifted set")
    n, p = s.n, s.weights
    diag_idx = np.arange(n) * (n + 1)
    w = np.zeros(s.dim)
    w[diag_idx] = p

    # W selects diagonal pairs, where <D> is exactly one
    row = w / np.where(w > 0, s.dhat, 1.0) - w @ s.chat
    row_res = float(np.max(np.abs(row - s.pi)))

    lu, piv, cond = factor(np.eye(s.dim) - s.gamma)
    t = lu_solve((lu, piv), s.dhat.astype(complex))
    expected = np.zeros(s.dim)
    expected[diag_idx] = 1.0 / p
    seq_res = float(np.max(np.abs(t - expected)))
    return IdentityReport(row_res, seq_res, float(cond))


@dataclass(frozen=True)
class PowerBound:
    """Certified bound ``|pi^T Gamma^j g| <= scale * rate^j``.

    When ``rate == 0`` the powers vanish identically from ``j >= vanish_from``.
    """

    scale: float
    rate: float
    block: int
    vanish_from: int | None = None

    def term(self, j):
        if self.rate == 0.0:
            return self.scale if j < self.vanish_from else 0.0
        return self.scale * self.rate ** j


def power_bound(s: SuperoperatorSet, target: float = 0.5, max_doublings: int = 40) -> PowerBound:
    """Bound the decay of ``pi^T Gamma^j g`` using norms of repeated squares.

    With ``s = 2^m`` and ``q = ||Gamma^s||_F <= target`` every power
    ``j = l s + r`` obeys ``||Gamma^j|| <= B q^l`` where ``B`` bounds
    ``||Gamma^r||`` for ``r < s`` by submultiplicativity over the binary
    digits of ``r``.

    Raises
    ------
    ResonanceError
        If no power of two up to ``2^max_doublings`` brings the norm below
        ``target`` (spectral radius at or numerically indistinguishable from 1).
    """
    base = float(np.linalg.norm(s.pi) * np.linalg.norm(s.g))
    mat = s.gamma
    b = 1.0
    block = 1
    for _ in range(max_doublings + 1):
        q = float(np.linalg.norm(mat))
        if q <= target:
            break
        b *= max(1.0, q)
        mat = mat @ mat
        block *= 2
    else:
        raise ResonanceError("Gamma powers do not contract; spectral radius is at or near 1",
                             radius=spectral_radius(s))
    if q == 0.0:
        return PowerBound(base * b, 0.0, block, vanish_from=block)
    # l >= (j - block + 1) / block
    scale = base * b * q ** (-(block - 1) / block)
    return PowerBound(scale, q ** (1.0 / block), block)


def geometric_tail(bound: PowerBound, k: int, m: int) -> float:
    """Closed form of ``sum_{k' > k} k'^m scale rate^(k'-1)`` for ``m`` in {0, 1}."""
    if m not in (0, 1):
        raise ValueError("m must be 0 or 1")
    if bound.rate == 0.0:
        ks = np.arange(k + 1, bound.vanish_from + 1)
        return float(bound.scale * np.sum(ks.astype(float) ** m))
    r = bound.rate
    if m == 0:
        return bound.scale * r ** k / (1.0 - r)
    return bound.scale * r ** k * ((k + 1) - k * r) / (1.0 - r) ** 2


def correlator_tails(s: SuperoperatorSet, k_trunc: int, bound: PowerBound | None = None):
    """Certified bounds on what truncation at ``k_trunc`` drops from the double sums.

    Returns ``(den_tail, num_tail)`` bounding
    ``sum |<phi_k^* phi_k'>|`` and ``sum k' |<phi_k^* phi_k'>|`` over all pairs
    with ``max(k, k') > k_trunc``. Uses ``|<phi_k^* phi_k'>| <= sqrt(a_k a_k')``
    with ``a_k = <|phi_k|^2>``.
    """
    bound = bound or power_bound(s)
    half = PowerBound(float(np.sqrt(bound.scale)), float(np.sqrt(bound.rate)),
                      bound.block, bound.vanish_from)
    total0 = geometric_tail(half, 0, 0)
    total1 = geometric_tail(half, 0, 1)
    t0 = geometric_tail(half, k_trunc, 0)
    t1 = geometric_tail(half, k_trunc, 1)
    return 2 * t0 * total0, t0 * total1 + total0 * t1


def correlator_truncation(s: SuperoperatorSet, tail_tol: float = 1e-6,
                          max_terms: int = 200_000) -> int:
    """Smallest truncation whose :func:`correlator_tails` are both below ``tail_tol``.

    Both tails decrease with the truncation, so a doubling search brackets
    the answer and bisection pins it down.
    """
    bound = power_bound(s)

    def ok(k):
        return max(correlator_tails(s, k, bound)) <= tail_tol

    hi = 1
    while not ok(hi):
        if hi >= max_terms:
            raise TruncationError(f"correlator tail above {tail_tol:g} at {max_terms} terms")
        hi = min(2 * hi, max_terms)
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return max(hi, 1)


def correlator_diagonals(s: SuperoperatorSet, k_trunc: int):
    """Diagonal sums of the truncated correlator matrix.

    Returns ``(offsets, den, num)`` for ``offsets = k' - k`` from
    ``1 - k_trunc`` to ``k_trunc - 1`` with

        den[j] = sum_k <phi_k^* phi_{k+j}>
        num[j] = sum_k i (k + j) <phi_k^* phi_{k+j}>

    over ``1 <= k, k + j <= k_trunc``. Partial sums of ``Gamma^(k-1) g``
    reduce every diagonal to one row-vector product, so the cost is
    linear in ``k_trunc``.
    """
    vs = np.empty((k_trunc, s.dim), dtype=complex)
    v = s.g.astype(complex)
    for i in range(k_trunc):
        vs[i] = v
        v = s.gamma @ v
    ks = np.arange(1, k_trunc + 1)
    part = np.cumsum(vs, axis=0)                   # part[m-1] = sum_{k<=m} Gamma^(k-1) g
    wpart = np.cumsum(ks[:, None] * vs, axis=0)    # same weighted by k
    remaining = k_trunc - np.arange(k_trunc) - 1   # index of the last admissible k for offset j
    upper = _row_powers(s.pi, s.c2, k_trunc)
    lower = _row_powers(s.pi, s.c1, k_trunc)
    j = np.arange(k_trunc)
    den_up = np.einsum("jd,jd->j", upper, part[remaining])
    num_up = 1j * (j * den_up + np.einsum("jd,jd->j", upper, wpart[remaining]))
    den_lo = np.einsum("jd,jd->j", lower, part[remaining])
    num_lo = 1j * np.einsum("jd,jd->j", lower, wpart[remaining])
    offsets = np.arange(1 - k_trunc, k_trunc)
    den = np.concatenate((den_lo[:0:-1], den_up))
    num = np.concatenate((num_lo[:0:-1], num_up))
    return offsets, den, num


def correlator_transform(s: SuperoperatorSet, k_trunc: int, omega_points: int):
    """Truncated double sums over a uniform periodic grid.

    Returns ``(omega, den, num)`` with

        den(w) = sum_{k,k'} exp(i w (k' - k)) <phi_k^* phi_k'>
        num(w) = sum_{k,k'} i k' exp(i w (k' - k)) <phi_k^* phi_k'>

    Both are trigonometric polynomials with frequencies ``k' - k``; the
    diagonals are collected and evaluated by FFT on a grid of at least
    ``omega_points`` and at least ``2 k_trunc`` points, so grid averages of
    either are exact.
    """
    offsets, den, num = correlator_diagonals(s, k_trunc)
    n_grid = max(omega_points, 1 << int(np.ceil(np.log2(2 * k_trunc))))
    den_coef = np.zeros(n_grid, dtype=complex)
    num_coef = np.zeros(n_grid, dtype=complex)
    den_coef[offsets % n_grid] = den
    num_coef[offsets % n_grid] = num
    omega = 2 * np.pi * np.arange(n_grid) / n_grid
    return omega, n_grid * np.fft.ifft(den_coef), n_grid * np.fft.ifft(num_coef)
