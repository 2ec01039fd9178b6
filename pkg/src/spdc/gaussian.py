"""Gaussian-state machinery: Takagi supermodes, symplectic propagator, covariance.

Conventions: quadratures are ordered ``(q_1..q_N, p_1..p_N)``, the vacuum has
covariance ``I / 2`` and ``Omega = [[0, I], [-I, 0]]``. Supermodes are the
rows of ``V`` with ``V L V^T = diag(gains)``; with positive gains every
supermode is squeezed in its phase quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial.hermite import hermval
from scipy.linalg import expm

from .errors import ContractError, NoGainError

SHOT_NOISE = 0.5


def symplectic_form(n):
    """``Omega`` for ``n`` modes in qqpp ordering."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def quadrature_change(n):
    """Unitary ``C`` with ``(q; p) = C^dagger (a; a^dagger)``."""
    eye = np.eye(n)
    return np.block([[eye, 1j * eye], [eye, -1j * eye]]) / np.sqrt(2.0)


def real_representation(D):
    """``[[Re D, -Im D], [Im D, Re D]]``: quadrature map of the modes ``d = D a``."""
    D = np.asarray(D)
    re, im = D.real, D.imag
    return np.block([[re, -im], [im, re]])


@dataclass(frozen=True)
class SupermodeSet:
    """Takagi factors of a coupling matrix.

    Attributes:
        V: unitary matrix whose rows are the supermode spectral amplitudes.
        gains: non-negative gains, sorted in descending order.
        coupling: the factorized matrix ``L`` (kept for rephasing checks).
    """

    V: np.ndarray
    gains: np.ndarray
    coupling: np.ndarray | None = None

    @property
    def n(self):
        return self.gains.size

    def congruence_residual(self, L=None):
        """``||V L V^T - diag(gains)||_F / ||L||_F``."""
        L = self.coupling if L is None else L
        norm = np.linalg.norm(L)
        if norm == 0:
            return 0.0
        return float(np.linalg.norm(self.V @ L @ self.V.T - np.diag(self.gains)) / norm)

    def unitarity_residual(self):
        return float(np.linalg.norm(self.V @ self.V.conj().T - np.eye(self.n)))


def _hermite_functions(n_points, n_funcs):
    x = (np.arange(n_points) - 0.5 * (n_points - 1)) / max(n_points / 8.0, 1.0)
    out = np.empty((n_points, n_funcs))
    for k in range(n_funcs):
        coef = np.zeros(k + 1)
        coef[k] = 1.0
        h = hermval(x, coef) * np.exp(-0.5 * x * x)
        norm = np.linalg.norm(h)
        out[:, k] = h / norm if norm > 0 else h
    return out


def _canonical_sign(U):
    """Flip columns so the largest entry has positive real part (imaginary if real part is 0)."""
    idx = np.argmax(np.abs(U), axis=0)
    pivots = U[idx, np.arange(U.shape[1])]
    ref = np.where(np.abs(pivots.real) > 1e-12 * np.abs(pivots), pivots.real, pivots.imag)
    signs = np.where(ref < 0, -1.0, 1.0)
    return U * signs


def _align_degenerate(U_block):
    """Rotate an exactly degenerate block onto low-order Hermite-Gauss profiles.

    Inside a degenerate cluster any real orthogonal mixing of the columns is
    an equally valid factorization; this picks a reproducible one.
    """
    d = U_block.shape[1]
    H = _hermite_functions(U_block.shape[0], d)
    P = (H.T @ U_block).real
    Y, _, Zt = np.linalg.svd(P)
    return U_block @ (Zt.T @ Y.T)


def _cluster_bounds(s, rel_gap, null_tol):
    """Split descending singular values into groups of near-equal values.

    Consecutive values closer than ``rel_gap * s_i`` share a group; values
    below ``null_tol * s_0`` form a final null group.
    """
    n = s.size
    floor = null_tol * s[0]
    n_live = int(np.sum(s > floor))
    bounds = []
    start = 0
    for i in range(n_live - 1):
        if s[i] - s[i + 1] > rel_gap * s[i]:
            bounds.append((start, i + 1))
            start = i + 1
    if n_live:
        bounds.append((start, n_live))
    null = (n_live, n) if n_live < n else None
    return bounds, null


def _takagi_block(L, A_c):
    """Exact Takagi vectors of ``L`` inside the left singular subspace ``A_c``.

    The projected matrix ``M = A_c^H L conj(A_c)`` is complex symmetric; its
    Takagi vectors are the eigenvectors of the real symmetric embedding
    ``[[Re M, Im M], [Im M, -Re M]]`` for the positive eigenvalues.
    """
    k = A_c.shape[1]
    M = A_c.conj().T @ L @ A_c.conj()
    M = 0.5 * (M + M.T)
    H = np.block([[M.real, M.imag], [M.imag, -M.real]])
    w, vecs = np.linalg.eigh(H)
    top = vecs[:, ::-1][:, :k]
    Z = top[:k] + 1j * top[k:]
    return A_c @ Z


def takagi_factorize(L, *, symmetry_tol=1e-12, rel_gap=1e-3, null_tol=1e-14, degeneracy_tol=1e-10):
    """Autonne-Takagi factorization ``V L V^T = diag(gains)`` of a complex symmetric matrix.

    The SVD ``L = A S B^H`` provides the gains and the left singular vectors;
    the phases of isolated singular vectors follow from ``a_k^H conj(b_k)``,
    and groups of close singular values are re-diagonalized inside their
    joint subspace so that quasi-degenerate gains stay accurate.

    Args:
        L: square complex symmetric matrix.
        symmetry_tol: allowed ``||L - L^T||_F / ||L||_F``.
        rel_gap: relative gap below which neighbouring singular values are
            treated as one group.
        null_tol: singular values below ``null_tol * max`` are treated as zero.
        degeneracy_tol: relative spread under which a group is considered
            exactly degenerate and gauge-fixed.

    Returns:
        SupermodeSet with gains equal to the singular values of ``L``.

    Raises:
        ContractError: ``L`` is not square or not symmetric.
    """
    L = np.asarray(L, dtype=complex)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ContractError("coupling matrix must be square")
    n = L.shape[0]
    norm = np.linalg.norm(L)
    if norm == 0:
        return SupermodeSet(np.eye(n, dtype=complex), np.zeros(n), L)
    if np.linalg.norm(L - L.T) > symmetry_tol * norm:
        raise ContractError("coupling matrix is not symmetric")

    A, s, Bh = np.linalg.svd(L)
    groups, null = _cluster_bounds(s, rel_gap, null_tol)
    U = np.empty_like(A)
    for lo, hi in groups:
        if hi - lo == 1:
            # phase of a_k^H conj(b_k); conj(b_k) is row k of Bh
            q = np.vdot(A[:, lo], Bh[lo])
            U[:, lo] = A[:, lo] * np.exp(0.5j * np.angle(q))
            continue
        block = _takagi_block(L, A[:, lo:hi])
        if s[lo] - s[hi - 1] <= degeneracy_tol * s[lo]:
            block = _align_degenerate(block)
        U[:, lo:hi] = block
    if null is not None:
        U[:, null[0] : null[1]] = A[:, null[0] : null[1]]

    # restore exact unitarity; columns are already orthonormal up to rounding
    Q, R = np.linalg.qr(U)
    d = np.diag(R)
    U = Q * np.where(np.abs(d) > 0, d / np.abs(d), 1.0)
    U = _canonical_sign(U)
    return SupermodeSet(U.conj().T, s, L)


def supermode_gains(L):
    """Gains alone (the singular values of ``L``); cheaper than a full factorization."""
    return np.linalg.svd(np.asarray(L), compute_uv=False)


def phase_normalize_supermodes(modes):
    """Rephase supermodes so every one is squeezed in the phase quadrature.

    Each row of ``V`` is multiplied by ``exp(-i arg(d_k) / 2)`` where
    ``d_k = (V L V^T)_kk``, which makes all diagonal entries non-negative.
    """
    if modes.coupling is None:
        raise ContractError("phase normalization needs the coupling matrix")
    d = np.einsum("ij,jk,ik->i", modes.V, modes.coupling, modes.V)
    phase = np.exp(-0.5j * np.angle(d))
    return replace(modes, V=modes.V * phase[:, None])


@dataclass(frozen=True)
class SymplecticPropagator:
    """Quadrature propagator ``S = R1 K R1^T`` of the crystal.

    ``squeeze`` holds the diagonal of ``K``, ``(exp(eta_t g), exp(-eta_t g))``.
    """

    S: np.ndarray
    eta_t: float
    R1: np.ndarray
    squeeze: np.ndarray

    @property
    def n_modes(self):
        return self.S.shape[0] // 2


def supermode_rotation(modes):
    """Orthogonal symplectic ``R1 = C^H diag(V^H, V^T) C``, the real form of ``V^H``."""
    return real_representation(modes.V.conj().T)


def build_propagator(modes, eta_t):
    """Propagator for interaction strength ``eta_t`` (the product eta * t)."""
    if not np.isfinite(eta_t):
        raise ValueError("eta_t must be finite")
    R1 = supermode_rotation(modes)
    r = eta_t * modes.gains
    k = np.concatenate([np.exp(r), np.exp(-r)])
    S = (R1 * k) @ R1.T
    return SymplecticPropagator(S, float(eta_t), R1, k)


def propagator_expm(L, eta_t):
    """Reference propagator ``C^H expm(eta_t [[0, L], [L*, 0]]) C`` by dense exponential.

    Only meant for small matrices; used to cross-check the Takagi route.
    """
    L = np.asarray(L, dtype=complex)
    n = L.shape[0]
    zero = np.zeros_like(L)
    Ltilde = np.block([[zero, L], [L.conj(), zero]])
    C = quadrature_change(n)
    S = C.conj().T @ expm(eta_t * Ltilde) @ C
    return S.real


def covariance_from_propagator(S):
    """Output covariance ``S S^T / 2`` for vacuum input."""
    S = getattr(S, "S", S)
    gamma = 0.5 * S @ S.T
    return 0.5 * (gamma + gamma.T)


def covariance_matrix(modes, eta_t):
    """``R1 K^2 R1^T / 2`` without forming ``S``."""
    R1 = supermode_rotation(modes)
    r = eta_t * modes.gains
    k2 = np.concatenate([np.exp(2 * r), np.exp(-2 * r)])
    gamma = 0.5 * (R1 * k2) @ R1.T
    return 0.5 * (gamma + gamma.T)


def vacuum_covariance(n):
    return SHOT_NOISE * np.eye(2 * n)


def symplectic_eigenvalues(gamma):
    """Symplectic spectrum of a covariance matrix (each value listed once)."""
    n = gamma.shape[0] // 2
    ev = np.linalg.eigvals(1j * symplectic_form(n) @ gamma)
    return np.sort(np.abs(ev))[::2]


def purity_determinant(gamma):
    """``det(2 Gamma)``, equal to 1 for pure states; computed in log space."""
    sign, logdet = np.linalg.slogdet(2.0 * gamma)
    return float(sign * np.exp(logdet))


def calibrate_gain_scale(modes, target_db):
    """``eta_t`` making the leading supermode ``target_db`` dB squeezed."""
    lead = float(np.max(modes.gains)) if modes.n else 0.0
    if not lead > 0:
        raise NoGainError("no parametric gain: leading gain is zero")
    return target_db * np.log(10.0) / (20.0 * lead)


def squeezing_db(variance):
    """Noise reduction below shot noise, ``-10 log10(variance / 0.5)``."""
    variance = np.asarray(variance, dtype=float)
    if np.any(variance <= 0):
        raise ValueError("variance must be positive")
    out = -10.0 * np.log10(variance / SHOT_NOISE)
    return float(out) if out.ndim == 0 else out


def supermode_variances(modes, eta_t):
    """``(q, p)`` variances of every supermode; ``p`` is the squeezed one."""
    r = eta_t * modes.gains
    return 0.5 * np.exp(2 * r), 0.5 * np.exp(-2 * r)
