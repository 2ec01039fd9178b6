"""Detection modes, frexels, cluster graphs and nullifier statistics."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.optimize import minimize

from .errors import ContractError
from .gaussian import SHOT_NOISE, real_representation
from .pump import sigma_omega_from_fwhm


@dataclass(frozen=True)
class ModeMatrix:
    """Rows are orthonormal spectral amplitudes of detection modes ``d = D a``."""

    D: np.ndarray

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.D, dtype=complex))
        m = D.shape[0]
        if np.linalg.norm(D @ D.conj().T - np.eye(m)) > 1e-10 * np.sqrt(m):
            raise ContractError("detection modes are not orthonormal (D D^H != I)")
        object.__setattr__(self, "D", D)

    @property
    def n_modes(self):
        return self.D.shape[0]

    def permuted(self, perm):
        """Mode ``perm[j]`` moved to position ``j``."""
        return ModeMatrix(self.D[list(perm)])

    def rotated(self, thetas):
        """Each mode multiplied by ``exp(i theta_j)``."""
        return ModeMatrix(np.exp(1j * np.asarray(thetas))[:, None] * self.D)


@dataclass(frozen=True)
class ClusterGraph:
    """Unit-weight graph given by its 0/1 adjacency matrix."""

    G: np.ndarray

    def __post_init__(self):
        G = np.asarray(self.G, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise ValueError("adjacency matrix must be square")
        if not np.all((G == 0) | (G == 1)):
            raise ValueError("only unit-weight graphs are supported")
        if np.any(np.diag(G) != 0):
            raise ValueError("adjacency matrix must have a zero diagonal")
        if not np.array_equal(G, G.T):
            raise ValueError("adjacency matrix must be symmetric")
        object.__setattr__(self, "G", G)

    @property
    def n_nodes(self):
        return self.G.shape[0]

    @property
    def degrees(self):
        return self.G.sum(axis=1)

    @property
    def normalizations(self):
        """``r_j = 1 / sqrt(1 + deg(j))``, giving each nullifier vacuum variance 1/2."""
        return 1.0 / np.sqrt(1.0 + self.degrees)

    @classmethod
    def from_edges(cls, n_nodes, edges):
        G = np.zeros((n_nodes, n_nodes))
        for j, k in edges:
            if j == k:
                raise ValueError("self loops are not allowed")
            G[j, k] = G[k, j] = 1.0
        return cls(G)

    @classmethod
    def linear(cls, n_nodes):
        return cls.from_edges(n_nodes, [(j, j + 1) for j in range(n_nodes - 1)])

    @classmethod
    def empty(cls, n_nodes):
        return cls(np.zeros((n_nodes, n_nodes)))

    @classmethod
    def from_json(cls, source):
        """Read ``{"n_nodes": m, "edges": [[j, k], ...]}`` from a path or a mapping."""
        if isinstance(source, dict):
            data = source
        else:
            with open(source) as fh:
                data = json.load(fh)
        return cls.from_edges(int(data["n_nodes"]), [tuple(e) for e in data["edges"]])

    def to_json(self):
        m = self.n_nodes
        edges = [[j, k] for j in range(m) for k in range(j + 1, m) if self.G[j, k]]
        return {"n_nodes": m, "edges": edges}


@dataclass(frozen=True)
class FrexelSpec:
    """Frequency-band slices of a Gaussian envelope.

    Attributes:
        band_edges: increasing angular frequencies ``Omega_1 .. Omega_{m+1}``.
        phases: local-oscillator phase of each band (defaults to zeros).
        center_wavelength: envelope centre in metres.
        fwhm: envelope intensity FWHM in metres.
    """

    band_edges: np.ndarray
    phases: np.ndarray = field(default=None)
    center_wavelength: float = 795e-9
    fwhm: float = 10e-9

    def __post_init__(self):
        edges = np.asarray(self.band_edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError("band edges must be strictly increasing")
        phases = np.zeros(edges.size - 1) if self.phases is None else np.asarray(self.phases, dtype=float)
        if phases.shape != (edges.size - 1,):
            raise ValueError("need one phase per band")
        object.__setattr__(self, "band_edges", edges)
        object.__setattr__(self, "phases", phases)

    @property
    def n_bands(self):
        return self.band_edges.size - 1

    @classmethod
    def uniform(cls, n_bands=4, red_wavelength=808e-9, blue_wavelength=782e-9, **kwargs):
        """Bands equally spaced in frequency between two outer wavelengths."""
        lo = 2.0 * np.pi * SPEED_OF_LIGHT / red_wavelength
        hi = 2.0 * np.pi * SPEED_OF_LIGHT / blue_wavelength
        return cls(np.linspace(lo, hi, n_bands + 1), **kwargs)

    @classmethod
    def symmetric(cls, n_bands=4, red_wavelength=808e-9, center_wavelength=795e-9, **kwargs):
        """Bands equally spaced in frequency, mirrored about the degenerate frequency.

        The blue edge is the frequency mirror of ``red_wavelength`` about
        ``center_wavelength`` (808 nm about 795 nm gives about 782.4 nm).
        """
        omega0 = 2.0 * np.pi * SPEED_OF_LIGHT / center_wavelength
        lo = 2.0 * np.pi * SPEED_OF_LIGHT / red_wavelength
        if not lo < omega0:
            raise ValueError("red edge must lie below the centre frequency")
        return cls(np.linspace(lo, 2.0 * omega0 - lo, n_bands + 1), center_wavelength=center_wavelength, **kwargs)

    def envelope(self, omegas):
        omega0 = 2.0 * np.pi * SPEED_OF_LIGHT / self.center_wavelength
        sigma = sigma_omega_from_fwhm(self.fwhm, self.center_wavelength)
        return np.exp(-((np.asarray(omegas) - omega0) ** 2) / (4.0 * sigma**2))


def frexel_masks(spec, omegas):
    """Boolean band membership; bands are half-open except the last one."""
    edges = spec.band_edges
    masks = []
    for j in range(spec.n_bands):
        upper = omegas <= edges[j + 1] if j == spec.n_bands - 1 else omegas < edges[j + 1]
        masks.append((omegas >= edges[j]) & upper)
    return np.array(masks)


def build_frexels(spec, grid):
    """Mode matrix of the frexels of ``spec`` sampled on ``grid``."""
    omegas = grid.omegas
    env = spec.envelope(omegas)
    masks = frexel_masks(spec, omegas)
    D = np.zeros((spec.n_bands, omegas.size), dtype=complex)
    for j, mask in enumerate(masks):
        if not mask.any():
            raise ValueError(f"frexel band {j} contains no grid point")
        norm = np.sqrt(np.sum(env[mask] ** 2))
        if norm == 0:
            raise ValueError(f"frexel band {j} has zero envelope weight")
        D[j, mask] = np.exp(1j * spec.phases[j]) * env[mask] / norm
    return ModeMatrix(D)


def _as_matrix(D):
    return D.D if isinstance(D, ModeMatrix) else np.atleast_2d(np.asarray(D))


def quadrature_transform(D):
    """Real ``2M x 2N`` matrix mapping frequency quadratures to those of ``D``'s modes."""
    if not isinstance(D, ModeMatrix):
        D = ModeMatrix(D)
    return real_representation(D.D)


def mode_covariance(gamma_omega, D):
    """Reduced covariance ``R_D Gamma R_D^T`` of the modes ``D``."""
    D = _as_matrix(D)
    if 2 * D.shape[1] != gamma_omega.shape[0]:
        raise ValueError(
            f"mode matrix acts on {D.shape[1]} frequencies but covariance has {gamma_omega.shape[0] // 2} modes"
        )
    R = quadrature_transform(D)
    out = R @ gamma_omega @ R.T
    return 0.5 * (out + out.T)


def mode_covariance_from_supermodes(modes, eta_t, D):
    """Same as :func:`mode_covariance` but through ``D V^H``; avoids the ``2N x 2N`` covariance."""
    D = _as_matrix(D)
    R = real_representation(D @ modes.V.conj().T)
    r = eta_t * modes.gains
    k2 = np.concatenate([np.exp(2 * r), np.exp(-2 * r)])
    out = 0.5 * (R * k2) @ R.T
    return 0.5 * (out + out.T)


def mode_covariance_from_coupling(L, eta_t, D, svd=None):
    """Mode covariance straight from the SVD ``L = A diag(s) B^H``, no Takagi phases needed.

    The output modes are ``d = P a + Q a^dagger`` with
    ``P = D A cosh(eta_t s) A^H`` and ``Q = D A sinh(eta_t s) B^H``.

    Args:
        L: coupling matrix (ignored when ``svd`` is given).
        eta_t: interaction strength.
        D: detection modes.
        svd: optional precomputed ``(A, s, Bh)``.
    """
    D = _as_matrix(D)
    A, s, Bh = np.linalg.svd(np.asarray(L)) if svd is None else svd
    r = eta_t * s
    DA = D @ A
    P = (DA * np.cosh(r)) @ A.conj().T
    Q = (DA * np.sinh(r)) @ Bh
    plus, minus = P + Q, P - Q
    M = np.block([[plus.real, -minus.imag], [plus.imag, minus.real]])
    out = 0.5 * M @ M.T
    return 0.5 * (out + out.T)


def nullifier_modes(D, graph):
    """Modes ``W = -r (i D + G D)`` whose amplitude quadratures are the normalized nullifiers.

    Returns:
        ``(W, r)`` with ``r`` the per-node normalizations.
    """
    D = _as_matrix(D)
    G = graph.G if isinstance(graph, ClusterGraph) else np.asarray(graph, dtype=float)
    if G.shape[0] != D.shape[0]:
        raise ValueError("graph size does not match the number of modes")
    r = 1.0 / np.sqrt(1.0 + G.sum(axis=1))
    W = -r[:, None] * (1j * D + G @ D)
    return W, r


@dataclass(frozen=True)
class NullifierCovariance:
    """Covariance of the normalized nullifiers and their conjugates."""

    full: np.ndarray

    @property
    def m(self):
        return self.full.shape[0] // 2

    @property
    def nullifier_block(self):
        return self.full[: self.m, : self.m]

    @property
    def cross_block(self):
        return self.full[: self.m, self.m :]

    @property
    def conjugate_block(self):
        return self.full[self.m :, self.m :]

    @property
    def variances(self):
        return np.diag(self.nullifier_block).copy()

    @property
    def mean_variance(self):
        return float(np.mean(self.variances))


def nullifier_covariance(gamma_omega, W):
    """``R_W Gamma R_W^T`` for the (not necessarily orthogonal) nullifier modes ``W``."""
    R = real_representation(np.atleast_2d(W))
    out = R @ gamma_omega @ R.T
    return NullifierCovariance(0.5 * (out + out.T))


def nullifier_transform(graph):
    """Rows map mode quadratures ``(q; p)`` to normalized nullifiers ``r (p - G q)``."""
    G = graph.G if isinstance(graph, ClusterGraph) else np.asarray(graph, dtype=float)
    m = G.shape[0]
    r = 1.0 / np.sqrt(1.0 + G.sum(axis=1))
    return r[:, None] * np.hstack([-G, np.eye(m)])


def nullifier_variances(gamma_modes, graph):
    """Nullifier variances from the covariance of the cluster's node modes."""
    T = nullifier_transform(graph)
    return np.einsum("ij,jk,ik->i", T, gamma_modes, T)


def rotate_modes(gamma_modes, thetas):
    """Covariance after multiplying mode ``j`` by ``exp(i theta_j)``."""
    R = real_representation(np.diag(np.exp(1j * np.asarray(thetas))))
    return R @ gamma_modes @ R.T


def phase_quadratic_form(gamma_modes, graph):
    """Matrix ``Q`` with ``sum_j Var(nullifier_j) = c^T Q c`` and ``c = (cos theta, sin theta)``."""
    T = nullifier_transform(graph)
    m = T.shape[0]
    a = T[:, :m]
    b = T[:, m:]
    Q = np.zeros((2 * m, 2 * m))
    for j in range(m):
        B = np.zeros((2 * m, 2 * m))
        # column k: cos(theta_k) coefficient; column m + k: sin(theta_k)
        B[:m, :m] = np.diag(a[j])
        B[m:, :m] = np.diag(b[j])
        B[:m, m:] = np.diag(b[j])
        B[m:, m:] = -np.diag(a[j])
        Q += B.T @ gamma_modes @ B
    return 0.5 * (Q + Q.T)


@dataclass(frozen=True)
class PhaseResult:
    thetas: np.ndarray
    variances: np.ndarray
    mean_variance: float


def _phase_objective(Q, thetas):
    c = np.concatenate([np.cos(thetas), np.sin(thetas)], axis=-1)
    return np.einsum("...i,ij,...j->...", c, Q, c)


def _coordinate_descent(Q, thetas, scan, sweeps, tol):
    m = thetas.size
    value = _phase_objective(Q, thetas)
    for _ in range(sweeps):
        for k in range(m):
            trial = np.repeat(thetas[None, :], scan.size, axis=0)
            trial[:, k] = scan
            vals = _phase_objective(Q, trial)
            best = int(np.argmin(vals))
            if vals[best] < value - tol:
                thetas = trial[best].copy()
                value = vals[best]
    return thetas, value


def optimize_frexel_phases(gamma_modes, graph, *, n_scan=720, sweeps=2, n_starts=24, seed=0):
    """Local-oscillator phases minimizing the mean nullifier variance.

    Coordinate descent with ``n_scan``-point scans from several deterministic
    starting points, then a gradient polish of the best one. All ``m``
    phases are free: a common phase rotates every measured quadrature.

    Args:
        gamma_modes: ``2m x 2m`` covariance of the unrotated node modes.
        graph: the cluster graph.
    """
    graph = graph if isinstance(graph, ClusterGraph) else ClusterGraph(graph)
    m = graph.n_nodes
    Q = phase_quadratic_form(gamma_modes, graph) / m
    scale = max(float(np.max(np.abs(Q))), 1e-300)
    tol = 1e-13 * scale
    scan = np.linspace(0.0, 2.0 * np.pi, n_scan, endpoint=False)
    rng = np.random.default_rng(seed)
    starts = [np.zeros(m)] + [rng.uniform(0.0, 2.0 * np.pi, m) for _ in range(n_starts - 1)]

    best_theta, best_val = None, np.inf
    for start in starts:
        theta, val = _coordinate_descent(Q, start, scan, sweeps, tol)
        if val < best_val - tol:
            best_theta, best_val = theta, val

    def fun(th):
        c = np.concatenate([np.cos(th), np.sin(th)])
        Qc = Q @ c
        grad = 2.0 * (-np.sin(th) * Qc[:m] + np.cos(th) * Qc[m:])
        return float(c @ Qc), grad

    res = minimize(fun, best_theta, jac=True, method="BFGS", options={"gtol": 1e-12})
    if res.fun < best_val - tol:
        best_theta = res.x
    thetas = np.mod(best_theta, 2.0 * np.pi)
    variances = nullifier_variances(rotate_modes(gamma_modes, thetas), graph)
    return PhaseResult(thetas, variances, float(np.mean(variances)))


def permute_covariance(gamma_modes, perm):
    """Covariance of the modes reordered so that node ``j`` holds mode ``perm[j]``."""
    m = gamma_modes.shape[0] // 2
    idx = list(perm) + [m + p for p in perm]
    return gamma_modes[np.ix_(idx, idx)]


@dataclass(frozen=True)
class PermutationResult:
    perm: tuple
    phases: PhaseResult
    table: list  # (perm, mean variance) for every permutation, lexicographic order


def optimize_frexel_permutation(gamma_modes, graph, *, tie_tol=1e-9, **phase_kwargs):
    """Exhaustive search over node assignments, each with optimized phases.

    Permutations are visited in lexicographic order and a later one only
    replaces the incumbent if it is better by more than ``tie_tol``, so ties
    resolve to the lexicographically smallest permutation.
    """
    graph = graph if isinstance(graph, ClusterGraph) else ClusterGraph(graph)
    m = graph.n_nodes
    if m > 8:
        raise ValueError("permutation search is limited to m <= 8")
    best = None
    table = []
    for perm in itertools.permutations(range(m)):
        res = optimize_frexel_phases(permute_covariance(gamma_modes, perm), graph, **phase_kwargs)
        table.append((perm, res.mean_variance))
        if best is None or res.mean_variance < best[1].mean_variance - tie_tol:
            best = (perm, res)
    return PermutationResult(best[0], best[1], table)


def off_diagonal_power(gamma_modes):
    """Mean squared inter-mode covariance (a relabelling-invariant correlation measure)."""
    m = gamma_modes.shape[0] // 2
    total = 0.0
    count = 0
    for j in range(m):
        for k in range(m):
            if j == k:
                continue
            idx_j = [j, m + j]
            idx_k = [k, m + k]
            total += np.sum(gamma_modes[np.ix_(idx_j, idx_k)] ** 2)
            count += 1
    return total / max(count, 1)


def vacuum_nullifier_check(graph):
    """Nullifier variances of the vacuum; all equal 1/2 by construction."""
    m = graph.n_nodes
    return nullifier_variances(SHOT_NOISE * np.eye(2 * m), graph)
