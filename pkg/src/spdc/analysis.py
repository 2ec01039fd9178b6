"""Derived studies: chirp scans, spectral-phase fits, Schmidt number, squeezing scans, overlaps."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.constants import c as SPEED_OF_LIGHT

from .gaussian import SHOT_NOISE
from .jsa import assemble
from .modes import (
    ClusterGraph,
    mode_covariance_from_coupling,
    optimize_frexel_phases,
    permute_covariance,
)
from .pump import FWHM_TO_SIGMA, apply_chirp, chirp_for_stretch

# phases are fitted in rad/fs to keep the normal equations well conditioned
_FS = 1e-15


# ---------------------------------------------------------------------------
# chirp scans


def gaussian_pump_with_width(base, sigma_omega):
    """Unit-norm transform-limited Gaussian on ``base``'s axis with a new spectral width."""
    amps = np.exp(-((base.axis - base.omega0) ** 2) / (4.0 * sigma_omega**2))
    return replace(base, amplitudes=amps, sigma_omega=sigma_omega).normalized()


def _count_near_max(gains, fraction):
    return int(np.sum(gains >= fraction * gains[0]))


@dataclass(frozen=True)
class ChirpScanRow:
    stretch: float
    phi2: float
    lead_chirped: float
    lead_unchirped: float
    total_chirped: float
    total_unchirped: float
    near_max_chirped: int
    near_max_unchirped: int
    top_chirped: np.ndarray = field(repr=False)
    top_unchirped: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class ChirpScanResult:
    """Chirped and duration-matched unchirped pumps side by side.

    Leading gains are normalized by the leading gain of the unchirped base
    pulse; ``total_*`` is the raw ``sum gains^2``.
    """

    rows: list
    lead_reference: float
    near_max_fraction: float

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows])


def chirp_scan(base, phase_matching, stretches, *, top=100, near_max_fraction=0.95):
    """Compare chirped pulses with unchirped pulses of the same duration.

    For each stretch factor ``s`` (``dt' / dt``) the chirped pump carries
    ``phi2 = chirp_for_stretch(dt, s)`` and the unchirped comparison has its
    spectral width divided by ``s``. Both are unit-norm (fixed pulse energy).

    Args:
        base: transform-limited Gaussian pump.
        phase_matching: ``sinc`` matrix on the matching grid.
        stretches: stretch factors, each ``>= 1``.
        top: number of leading gains stored per row.
        near_max_fraction: threshold for counting gains close to the maximum.
    """
    base = base.normalized()
    n = phase_matching.shape[0]
    top = min(top, n)
    ref = np.linalg.svd(assemble(phase_matching, base.amplitudes), compute_uv=False)
    lead0 = ref[0]
    rows = []
    for s in stretches:
        s = float(s)
        phi2 = chirp_for_stretch(base.duration, s)
        g_c = np.linalg.svd(assemble(phase_matching, apply_chirp(base, phi2).amplitudes), compute_uv=False)
        unchirped = gaussian_pump_with_width(base, base.sigma_omega / s)
        g_u = np.linalg.svd(assemble(phase_matching, unchirped.amplitudes), compute_uv=False)
        rows.append(
            ChirpScanRow(
                stretch=s,
                phi2=phi2,
                lead_chirped=g_c[0] / lead0,
                lead_unchirped=g_u[0] / lead0,
                total_chirped=float(np.sum(g_c**2)),
                total_unchirped=float(np.sum(g_u**2)),
                near_max_chirped=_count_near_max(g_c, near_max_fraction),
                near_max_unchirped=_count_near_max(g_u, near_max_fraction),
                top_chirped=g_c[:top] / lead0,
                top_unchirped=g_u[:top] / lead0,
            )
        )
    return ChirpScanResult(rows, float(lead0), near_max_fraction)


# ---------------------------------------------------------------------------
# spectral phase


def _unwrap_from_peak(phase, peak):
    """Remove 2 pi jumps walking outward from ``peak``."""
    out = np.empty_like(phase)
    out[peak:] = np.unwrap(phase[peak:])
    out[: peak + 1] = np.unwrap(phase[peak::-1])[::-1]
    return out


@dataclass(frozen=True)
class PhaseFit:
    """Weighted polynomial fit ``phase ~ sum_k coefficients[k] x^k``, ``x = w - omega_ref``.

    ``delay`` is the linear coefficient (s), ``phi2`` is twice the quadratic
    coefficient (so a chirp ``phi2 / 2 x^2`` is recovered as ``phi2``) and
    ``phi3`` is the cubic coefficient itself; all in SI units.
    """

    coefficients: np.ndarray
    omega_ref: float
    residual: float

    @property
    def delay(self):
        return float(self.coefficients[1]) if self.coefficients.size > 1 else 0.0

    @property
    def phi2(self):
        return 2.0 * float(self.coefficients[2]) if self.coefficients.size > 2 else 0.0

    @property
    def phi3(self):
        return float(self.coefficients[3]) if self.coefficients.size > 3 else 0.0


def fit_spectral_phase(v, omegas, max_degree=3, *, omega_ref=None, threshold=1e-3):
    """Fit the unwrapped spectral phase of ``v`` by ``|v|^2``-weighted least squares.

    Args:
        v: complex spectral amplitude on ``omegas``.
        omegas: angular frequencies (rad/s).
        max_degree: polynomial degree.
        omega_ref: expansion point; defaults to the ``|v|^2``-weighted mean.
        threshold: points with ``|v|^2`` below ``threshold * max |v|^2`` are ignored.

    Returns:
        PhaseFit.

    Raises:
        ValueError: too few points with appreciable amplitude.
    """
    v = np.asarray(v, dtype=complex)
    omegas = np.asarray(omegas, dtype=float)
    weight = np.abs(v) ** 2
    if weight.max() == 0:
        raise ValueError("degenerate support: mode amplitude vanishes")
    keep = weight > threshold * weight.max()
    if np.count_nonzero(keep) < max_degree + 1:
        raise ValueError("degenerate support: too few points above the amplitude threshold")
    if omega_ref is None:
        omega_ref = float(np.sum(weight * omegas) / np.sum(weight))
    idx = np.flatnonzero(keep)
    # unwrap only across the supported, contiguous-in-index samples
    phase = _unwrap_from_peak(np.angle(v[idx]), int(np.argmax(weight[idx])))
    x = (omegas[idx] - omega_ref) * _FS
    sw = np.sqrt(weight[idx])
    coef = P.polyfit(x, phase, max_degree, w=sw)
    resid = phase - P.polyval(x, coef)
    rms = float(np.sqrt(np.sum(weight[idx] * resid**2) / np.sum(weight[idx])))
    coef_si = coef * _FS ** np.arange(max_degree + 1)
    return PhaseFit(coef_si, float(omega_ref), rms)


def subtract_linear_phase(v, omegas, *, omega_ref=None, threshold=1e-3):
    """Remove the best-fit linear spectral phase (a pure delay).

    Returns:
        ``(delay, rephased)`` with ``rephased = v exp(-i delay (w - omega_ref))``.
    """
    fit = fit_spectral_phase(v, omegas, 1, omega_ref=omega_ref, threshold=threshold)
    omegas = np.asarray(omegas, dtype=float)
    rephased = np.asarray(v, dtype=complex) * np.exp(-1j * fit.delay * (omegas - fit.omega_ref))
    return fit.delay, rephased


# ---------------------------------------------------------------------------
# gain statistics


def schmidt_number(gains):
    """``(sum g^2)^2 / sum g^4``, the effective number of modes."""
    g2 = np.asarray(gains, dtype=float) ** 2
    s4 = np.sum(g2**2)
    if not s4 > 0:
        raise ValueError("Schmidt number undefined: all gains vanish")
    return float(np.sum(g2) ** 2 / s4)


def leading_squeezing_db(eta_t, lead_gain):
    """Squeezing of the leading supermode in dB, ``20 eta_t g / ln 10``."""
    return 20.0 * eta_t * lead_gain / np.log(10.0)


def eta_for_db(db, lead_gain):
    return db * np.log(10.0) / (20.0 * lead_gain)


# ---------------------------------------------------------------------------
# squeezing scan


@dataclass(frozen=True)
class SqueezingScanRow:
    eta_t: float
    leading_db: float
    mean_variance: float
    variances: np.ndarray
    thetas: np.ndarray


def squeezing_scan(L, frexels, graph, db_values, *, perm=None, phase_kwargs=None):
    """Mean nullifier variance as the interaction strength grows, shaper fixed.

    LO phases are re-optimized at every point.

    Args:
        L: coupling matrix of the (fixed) shaped pump.
        frexels: detection modes.
        graph: :class:`ClusterGraph`.
        db_values: leading-supermode squeezing levels (dB) to visit; 0 gives vacuum.
        perm: optional node assignment of the frexels.
        phase_kwargs: options for :func:`~spdc.modes.optimize_frexel_phases`.

    Returns:
        list of SqueezingScanRow.
    """
    graph = graph if isinstance(graph, ClusterGraph) else ClusterGraph(graph)
    phase_kwargs = {} if phase_kwargs is None else phase_kwargs
    svd = np.linalg.svd(np.asarray(L))
    lead = svd[1][0]
    rows = []
    for db in db_values:
        eta_t = eta_for_db(float(db), lead) if lead > 0 else 0.0
        gamma = mode_covariance_from_coupling(None, eta_t, frexels, svd=svd)
        if perm is not None:
            gamma = permute_covariance(gamma, perm)
        res = optimize_frexel_phases(gamma, graph, **phase_kwargs)
        rows.append(SqueezingScanRow(eta_t, float(db), res.mean_variance, res.variances, res.thetas))
    return rows


def scan_summary(rows):
    """Minimum of a squeezing scan and whether it dips below and rises above shot noise."""
    db = np.array([r.leading_db for r in rows])
    var = np.array([r.mean_variance for r in rows])
    i = int(np.argmin(var))
    below = np.flatnonzero(var < SHOT_NOISE)
    rises = bool(below.size and np.any(var[below[0]:] > SHOT_NOISE))
    return {"min_db": float(db[i]), "min_variance": float(var[i]), "dips_below": bool(below.size), "rises_above": rises}


# ---------------------------------------------------------------------------
# quasi-degenerate supermode combinations


@dataclass(frozen=True)
class OverlapResult:
    """Best real combination of ``K`` supermodes for a target mode."""

    K: int
    coefficients: np.ndarray
    overlap: float
    target: dict = field(default_factory=dict)


def gaussian_target_mode(omegas, center_wavelength, fwhm, delay=0.0):
    """Unit-norm Gaussian spectral mode with intensity FWHM ``fwhm`` (m) and optional delay (s)."""
    omegas = np.asarray(omegas, dtype=float)
    omega0 = 2.0 * np.pi * SPEED_OF_LIGHT / center_wavelength
    sigma = omega0**2 * fwhm / (2.0 * np.pi * SPEED_OF_LIGHT) * FWHM_TO_SIGMA
    t = np.exp(-((omegas - omega0) ** 2) / (4.0 * sigma**2)) * np.exp(1j * delay * (omegas - omega0))
    return t / np.linalg.norm(t)


def best_real_combination_overlap(target, supermodes, K=None, description=None):
    """Maximize ``|<sum_k c_k s_k, t>|`` over real unit vectors ``c``.

    With ``g_k = <s_k, t>``, ``a = Re g`` and ``b = Im g`` the squared overlap
    is ``c^T (a a^T + b b^T) c``, maximized by its top eigenvector.

    Args:
        target: unit-norm target mode ``t``.
        supermodes: rows are orthonormal supermodes.
        K: number of leading rows used (all by default).
    """
    S = np.atleast_2d(np.asarray(supermodes))
    K = S.shape[0] if K is None else int(K)
    if not 1 <= K <= S.shape[0]:
        raise ValueError("K must be between 1 and the number of supermodes")
    t = np.asarray(target, dtype=complex)
    g = S[:K].conj() @ t
    a, b = g.real, g.imag
    M = np.outer(a, a) + np.outer(b, b)
    w, vecs = np.linalg.eigh(M)
    c = vecs[:, -1]
    # fix the sign so the projection onto a (or b) is non-negative
    ref = c @ a if abs(c @ a) > abs(c @ b) else c @ b
    if ref < 0:
        c = -c
    return OverlapResult(K, c, float(np.sqrt(max(w[-1], 0.0))), dict(description or {}))
