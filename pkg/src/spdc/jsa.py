"""Joint spectral coupling matrix ``L_jk = sinc(phi(w_j, w_k)) alpha(w_j + w_k)``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dispersion import BIBO, phase_mismatch
from .errors import ConfigError

_SERIES_CUTOFF = 1e-4


def sinc(x):
    """Unnormalised ``sin(x) / x`` with a Taylor branch near zero."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < _SERIES_CUTOFF
    xs = x[small]
    x2 = xs * xs
    out[small] = 1.0 - x2 / 6.0 + x2 * x2 / 120.0
    xl = x[~small]
    out[~small] = np.sin(xl) / xl
    return out


def hankel_indices(n):
    """``idx[j, k] = j + k``, the pump-axis index of ``w_j + w_k``."""
    j = np.arange(n)
    return j[:, None] + j[None, :]


def phase_matching_matrix(grid, crystal, coeffs=BIBO):
    """``sinc(phi(w_j, w_k))`` on the grid; exactly symmetric."""
    wj = grid.omegas[:, None]
    wk = grid.omegas[None, :]
    return sinc(phase_mismatch(wj, wk, crystal, coeffs))


def _check_coverage(grid, pump):
    expected = grid.pump_axis
    if pump.axis.shape != expected.shape or not np.allclose(
        pump.axis, expected, rtol=0, atol=1e-6 * grid.spacing
    ):
        raise ConfigError(
            "pump axis does not cover the sums w_j + w_k of the grid "
            f"(need {expected.size} points spaced {grid.spacing:.6g} rad/s)"
        )


@dataclass(frozen=True)
class JointSpectralMatrix:
    """Coupling matrix ``L`` together with the grid and pump it came from."""

    L: np.ndarray
    grid: object
    pump: object

    @property
    def n(self):
        return self.L.shape[0]


def assemble(phase_matching, pump_amplitudes):
    """Combine a precomputed phase-matching matrix with pump samples on the sum axis."""
    n = phase_matching.shape[0]
    amps = np.asarray(pump_amplitudes)
    if amps.shape != (2 * n - 1,):
        raise ConfigError(f"expected {2 * n - 1} pump samples, got {amps.shape}")
    return phase_matching * amps[hankel_indices(n)]


def build_jsa(grid, pump, crystal, coeffs=BIBO, phase_matching=None):
    """Assemble ``L`` for ``pump`` on ``grid``.

    ``phase_matching`` may be passed to reuse the sinc factor across pumps,
    which is what the optimizers do.
    """
    _check_coverage(grid, pump)
    if phase_matching is None:
        phase_matching = phase_matching_matrix(grid, crystal, coeffs)
    return JointSpectralMatrix(assemble(phase_matching, pump.amplitudes), grid, pump)


def total_gain_invariant(L):
    """``sum_jk |L_jk|^2``, equal to the sum of squared gains."""
    L = getattr(L, "L", L)
    return float(np.sum(np.abs(np.asarray(L)) ** 2))


def dump_binary(L, path):
    """Write ``L`` row-major as little-endian (re, im) float64 pairs."""
    L = getattr(L, "L", L)
    np.ascontiguousarray(L, dtype="<c16").tofile(path)


def load_binary(path, n):
    return np.fromfile(path, dtype="<c16").reshape(n, n)


def dump_abs_csv(L, grid, path):
    """``|L_jk|`` as CSV (one row per ``j``, header of grid frequencies) for heatmaps."""
    from .io import write_csv

    L = getattr(L, "L", L)
    absL = np.abs(np.asarray(L))
    header = ["omega_j"] + [f"{w:.17g}" for w in grid.omegas]
    return write_csv(path, header, ([w] + list(row) for w, row in zip(grid.omegas, absL)))
