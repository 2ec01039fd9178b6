"""BiBO dispersion: Sellmeier indices, Type I phase matching and phase mismatch.

Wavelengths passed to the Sellmeier functions are in micrometres; everything
else (crystal length, pump wavelength, angular frequencies) is SI.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .errors import DomainError, PhaseMatchingError

AXES = ("x", "y", "z")

# Sellmeier validity window (micrometres)
WAVELENGTH_MIN_UM = 0.3
WAVELENGTH_MAX_UM = 1.1


@dataclass(frozen=True)
class SellmeierCoefficients:
    """Per-axis coefficients of ``n^2 = A + B / (lambda^2 - C) - D lambda^2``.

    ``table`` maps each of ``"x"``, ``"y"``, ``"z"`` to a tuple ``(A, B, C, D)``
    with ``B``, ``C`` in um^2 and ``D`` in um^-2. ``B = D = 0`` is allowed so
    that dispersionless toy media can be described.
    """

    table: dict = field(default_factory=dict)

    def __post_init__(self):
        if set(self.table) != set(AXES):
            raise ValueError(f"Sellmeier table needs exactly the axes {AXES}, got {sorted(self.table)}")
        for axis, coeffs in self.table.items():
            if len(coeffs) != 4:
                raise ValueError(f"axis {axis!r}: expected 4 coefficients, got {len(coeffs)}")
            if not all(np.isfinite(v) for v in coeffs):
                raise ValueError(f"axis {axis!r}: coefficients must be finite")
            A, B, C, D = coeffs
            if not (A > 0 and B >= 0 and C >= 0 and D >= 0):
                raise ValueError(f"axis {axis!r}: need A > 0 and B, C, D >= 0")

    def __getitem__(self, axis):
        return self.table[axis]

    @classmethod
    def from_mapping(cls, mapping):
        return cls({axis: tuple(float(v) for v in mapping[axis]) for axis in mapping})

    def to_mapping(self):
        return {axis: list(self.table[axis]) for axis in AXES}


BIBO = SellmeierCoefficients(
    {
        "x": (3.07403, 0.03231, 0.03163, 0.013376),
        "y": (3.16940, 0.03717, 0.03483, 0.01827),
        "z": (3.6545, 0.05112, 0.03713, 0.02261),
    }
)


@dataclass(frozen=True)
class CrystalConfig:
    """Collinear Type I crystal geometry.

    Attributes:
        length_l: crystal length in metres.
        theta: phase-matching angle in radians.
        pump_central_wavelength: pump central wavelength in metres.
        phi_angle: azimuthal angle; fixed to pi/2 for the e+e->o process.
    """

    length_l: float
    theta: float
    pump_central_wavelength: float
    phi_angle: float = np.pi / 2

    def __post_init__(self):
        if not self.length_l > 0:
            raise ValueError("crystal length must be positive")
        if not 0.0 <= self.theta <= np.pi:
            raise ValueError("theta must lie in [0, pi]")
        if not self.pump_central_wavelength > 0:
            raise ValueError("pump central wavelength must be positive")

    @classmethod
    def phase_matched(cls, length_l, pump_central_wavelength, coeffs=BIBO):
        """Crystal cut at the angle that phase-matches degenerate SPDC."""
        theta = solve_phase_matching_angle(pump_central_wavelength, coeffs)
        return cls(length_l=length_l, theta=theta, pump_central_wavelength=pump_central_wavelength)


def _check_window(lam_um):
    lam = np.asarray(lam_um, dtype=float)
    if np.any(~np.isfinite(lam)) or np.any(lam < WAVELENGTH_MIN_UM) or np.any(lam > WAVELENGTH_MAX_UM):
        raise DomainError(
            f"wavelength outside the Sellmeier window [{WAVELENGTH_MIN_UM}, {WAVELENGTH_MAX_UM}] um"
        )
    return lam


def sellmeier_index(axis, lam_um, coeffs=BIBO):
    """Principal refractive index along ``axis`` at vacuum wavelength ``lam_um`` (um).

    Accepts scalars or arrays; raises :class:`DomainError` outside the
    validity window or when the radicand is not positive.
    """
    lam = _check_window(lam_um)
    A, B, C, D = coeffs[axis]
    lam2 = lam * lam
    if np.any(lam2 <= C):
        raise DomainError("wavelength at or below the Sellmeier pole")
    radicand = A + B / (lam2 - C) - D * lam2
    if np.any(radicand <= 0):
        raise DomainError("negative Sellmeier radicand")
    n = np.sqrt(radicand)
    return float(n) if np.ndim(n) == 0 else n


def extraordinary_index(lam_um, theta, coeffs=BIBO):
    """Index seen by a wave polarised in the yz plane at polar angle ``theta``."""
    ny = sellmeier_index("y", lam_um, coeffs)
    nz = sellmeier_index("z", lam_um, coeffs)
    inv2 = np.cos(theta) ** 2 / ny**2 + np.sin(theta) ** 2 / nz**2
    return inv2 ** -0.5


def _matching_residual(theta, pump_um, coeffs):
    return extraordinary_index(2.0 * pump_um, theta, coeffs) - sellmeier_index("x", pump_um, coeffs)


def solve_phase_matching_angle(pump_central_wavelength, coeffs=BIBO, *, xtol=1e-12):
    """Angle in (pi/2, pi) where the degenerate signal index equals the pump index.

    Plain bisection on the bracket so the result is reproducible bit for bit.
    A bracket with zero residual at every point (isotropic toy coefficients)
    returns the bracket midpoint.

    Raises:
        PhaseMatchingError: the residual does not change sign on the bracket.
    """
    pump_um = pump_central_wavelength * 1e6
    try:
        _check_window(pump_um)
        _check_window(2.0 * pump_um)
    except DomainError as exc:
        raise PhaseMatchingError(
            f"not phase-matchable: pump at {pump_central_wavelength:g} m is outside the dispersion model"
        ) from exc

    lo, hi = np.pi / 2, np.pi
    f_lo = _matching_residual(lo, pump_um, coeffs)
    f_hi = _matching_residual(hi, pump_um, coeffs)
    if f_lo == 0.0 and f_hi == 0.0:
        return 0.5 * (lo + hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise PhaseMatchingError(
            f"not phase-matchable: no sign change of n_e(2 lambda_p) - n_x(lambda_p) "
            f"on (pi/2, pi) for lambda_p = {pump_central_wavelength:g} m"
        )
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        f_mid = _matching_residual(mid, pump_um, coeffs)
        if f_mid == 0.0:
            return mid
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _wavelength_um(omega):
    return 2.0 * np.pi * SPEED_OF_LIGHT / np.asarray(omega, dtype=float) * 1e6


def pump_wavenumber(omega, coeffs=BIBO):
    """Wave number (rad/m) of the x-polarised pump."""
    omega = np.asarray(omega, dtype=float)
    return omega * sellmeier_index("x", _wavelength_um(omega), coeffs) / SPEED_OF_LIGHT


def signal_wavenumber(omega, theta, coeffs=BIBO):
    """Wave number (rad/m) of the extraordinary signal/idler."""
    omega = np.asarray(omega, dtype=float)
    return omega * extraordinary_index(_wavelength_um(omega), theta, coeffs) / SPEED_OF_LIGHT


def phase_mismatch(omega_j, omega_k, crystal, coeffs=BIBO):
    """``(k_p(w_j + w_k) - k_s(w_j) - k_s(w_k)) * l / 2`` in radians.

    Broadcasts over array arguments.
    """
    omega_j = np.asarray(omega_j, dtype=float)
    omega_k = np.asarray(omega_k, dtype=float)
    # k_s(w_j) + k_s(w_k) commutes bitwise, so the result is exactly symmetric
    dk = pump_wavenumber(omega_j + omega_k, coeffs) - (
        signal_wavenumber(omega_j, crystal.theta, coeffs) + signal_wavenumber(omega_k, crystal.theta, coeffs)
    )
    return dk * crystal.length_l / 2.0
