"""Frequency grid, Gaussian pump, chirp and pulse-shaper model.

The signal field is sampled on a uniform grid of ``N`` angular frequencies.
The coupling matrix only needs the pump at sums ``w_j + w_k``, so the pump
lives on its own uniform axis of ``2N - 1`` points with the same spacing.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.interpolate import CubicSpline

from .errors import DegenerateShaperError

FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform signal-frequency axis (rad/s) centred on ``omega0_signal``."""

    omegas: np.ndarray
    omega0_signal: float

    def __post_init__(self):
        omegas = np.asarray(self.omegas, dtype=float)
        if omegas.ndim != 1 or omegas.size < 2:
            raise ValueError("a frequency grid needs at least two points")
        steps = np.diff(omegas)
        if np.any(steps <= 0):
            raise ValueError("grid frequencies must be strictly increasing")
        if np.max(np.abs(steps - steps.mean())) > 1e-9 * steps.mean():
            raise ValueError("grid spacing must be uniform")
        object.__setattr__(self, "omegas", omegas)

    @property
    def n_points(self):
        return self.omegas.size

    @property
    def spacing(self):
        return (self.omegas[-1] - self.omegas[0]) / (self.n_points - 1)

    @property
    def wavelengths(self):
        return 2.0 * np.pi * SPEED_OF_LIGHT / self.omegas

    @property
    def pump_axis(self):
        """The ``2N - 1`` distinct values taken by ``w_j + w_k``."""
        m = np.arange(2 * self.n_points - 1)
        return 2.0 * self.omegas[0] + m * self.spacing


def build_grid(center_wavelength_signal, halfwidth_sigmas, sigma_omega, n_points):
    """Grid of ``n_points`` frequencies spanning ``+-halfwidth_sigmas * sigma_omega``.

    Args:
        center_wavelength_signal: degenerate signal wavelength in metres.
        halfwidth_sigmas: half-span in units of ``sigma_omega``.
        sigma_omega: frequency scale in rad/s, usually the pump's spectral
            standard deviation.
        n_points: number of grid points.
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    if not halfwidth_sigmas > 0 or not sigma_omega > 0:
        raise ValueError("grid half-width must be positive")
    omega0 = 2.0 * np.pi * SPEED_OF_LIGHT / center_wavelength_signal
    half = halfwidth_sigmas * sigma_omega
    return FrequencyGrid(omega0 + np.linspace(-half, half, n_points), omega0)


def sigma_omega_from_fwhm(delta_lambda_fwhm, lambda0):
    """Spectral standard deviation (rad/s) of ``|alpha|^2`` for an intensity FWHM in wavelength."""
    omega0 = 2.0 * np.pi * SPEED_OF_LIGHT / lambda0
    return omega0**2 * delta_lambda_fwhm / (2.0 * np.pi * SPEED_OF_LIGHT) * FWHM_TO_SIGMA


@dataclass(frozen=True)
class PumpProfile:
    """Complex pump amplitude sampled on ``axis`` (rad/s).

    ``omega0`` is the carrier the chirp and the shaper window refer to and
    ``sigma_omega`` the spectral width of the unshaped reference pulse.
    """

    axis: np.ndarray
    amplitudes: np.ndarray
    omega0: float
    sigma_omega: float

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != np.shape(self.axis):
            raise ValueError("pump amplitudes and axis differ in shape")
        if not np.all(np.isfinite(amps)):
            raise ValueError("pump amplitudes must be finite")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "axis", np.asarray(self.axis, dtype=float))

    @property
    def power(self):
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    @property
    def duration(self):
        """Fourier-limited rms duration ``1 / (2 sigma_omega)`` in seconds."""
        return 0.5 / self.sigma_omega

    def normalized(self):
        return replace(self, amplitudes=self.amplitudes / np.sqrt(self.power))


def gaussian_pump(grid, delta_lambda_fwhm, lambda0):
    """Transform-limited Gaussian pump with unit discrete L2 norm."""
    if not delta_lambda_fwhm > 0:
        raise ValueError("delta_lambda_fwhm must be positive")
    omega0 = 2.0 * np.pi * SPEED_OF_LIGHT / lambda0
    sigma = sigma_omega_from_fwhm(delta_lambda_fwhm, lambda0)
    axis = grid.pump_axis
    amps = np.exp(-((axis - omega0) ** 2) / (4.0 * sigma**2))
    return PumpProfile(axis, amps, omega0, sigma).normalized()


def apply_chirp(pump, phi2):
    """Add the quadratic spectral phase ``phi2 / 2 (w - w0)^2`` (``phi2`` in s^2)."""
    if phi2 == 0:
        return pump
    phase = np.exp(0.5j * phi2 * (pump.axis - pump.omega0) ** 2)
    return replace(pump, amplitudes=pump.amplitudes * phase)


def chirped_duration(duration, phi2):
    """Rms duration of a Gaussian pulse of rms duration ``duration`` after chirp ``phi2``."""
    return duration * np.sqrt(1.0 + (phi2 / (2.0 * duration**2)) ** 2)


def chirp_for_stretch(duration, stretch):
    """Chirp ``phi2 >= 0`` that stretches a pulse of rms ``duration`` by ``stretch``."""
    if stretch < 1:
        raise ValueError("stretch factor must be >= 1")
    return 2.0 * duration**2 * np.sqrt(stretch**2 - 1.0)


def temporal_rms_width(pump, oversample=8):
    """Rms width of ``|FT alpha|^2`` in seconds, computed by zero-padded FFT."""
    amps = pump.amplitudes
    n = amps.size * oversample
    dw = pump.axis[1] - pump.axis[0]
    field_t = np.fft.fftshift(np.fft.fft(amps, n))
    t = np.fft.fftshift(np.fft.fftfreq(n, d=dw / (2.0 * np.pi)))
    weight = np.abs(field_t) ** 2
    weight /= weight.sum()
    mean = np.sum(t * weight)
    return float(np.sqrt(np.sum((t - mean) ** 2 * weight)))


@dataclass(frozen=True)
class ShaperConfig:
    """Pulse shaper with ``n_control`` amplitude and phase set points.

    ``u`` holds the amplitude controls followed by the phase controls. The
    control frequencies are spread uniformly across
    ``omega0 +- window_halfwidth_sigmas * sigma_omega`` of the base pump.
    """

    n_control: int = 32
    window_halfwidth_sigmas: float = 3.0
    u: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.n_control < 2:
            raise ValueError("the shaper needs at least two control points")
        if not self.window_halfwidth_sigmas > 0:
            raise ValueError("shaper window must have positive width")
        u = self.u
        if u is None:
            u = np.concatenate([np.ones(self.n_control), np.zeros(self.n_control)])
        u = np.asarray(u, dtype=float)
        if u.shape != (2 * self.n_control,):
            raise ValueError(f"shaper parameters must have length {2 * self.n_control}")
        if not np.all(np.isfinite(u)):
            raise ValueError("shaper parameters must be finite")
        if np.any(u[: self.n_control] < 0):
            raise ValueError("amplitude controls must be non-negative")
        object.__setattr__(self, "u", u)

    @classmethod
    def identity(cls, n_control=32, window_halfwidth_sigmas=3.0):
        return cls(n_control, window_halfwidth_sigmas)

    @property
    def amplitude_controls(self):
        return self.u[: self.n_control]

    @property
    def phase_controls(self):
        return self.u[self.n_control :]

    def with_params(self, u):
        return replace(self, u=np.asarray(u, dtype=float))

    def control_frequencies(self, omega0, sigma_omega):
        half = self.window_halfwidth_sigmas * sigma_omega
        return np.linspace(omega0 - half, omega0 + half, self.n_control)

    def transfer(self, omega, omega0, sigma_omega):
        """Complex transfer function at ``omega``.

        Natural cubic splines through the amplitude and phase set points;
        outside the window both are held at the edge control values.
        """
        nodes = self.control_frequencies(omega0, sigma_omega)
        omega = np.clip(np.asarray(omega, dtype=float), nodes[0], nodes[-1])
        amp = CubicSpline(nodes, self.amplitude_controls, bc_type="natural")(omega)
        phase = CubicSpline(nodes, self.phase_controls, bc_type="natural")(omega)
        return amp * np.exp(1j * phase)


def shaper_transfer(base, shaper):
    """Transfer function of ``shaper`` sampled on the pump axis of ``base``."""
    return shaper.transfer(base.axis, base.omega0, base.sigma_omega)


def shaped_pump(base, shaper):
    """``base`` multiplied by the shaper transfer; not renormalised."""
    return replace(base, amplitudes=base.amplitudes * shaper_transfer(base, shaper))


def power_weight(base, transfer, transfer_max=None):
    """Transmitted power relative to ``base``, rescaled by the peak transfer squared."""
    transfer = np.asarray(transfer)
    peak = np.max(np.abs(transfer)) if transfer_max is None else transfer_max
    if not peak > 0:
        raise DegenerateShaperError("degenerate shaper: transfer function vanishes")
    shaped_power = np.sum(np.abs(base.amplitudes * transfer) ** 2)
    return float(shaped_power / (peak**2 * base.power))


def pump_power_weight(shaper, base):
    """Power weight ``w(u)`` of a shaper setting, with ``m(u)`` the peak of ``|I(w)|``.

    The peak is taken over the pump-axis samples and the control values, so
    node values are always included exactly.
    """
    transfer = shaper_transfer(base, shaper)
    nodes = np.abs(shaper.amplitude_controls)
    peak = max(np.max(np.abs(transfer)), np.max(nodes))
    return power_weight(base, transfer, peak)
