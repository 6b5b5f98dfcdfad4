"""Scalar wave-optics simulation for mask-based lensless cameras.

Provides Fresnel transfer-function propagation, a brute-force spherical-wave
oracle, off-axis PSF simulation for phase masks, and PSF similarity analysis
across incidence angles.

Conventions
-----------
Fields use the exp(-j*w*t) time convention, so forward propagation over a
distance d carries the global phase exp(+j*k*d). Grids are uniform with a
single pixel pitch in meters; the DFT treats them as periodic.
"""

import warnings
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from . import _kernels

DEFAULT_ORACLE_LIMIT = 64


def _check_finite(arr, name):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")


@dataclass(frozen=True)
class WaveField:
    """Complex scalar wave field sampled on a uniform grid.

    Parameters
    ----------
    data : ndarray
        Complex amplitude per cell, shape (height, width).
    pitch : float
        Cell size (m).
    z : float
        Longitudinal position of the plane (m).
    """

    data: np.ndarray
    pitch: float
    z: float = 0.0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        if data.ndim != 2 or min(data.shape) < 2:
            raise ValueError("wave field must be 2-D with at least 2x2 cells")
        _check_finite(data, "wave field")
        if self.pitch <= 0:
            raise ValueError("pitch must be positive")
        object.__setattr__(self, "data", data)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    def energy(self):
        """Total |U|^2 over the grid."""
        return float(np.sum(np.abs(self.data) ** 2))


@dataclass(frozen=True)
class PhaseMask:
    """Thin phase-only mask: transmission exp(j*phase), unit amplitude."""

    phase: np.ndarray
    pitch: float

    def __post_init__(self):
        phase = np.asarray(self.phase, dtype=np.float64)
        if phase.ndim != 2 or min(phase.shape) < 2:
            raise ValueError("mask phase must be 2-D with at least 2x2 cells")
        _check_finite(phase, "mask phase")
        if self.pitch <= 0:
            raise ValueError("pitch must be positive")
        object.__setattr__(self, "phase", phase)

    def transmission(self):
        """Complex transmission exp(j*phase)."""
        return np.exp(1j * self.phase)


@dataclass(frozen=True)
class PropagationSpec:
    """Propagation geometry: distance and wavelength, both in meters."""

    distance: float
    wavelength: float

    def __post_init__(self):
        if self.distance <= 0:
            raise ValueError("distance must be positive")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")

    @property
    def wavenumber(self):
        return 2.0 * np.pi / self.wavelength


@dataclass(frozen=True)
class Psf:
    """Sensor-plane intensity pattern of a point source.

    ``theta`` is the (x, y) incidence angle pair in radians.
    """

    intensity: np.ndarray
    pitch: float
    theta: tuple = (0.0, 0.0)

    def __post_init__(self):
        intensity = np.asarray(self.intensity, dtype=np.float64)
        if intensity.ndim != 2:
            raise ValueError("PSF intensity must be 2-D")
        _check_finite(intensity, "PSF intensity")
        if np.any(intensity < 0):
            raise ValueError("PSF intensity must be nonnegative")
        object.__setattr__(self, "intensity", intensity)

    def energy(self):
        return float(np.sum(self.intensity))


def _fresnel_transfer(shape, pitch, spec):
    """Paraxial transfer function exp(jkd) * exp(-j*pi*lam*d*f^2)."""
    fy = np.fft.fftfreq(shape[0], d=pitch)
    fx = np.fft.fftfreq(shape[1], d=pitch)
    fsq = fy[:, None] ** 2 + fx[None, :] ** 2
    return np.exp(1j * spec.wavenumber * spec.distance) * np.exp(
        -1j * np.pi * spec.wavelength * spec.distance * fsq
    )


def fresnel_kernel_aliased(shape, pitch, spec):
    """True when the sampled Fresnel kernel wraps in frequency.

    The quadratic phase of the transfer function advances by
    pi * lam * d / (N * pitch^2) between adjacent frequency samples at the
    band edge; beyond pi per sample the kernel is undersampled.
    """
    n = min(shape)
    return spec.wavelength * spec.distance > n * pitch**2


def fresnel_propagate(field, spec, backward=False):
    """Propagate a field with the single-step Fresnel transfer function.

    Exact for band-limited periodic fields in the paraxial regime; unitary
    on the grid (|H| = 1), so the field energy is conserved. With
    ``backward=True`` the conjugate transfer function is applied, which is
    the exact inverse on the periodic grid.

    Parameters
    ----------
    field : WaveField
        Input field at plane z.
    spec : PropagationSpec
        Distance and wavelength.

    Returns
    -------
    WaveField at z + d (or z - d when backward).
    """
    if fresnel_kernel_aliased(field.data.shape, field.pitch, spec):
        warnings.warn(
            "Fresnel transfer function is aliased for this pitch/distance/"
            "wavelength (lam*d > N*pitch^2); high-frequency content will wrap",
            stacklevel=2,
        )
    transfer = _fresnel_transfer(field.data.shape, field.pitch, spec)
    if backward:
        transfer = np.conj(transfer)
    out = np.fft.ifft2(np.fft.fft2(field.data) * transfer)
    dz = -spec.distance if backward else spec.distance
    return WaveField(out, field.pitch, field.z + dz)


def angular_spectrum_transfer(shape, pitch, spec, tilt_freq=(0.0, 0.0),
                              remove_tilt_shift=False):
    """Exact (non-paraxial) transfer function, optionally tilt-shifted.

    H(f) = exp(j*k*d*sqrt(1 - lam^2*|f + f0|^2)); evanescent components
    (negative radicand) are zeroed. With a nonzero carrier frequency ``f0``
    this propagates the envelope of a field riding on the tilted plane wave
    exp(2*pi*j*(f0x*x + f0y*y)), which keeps off-axis simulations exact on
    the grid instead of sampling an aliased tilt.

    ``remove_tilt_shift`` subtracts the linear phase term at the carrier,
    cancelling the geometric lateral displacement d*tan(theta) so only the
    shape change of the propagated pattern remains.
    """
    fy = np.fft.fftfreq(shape[0], d=pitch) + tilt_freq[1]
    fx = np.fft.fftfreq(shape[1], d=pitch) + tilt_freq[0]
    radicand = 1.0 - (spec.wavelength * fy[:, None]) ** 2 \
                   - (spec.wavelength * fx[None, :]) ** 2
    propagating = radicand > 0
    phase = np.zeros(shape, dtype=np.float64)
    phase[propagating] = spec.wavenumber * spec.distance * np.sqrt(
        radicand[propagating]
    )
    if remove_tilt_shift:
        carrier_sq = 1.0 - (spec.wavelength * tilt_freq[0]) ** 2 \
                         - (spec.wavelength * tilt_freq[1]) ** 2
        if carrier_sq <= 0:
            raise ValueError("tilt carrier is evanescent")
        root = np.sqrt(carrier_sq)
        slope_x = -spec.wavenumber * spec.distance * spec.wavelength**2 \
            * tilt_freq[0] / root
        slope_y = -spec.wavenumber * spec.distance * spec.wavelength**2 \
            * tilt_freq[1] / root
        gy = np.fft.fftfreq(shape[0], d=pitch)
        gx = np.fft.fftfreq(shape[1], d=pitch)
        phase = phase - (slope_y * gy[:, None] + slope_x * gx[None, :])
    transfer = np.zeros(shape, dtype=np.complex128)
    transfer[propagating] = np.exp(1j * phase[propagating])
    return transfer


def direct_huygens_propagate(field, spec, limit=DEFAULT_ORACLE_LIMIT):
    """Brute-force spherical-wave propagation (the oracle path).

    Evaluates the superposition sum with the exact kernel
    d/(j*lam*r^2) * exp(j*k*r), r = sqrt(d^2 + dx^2 + dy^2), over every
    source cell. O(N^4): intended for small grids only. In the paraxial
    regime this validates ``fresnel_propagate``; outside it, it quantifies
    the paraxial mismatch.

    Raises
    ------
    ValueError
        If the grid exceeds ``limit`` cells per side.
    """
    if max(field.data.shape) > limit:
        raise ValueError(
            f"grid {field.data.shape} exceeds the direct-sum oracle limit "
            f"({limit} cells per side)"
        )
    out = _kernels.huygens_sum(
        field.data, field.pitch, spec.distance, spec.wavelength
    )
    return WaveField(out, field.pitch, field.z + spec.distance)


def simulate_psf(mask, theta_x, theta_y, spec, remove_tilt_shift=False):
    """Simulate the sensor PSF of a phase mask for a tilted point source.

    The source at infinity illuminates the mask with a plane wave tilted by
    (theta_x, theta_y); the field right after the mask is the tilt carrier
    times exp(j*phase). Propagation to the sensor uses the exact
    angular-spectrum transfer function evaluated at the tilt-shifted
    frequencies, so angles beyond the grid Nyquist tilt remain exact.

    ``remove_tilt_shift=True`` cancels the geometric PSF displacement
    d*tan(theta), returning the pattern in the frame that tracks the
    source, so only angle-dependent shape change remains (useful on small
    grids where the displacement would wrap).

    Returns
    -------
    Psf
        Squared magnitude of the sensor-plane field.
    """
    for theta in (theta_x, theta_y):
        if abs(theta) >= np.pi / 2:
            raise ValueError("incidence angle must satisfy |theta| < pi/2")
    tilt_freq = (
        np.sin(theta_x) / spec.wavelength,
        np.sin(theta_y) / spec.wavelength,
    )
    transfer = angular_spectrum_transfer(
        mask.phase.shape, mask.pitch, spec, tilt_freq,
        remove_tilt_shift=remove_tilt_shift,
    )
    sensor = np.fft.ifft2(np.fft.fft2(mask.transmission()) * transfer)
    return Psf(np.abs(sensor) ** 2, mask.pitch, (theta_x, theta_y))


def psf_similarity(a, b, registered=True):
    """Normalized inner product of two PSFs, in [-1, 1].

    With ``registered=True`` (default) the inner product is maximized over
    all cyclic shifts of ``b``, which removes the geometric translation of
    an off-axis PSF so that only shape change is measured. Equals 1 iff
    ``b`` is a (cyclically shifted, when registered) positive scaling of
    ``a``.
    """
    pa = np.asarray(a.intensity if isinstance(a, Psf) else a, dtype=np.float64)
    pb = np.asarray(b.intensity if isinstance(b, Psf) else b, dtype=np.float64)
    if pa.shape != pb.shape:
        raise ValueError("PSF grids must have equal shapes")
    norm_a = np.linalg.norm(pa)
    norm_b = np.linalg.norm(pb)
    if norm_a == 0 or norm_b == 0:
        raise ValueError("PSF similarity is undefined for zero-energy input")
    if registered:
        corr = np.fft.ifft2(np.fft.fft2(pa) * np.conj(np.fft.fft2(pb))).real
        value = float(np.max(corr)) / (norm_a * norm_b)
    else:
        value = float(np.sum(pa * pb)) / (norm_a * norm_b)
    return float(np.clip(value, -1.0, 1.0))


def similarity_sweep(mask, angles, spec, registered=True):
    """Similarity of off-axis PSFs against the on-axis PSF.

    Parameters
    ----------
    angles : sequence of float
        Incidence angles in radians (tilt along x).

    Returns
    -------
    list of (angle, similarity) tuples, in the order given.
    """
    angles = list(angles)
    if not angles:
        raise ValueError("angle list must be non-empty")
    reference = simulate_psf(mask, 0.0, 0.0, spec)
    rows = []
    for theta in angles:
        psf = simulate_psf(mask, theta, 0.0, spec)
        rows.append((theta, psf_similarity(reference, psf, registered)))
    return rows
