"""Phase-mask design: gradient-noise contour targets and near-field phase retrieval.

A target PSF is drawn as the blurred level-set band of 2-D gradient noise;
the mask phase is then optimized with an alternating-projection loop so that
the near-field diffraction intensity of the unit-amplitude mask matches the
target at the sensor plane.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .optics import PhaseMask, PropagationSpec, WaveField, fresnel_propagate


@dataclass(frozen=True)
class TargetPsf:
    """Desired sensor-plane intensity, normalized to unit total energy."""

    intensity: np.ndarray
    pitch: float

    def __post_init__(self):
        intensity = np.asarray(self.intensity, dtype=np.float64)
        if intensity.ndim != 2 or min(intensity.shape) < 16:
            raise ValueError("target PSF must be 2-D with at least 16x16 cells")
        if np.any(intensity < 0) or not np.all(np.isfinite(intensity)):
            raise ValueError("target PSF must be nonnegative and finite")
        total = intensity.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValueError("target PSF must be normalized to unit energy")
        object.__setattr__(self, "intensity", intensity)


@dataclass(frozen=True)
class NfprConfig:
    """Settings for the alternating-projection mask optimization."""

    iterations: int
    distance: float
    wavelength: float
    seed: int

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.distance <= 0 or self.wavelength <= 0:
            raise ValueError("distance and wavelength must be positive")


def gradient_noise(shape, scale, seed):
    """Classic 2-D gradient (Perlin-style) noise, single octave.

    Random unit gradients sit on a lattice with ``scale`` cells per lattice
    unit; values are corner-dot-products blended with the quintic fade.
    Deterministic given ``seed``.
    """
    h, w = shape
    if scale <= 0:
        raise ValueError("noise scale must be positive")
    ny = int(np.ceil(h / scale)) + 1
    nx = int(np.ceil(w / scale)) + 1
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=(ny, nx))
    grad_y = np.sin(theta)
    grad_x = np.cos(theta)

    ys = np.arange(h) / scale
    xs = np.arange(w) / scale
    iy = np.floor(ys).astype(int)
    ix = np.floor(xs).astype(int)
    fy = (ys - iy)[:, None]
    fx = (xs - ix)[None, :]

    def corner(dy, dx):
        gx = grad_x[np.ix_(iy + dy, ix + dx)]
        gy = grad_y[np.ix_(iy + dy, ix + dx)]
        return gx * (fx - dx) + gy * (fy - dy)

    n00 = corner(0, 0)
    n01 = corner(0, 1)
    n10 = corner(1, 0)
    n11 = corner(1, 1)

    def fade(t):
        return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)

    uy = fade(fy)
    ux = fade(fx)
    top = n00 + ux * (n01 - n00)
    bottom = n10 + ux * (n11 - n10)
    return top + uy * (bottom - top)


def perlin_contour_psf(width, height, pitch, seed, contour_level=0.5,
                       noise_scale=48.0, band_width=0.01, blur_sigma=1.0):
    """Build a target PSF from the level-set band of gradient noise.

    The band ``|noise - level| < band_width`` (both expressed as fractions
    of the realized noise range) is extracted as a binary contour map,
    blurred with a small Gaussian, and normalized to unit energy.

    Raises
    ------
    ValueError
        If the chosen level/band yields an empty contour; retry with a
        different seed or level.
    """
    if width < 16 or height < 16:
        raise ValueError("target PSF grids must be at least 16x16")
    noise = gradient_noise((height, width), noise_scale, seed)
    lo, hi = float(noise.min()), float(noise.max())
    level = lo + contour_level * (hi - lo)
    band = band_width * (hi - lo)
    contour = (np.abs(noise - level) < band).astype(np.float64)
    if contour.sum() == 0:
        raise ValueError(
            "contour band is empty; retry with a new seed or contour level"
        )
    blurred = ndimage.gaussian_filter(contour, blur_sigma)
    return TargetPsf(blurred / blurred.sum(), pitch)


def nfpr_optimize(target, config):
    """Optimize a phase mask so its propagated intensity matches ``target``.

    Alternating projections between the mask and sensor planes: propagate
    the unit-amplitude mask field forward, impose the target magnitude at
    the sensor (keeping phase), propagate backward with the conjugate
    transfer function, and restore unit amplitude at the mask (keeping
    phase). The unit-energy target is internally rescaled to the aperture
    energy (cell count) so intensities at the two planes are commensurate.

    Returns
    -------
    (PhaseMask, list of float)
        The optimized mask and the relative intensity residual
        ``||, |U|^2 - t ||_2 / ||t||_2`` per iteration; entry 0 is the
        initial random mask, the last entry is the returned mask.
    """
    shape = target.intensity.shape
    npix = shape[0] * shape[1]
    scaled = target.intensity * npix
    amplitude = np.sqrt(scaled)
    scaled_norm = np.linalg.norm(scaled)
    spec = PropagationSpec(config.distance, config.wavelength)

    rng = np.random.default_rng(config.seed)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=shape)
    residuals = []
    for _ in range(config.iterations):
        mask_field = WaveField(np.exp(1j * phase), target.pitch)
        sensor = fresnel_propagate(mask_field, spec).data
        residuals.append(
            float(np.linalg.norm(np.abs(sensor) ** 2 - scaled) / scaled_norm)
        )
        constrained = amplitude * np.exp(1j * np.angle(sensor))
        back = fresnel_propagate(
            WaveField(constrained, target.pitch), spec, backward=True
        ).data
        phase = np.angle(back)

    mask_field = WaveField(np.exp(1j * phase), target.pitch)
    sensor = fresnel_propagate(mask_field, spec).data
    residuals.append(
        float(np.linalg.norm(np.abs(sensor) ** 2 - scaled) / scaled_norm)
    )
    return PhaseMask(phase, target.pitch), residuals
