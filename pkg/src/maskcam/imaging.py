"""Forward lensless imaging models and sensor effects.

Implements the simulated capture pipeline
``y = C(h * x) + n`` (linear convolution, centered sensor crop, additive
noise at a prescribed SNR, fixed-point quantization) plus its spatially
varying multi-kernel generalization and an explicit dense-matrix form of
any noise-free linear forward map for desk-scale verification.

Alignment conventions used throughout the toolkit: a kernel grid of side h
has its center at index (h - 1) // 2, and "centered" crops and pads place
content with a floor((big - small) / 2) offset. With these two choices a
centered delta kernel makes convolution, cropping, and deconvolution
round-trip exactly for both even and odd kernel sizes.
"""

from dataclasses import dataclass

import numpy as np

from .optics import Psf

MAX_DENSE_CELLS = 4096


@dataclass(frozen=True)
class Measurement:
    """Sensor measurement: nonnegative grid, optionally quantized.

    ``bit_depth`` is None for continuous measurements; quantized values are
    integers in [0, 2**bit_depth - 1] stored as floats, with ``scale`` the
    physical value mapped to full code.
    """

    pixels: np.ndarray
    bit_depth: int | None = None
    scale: float | None = None

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float64)
        if pixels.ndim != 2:
            raise ValueError("measurement must be 2-D")
        if not np.all(np.isfinite(pixels)):
            raise ValueError("measurement contains non-finite values")
        if np.any(pixels < 0):
            raise ValueError("measurement must be nonnegative")
        object.__setattr__(self, "pixels", pixels)

    def physical(self):
        """Pixels mapped back to physical units (undo the code scaling)."""
        if self.bit_depth is None or self.scale is None:
            return self.pixels
        return self.pixels * (self.scale / (2.0**self.bit_depth - 1.0))


@dataclass(frozen=True)
class ForwardSpec:
    """Sensor-stage settings shared by the capture pipelines."""

    crop: tuple | None = None
    pad_factor: float = 2.0
    noise_snr_db: float | None = 30.0
    quant_bits: int | None = 12
    seed: int = 0
    quant_scale: float | None = None

    def __post_init__(self):
        if self.pad_factor < 1:
            raise ValueError("pad factor must be >= 1")
        if self.quant_bits is not None and not 1 <= self.quant_bits <= 16:
            raise ValueError("quantization depth must be in [1, 16]")


@dataclass(frozen=True)
class LinearOperator:
    """Dense matrix form of a linear imaging map at desk scale."""

    matrix: np.ndarray
    scene_shape: tuple
    sensor_shape: tuple

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=np.float64)
        sensor_cells = self.sensor_shape[0] * self.sensor_shape[1]
        scene_cells = self.scene_shape[0] * self.scene_shape[1]
        if matrix.shape != (sensor_cells, scene_cells):
            raise ValueError("matrix shape inconsistent with grid dims")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("operator matrix contains non-finite values")
        object.__setattr__(self, "matrix", matrix)

    def apply(self, scene):
        """Matrix-vector product, scene grid in, sensor grid out."""
        scene = np.asarray(scene, dtype=np.float64)
        if scene.shape != self.scene_shape:
            raise ValueError("scene dims do not match operator")
        return (self.matrix @ scene.ravel()).reshape(self.sensor_shape)


def validate_scene(x):
    """Check a scene grid: 2-D, finite, values in [0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("scene must be 2-D")
    if not np.all(np.isfinite(x)):
        raise ValueError("scene contains non-finite values")
    if x.min() < 0.0 or x.max() > 1.0:
        raise ValueError("scene values must lie in [0, 1]")
    return x


def kernel_center(shape):
    """Grid center of a kernel: ((h - 1) // 2, (w - 1) // 2)."""
    return ((shape[0] - 1) // 2, (shape[1] - 1) // 2)


def centered_crop(arr, crop_shape):
    """Crop the centered ``crop_shape`` region (floor offsets)."""
    ch, cw = crop_shape
    h, w = arr.shape
    if ch > h or cw > w:
        raise ValueError(f"crop {crop_shape} larger than grid {arr.shape}")
    top = (h - ch) // 2
    left = (w - cw) // 2
    return arr[top : top + ch, left : left + cw]


def centered_embed(arr, big_shape):
    """Adjoint of ``centered_crop``: zero-pad ``arr`` into ``big_shape``."""
    h, w = arr.shape
    bh, bw = big_shape
    if h > bh or w > bw:
        raise ValueError("array larger than embedding target")
    out = np.zeros(big_shape, dtype=arr.dtype)
    top = (bh - h) // 2
    left = (bw - w) // 2
    out[top : top + h, left : left + w] = arr
    return out


def linear_convolve(x, h):
    """Full linear convolution via zero-padded FFTs.

    Output size is (xh + hh - 1, xw + hw - 1); never circular, so sensor
    cropping sees genuine spill-over.
    """
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    out_shape = (x.shape[0] + h.shape[0] - 1, x.shape[1] + h.shape[1] - 1)
    fx = np.fft.rfft2(x, out_shape)
    fh = np.fft.rfft2(h, out_shape)
    return np.fft.irfft2(fx * fh, out_shape)


def add_noise_for_snr(signal, snr_db, seed):
    """Additive white Gaussian noise scaled to an exact empirical SNR.

    The realization is scaled so that 10*log10(||signal||^2 / ||noise||^2)
    equals ``snr_db`` exactly; deterministic given ``seed``.
    """
    signal = np.asarray(signal, dtype=np.float64)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(signal.shape)
    signal_norm = np.linalg.norm(signal)
    noise_norm = np.linalg.norm(noise)
    if signal_norm == 0 or noise_norm == 0:
        return signal.copy()
    scale = signal_norm / (noise_norm * 10.0 ** (snr_db / 20.0))
    return signal + scale * noise


def quantize(y, bits, scale=None):
    """Uniform quantization to ``bits`` with round-half-up.

    ``scale`` is the value mapped to full code 2**bits - 1; it defaults to
    the per-capture maximum. Values are clipped to [0, scale] first, so the
    result is idempotent and always integer-valued in [0, 2**bits - 1].
    """
    if not 1 <= bits <= 16:
        raise ValueError("quantization depth must be in [1, 16]")
    y = np.asarray(y, dtype=np.float64)
    full_code = 2.0**bits - 1.0
    if scale is None:
        scale = float(y.max())
    if scale <= 0:
        return np.zeros_like(y)
    clipped = np.clip(y, 0.0, scale)
    return np.floor(clipped / scale * full_code + 0.5)


def conv_forward(x, h, crop=None, quant_bits=None, noise_snr_db=None,
                 seed=0, quant_scale=None):
    """Shift-invariant capture: linear convolution, crop, noise, quantize.

    Parameters
    ----------
    x : ndarray
        Scene grid in [0, 1].
    h : Psf or ndarray
        Forward PSF, center at (h - 1) // 2 per axis.
    crop : (int, int) or None
        Centered sensor size; None keeps the full convolution output.
    quant_bits, noise_snr_db : optional sensor stages, applied in the
        order noise-then-quantize.
    quant_scale : float or None
        Full-scale value for the quantizer; None uses the per-capture max.

    Deterministic given ``seed``.
    """
    x = validate_scene(x)
    kernel = h.intensity if isinstance(h, Psf) else np.asarray(h, dtype=np.float64)
    y = linear_convolve(x, kernel)
    if crop is not None:
        y = centered_crop(y, crop)
    if noise_snr_db is not None:
        y = add_noise_for_snr(y, noise_snr_db, seed)
    y = np.clip(y, 0.0, None)
    bit_depth = scale = None
    if quant_bits is not None:
        scale = float(y.max()) if quant_scale is None else quant_scale
        y = quantize(y, quant_bits, scale=scale)
        bit_depth = quant_bits
    return Measurement(y, bit_depth, scale)


def sv_forward(x, psfs, crop=None, quant_bits=None, noise_snr_db=None,
               seed=0, quant_scale=None, weights=None):
    """Spatially varying capture: y = C(sum_i h_i * (w_i . x)) + n.

    Each region kernel convolves the scene masked by its interpolation
    weight map; the weight maps sum to one pointwise, so identical kernels
    collapse this to ``conv_forward``. Linear in ``x`` before the sensor
    stages.

    Parameters
    ----------
    psfs : PsfSet
        Spatial-domain forward kernels (see maskcam.recon.PsfSet).
    weights : WeightField or None
        Precomputed inverse-distance weight maps; derived from the PsfSet
        focal centers when None.
    """
    x = validate_scene(x)
    if psfs.domain != "spatial":
        raise ValueError("sv_forward needs spatial-domain forward kernels")
    if weights is None:
        from .recon import compute_weights

        weights = compute_weights(x.shape, psfs.centers)
    if weights.maps.shape[0] != psfs.kernels.shape[0]:
        raise ValueError("weight map count does not match kernel count")
    if weights.maps.shape[1:] != x.shape:
        raise ValueError("weight maps do not cover the scene grid")
    acc = None
    for kernel, wmap in zip(psfs.kernels, weights.maps):
        contribution = linear_convolve(wmap * x, kernel.real)
        acc = contribution if acc is None else acc + contribution
    y = acc
    if crop is not None:
        y = centered_crop(y, crop)
    if noise_snr_db is not None:
        y = add_noise_for_snr(y, noise_snr_db, seed)
    y = np.clip(y, 0.0, None)
    bit_depth = scale = None
    if quant_bits is not None:
        scale = float(y.max()) if quant_scale is None else quant_scale
        y = quantize(y, quant_bits, scale=scale)
        bit_depth = quant_bits
    return Measurement(y, bit_depth, scale)


def replicate_pad(y, factor):
    """Edge-replicated padding to ``factor`` times each dimension.

    The original content stays centered (floor offsets), so a factor-2 pad
    followed by a centered crop to the original size is the identity.
    """
    if factor < 1:
        raise ValueError("pad factor must be >= 1")
    pixels = y.pixels if isinstance(y, Measurement) else np.asarray(y, dtype=np.float64)
    h, w = pixels.shape
    nh, nw = int(round(factor * h)), int(round(factor * w))
    top = (nh - h) // 2
    left = (nw - w) // 2
    padded = np.pad(pixels, ((top, nh - h - top), (left, nw - w - left)),
                    mode="edge")
    if isinstance(y, Measurement):
        return Measurement(padded, y.bit_depth, y.scale)
    return padded


def build_matrix(forward, scene_shape, sensor_shape):
    """Materialize a noise-free linear forward map as a dense matrix.

    Column j is the forward image of the j-th standard-basis scene.
    Guarded to at most 4096 scene cells and 4096 sensor cells.
    """
    scene_cells = scene_shape[0] * scene_shape[1]
    sensor_cells = sensor_shape[0] * sensor_shape[1]
    if scene_cells > MAX_DENSE_CELLS or sensor_cells > MAX_DENSE_CELLS:
        raise ValueError(
            f"dense operator guard exceeded: {sensor_cells} x {scene_cells} "
            f"(limit {MAX_DENSE_CELLS} cells per side)"
        )
    matrix = np.empty((sensor_cells, scene_cells), dtype=np.float64)
    basis = np.zeros(scene_shape, dtype=np.float64)
    for j in range(scene_cells):
        basis.flat[j] = 1.0
        response = np.asarray(forward(basis), dtype=np.float64)
        if response.shape != tuple(sensor_shape):
            raise ValueError("forward map output does not match sensor dims")
        matrix[:, j] = response.ravel()
        basis.flat[j] = 0.0
    return LinearOperator(matrix, tuple(scene_shape), tuple(sensor_shape))
