"""Reconstruction: Wiener deconvolution, ADMM-TV, and spatially varying
multi-kernel deconvolution with data-driven kernel calibration.

The multi-kernel path partitions the scene into a K x K grid of regions,
deconvolves the (padded) measurement once per region kernel in the Fourier
domain, and blends the results pointwise with inverse-distance weights
anchored at the region centers. Kernels are stored as frequency-domain
inverse filters; the untrained K = 1 model therefore coincides with plain
Wiener deconvolution.
"""

from dataclasses import dataclass

import numpy as np

from .imaging import (
    Measurement,
    centered_crop,
    centered_embed,
    kernel_center,
)
from .optics import Psf

WEIGHT_EPS_CELLS = 0.5  # distance clamp at a kernel's own focal center


@dataclass(frozen=True)
class PsfSet:
    """K x K kernel grid with focal centers.

    ``kernels`` has shape (K*K, h, w); ``domain`` is "spatial" for forward
    PSFs (real intensity kernels) or "frequency" for deconvolution filters
    (complex, sized to the padded measurement). ``centers`` are (row, col)
    scene-plane coordinates of each kernel's field point.
    """

    kernels: np.ndarray
    centers: np.ndarray
    grid_side: int
    pitch: float
    domain: str
    scene_shape: tuple = None

    def __post_init__(self):
        kernels = np.asarray(self.kernels)
        centers = np.asarray(self.centers, dtype=np.float64)
        if self.domain not in ("spatial", "frequency"):
            raise ValueError("domain must be 'spatial' or 'frequency'")
        dtype = np.float64 if self.domain == "spatial" else np.complex128
        kernels = kernels.astype(dtype)
        if kernels.ndim != 3 or kernels.shape[0] != self.grid_side**2:
            raise ValueError("need exactly K^2 kernel grids")
        if centers.shape != (self.grid_side**2, 2):
            raise ValueError("need exactly K^2 focal centers")
        if not np.all(np.isfinite(kernels)):
            raise ValueError("kernels contain non-finite values")
        if len({tuple(c) for c in centers.tolist()}) != len(centers):
            raise ValueError("focal centers must be distinct")
        object.__setattr__(self, "kernels", kernels)
        object.__setattr__(self, "centers", centers)


@dataclass(frozen=True)
class WeightField:
    """Per-kernel interpolation weight maps over the scene grid.

    Maps are nonnegative and sum to one at every scene cell.
    """

    maps: np.ndarray
    centers: np.ndarray

    def __post_init__(self):
        maps = np.asarray(self.maps, dtype=np.float64)
        if maps.ndim != 3:
            raise ValueError("weight maps must be (count, h, w)")
        if np.any(maps < 0):
            raise ValueError("weights must be nonnegative")
        if np.max(np.abs(maps.sum(axis=0) - 1.0)) > 1e-12:
            raise ValueError("weights must sum to 1 at every cell")
        object.__setattr__(self, "maps", maps)


@dataclass(frozen=True)
class AdmmConfig:
    """Total-variation ADMM settings."""

    tv_weight: float = 1e-3
    penalty: float = 1.0
    iterations: int = 100
    tolerance: float = 0.0

    def __post_init__(self):
        if self.tv_weight <= 0 or self.penalty <= 0:
            raise ValueError("tv_weight and penalty must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


def region_grid(scene_shape, grid_side):
    """Centers of a uniform ``grid_side`` x ``grid_side`` scene partition.

    Continuous coordinates with cell j spanning [j, j+1); the center of
    region (i, j) is ((i + 0.5) * H / K, (j + 0.5) * W / K).
    """
    if grid_side < 1:
        raise ValueError("grid side must be >= 1")
    h, w = scene_shape
    rows = (np.arange(grid_side) + 0.5) * (h / grid_side)
    cols = (np.arange(grid_side) + 0.5) * (w / grid_side)
    return np.array([(r, c) for r in rows for c in cols], dtype=np.float64)


def interpolation_weights(points, centers, eps=WEIGHT_EPS_CELLS, power=0.5):
    """Inverse-distance weights of query points against focal centers.

    w_i = d_i^(-power) / sum_j d_j^(-power) with d_i the squared Euclidean
    distance, clamped below by eps^2 so the weight tends smoothly to its
    maximum at the center itself. The default power 1/2 is plain inverse
    Euclidean distance; larger powers sharpen region identity. Rows sum
    to one.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    centers = np.asarray(centers, dtype=np.float64)
    if len({tuple(c) for c in centers.tolist()}) != len(centers):
        raise ValueError("focal centers must be distinct")
    diff = points[:, None, :] - centers[None, :, :]
    dsq = np.maximum((diff**2).sum(axis=2), eps**2)
    inv = dsq**-power
    return inv / inv.sum(axis=1, keepdims=True)


def compute_weights(scene_shape, centers, eps=WEIGHT_EPS_CELLS, power=0.5):
    """Interpolation weight maps over a scene grid, sampled at cell centers."""
    h, w = scene_shape
    rows = np.arange(h) + 0.5
    cols = np.arange(w) + 0.5
    points = np.stack(
        [np.repeat(rows, w), np.tile(cols, h)], axis=1
    )
    weights = interpolation_weights(points, centers, eps, power)
    maps = weights.T.reshape(len(centers), h, w)
    return WeightField(maps, np.asarray(centers, dtype=np.float64))


def _as_pixels(y):
    return y.pixels if isinstance(y, Measurement) else np.asarray(y, dtype=np.float64)


def _kernel_transfer(h, shape):
    """Frequency response of a kernel embedded centered in ``shape``.

    The kernel center (h-1)//2 is rolled to the origin so that applying
    the filter leaves content aligned with the measurement frame.
    """
    kernel = h.intensity if isinstance(h, Psf) else np.asarray(h, dtype=np.float64)
    if kernel.shape[0] > shape[0] or kernel.shape[1] > shape[1]:
        raise ValueError("kernel larger than the target grid")
    embedded = centered_embed(kernel, shape)
    cy, cx = kernel_center(kernel.shape)
    top = (shape[0] - kernel.shape[0]) // 2
    left = (shape[1] - kernel.shape[1]) // 2
    rolled = np.roll(embedded, (-(top + cy), -(left + cx)), axis=(0, 1))
    return np.fft.fft2(rolled)


def wiener_filter(h, shape, reg):
    """Tikhonov-regularized inverse filter conj(H) / (|H|^2 + reg)."""
    if reg < 0:
        raise ValueError("regularization must be nonnegative")
    transfer = _kernel_transfer(h, shape)
    if np.max(np.abs(transfer)) == 0:
        raise ValueError("all-zero PSF cannot be inverted")
    return np.conj(transfer) / (np.abs(transfer) ** 2 + reg)


def apply_freq_filter(y, filt, scene_shape=None):
    """Filter a measurement in the Fourier domain and crop to scene dims."""
    pixels = _as_pixels(y)
    if filt.shape != pixels.shape:
        raise ValueError("filter size does not match the measurement")
    out = np.fft.ifft2(filt * np.fft.fft2(pixels)).real
    if scene_shape is not None:
        out = centered_crop(out, scene_shape)
    return out


def wiener_deconvolve(y, h, reg, scene_shape=None):
    """Tikhonov-regularized deconvolution in the Fourier domain.

    ``y`` must already be at linear-convolution size; for cropped sensors
    apply ``maskcam.imaging.replicate_pad`` first. The result is centered-
    cropped to ``scene_shape`` when given.
    """
    pixels = _as_pixels(y)
    filt = wiener_filter(h, pixels.shape, reg)
    return apply_freq_filter(pixels, filt, scene_shape)


def svdeconv_apply(y, psfs, weights, scene_shape=None):
    """Multi-kernel deconvolution with pointwise weight interpolation.

    Each frequency-domain kernel filters the (padded) measurement; the
    per-region results are cropped to the scene grid and blended with the
    weight maps. Linear in ``y`` for fixed kernels.
    """
    pixels = _as_pixels(y)
    if psfs.domain != "frequency":
        raise ValueError("svdeconv_apply needs frequency-domain kernels")
    if psfs.kernels.shape[1:] != pixels.shape:
        raise ValueError(
            f"kernel grids {psfs.kernels.shape[1:]} do not match the padded "
            f"measurement {pixels.shape}"
        )
    if scene_shape is None:
        scene_shape = weights.maps.shape[1:]
    if weights.maps.shape[0] != psfs.kernels.shape[0]:
        raise ValueError("weight map count does not match kernel count")
    if tuple(weights.maps.shape[1:]) != tuple(scene_shape):
        raise ValueError("weight maps do not cover the scene grid")
    spectrum = np.fft.fft2(pixels)
    out = np.zeros(scene_shape, dtype=np.float64)
    for filt, wmap in zip(psfs.kernels, weights.maps):
        deconvolved = centered_crop(np.fft.ifft2(filt * spectrum).real, scene_shape)
        out += wmap * deconvolved
    return out


def initial_kernel_set(init, grid_side, pad_shape, scene_shape, pitch, reg):
    """K^2 identical Wiener inverse filters of a single calibrated PSF."""
    filt = wiener_filter(init, pad_shape, reg)
    kernels = np.broadcast_to(filt, (grid_side**2,) + filt.shape).copy()
    centers = region_grid(scene_shape, grid_side)
    return PsfSet(kernels, centers, grid_side, pitch, "frequency",
                  tuple(scene_shape))


class CalibrationState:
    """Precomputed spectra and embeddings shared by loss/gradient passes."""

    def __init__(self, pairs, weights, pad_shape, scene_shape):
        self.scene_shape = tuple(scene_shape)
        self.pad_shape = tuple(pad_shape)
        self.weights = weights
        self.spectra = []
        self.targets = []
        for y, target in pairs:
            pixels = _as_pixels(y)
            if pixels.shape != self.pad_shape:
                raise ValueError("measurement pairs must share padded dims")
            target = np.asarray(target, dtype=np.float64)
            if target.shape != self.scene_shape:
                raise ValueError("targets must share scene dims")
            self.spectra.append(np.fft.fft2(pixels))
            self.targets.append(target)
        self.npix = self.pad_shape[0] * self.pad_shape[1]

    def outputs(self, kernels):
        """Per-pair blended reconstructions for the given kernel stack."""
        maps = self.weights.maps
        outs = []
        for spectrum in self.spectra:
            fields = np.fft.ifft2(kernels * spectrum[None, :, :]).real
            cropped = _crop_stack(fields, self.scene_shape)
            outs.append(np.einsum("khw,khw->hw", maps, cropped))
        return outs

    def loss_and_grad(self, kernels, init_kernels, reg_mu):
        """Data + proximity loss and its Wirtinger gradient wrt kernels."""
        maps = self.weights.maps
        loss = 0.0
        grad = np.zeros_like(kernels)
        for spectrum, target in zip(self.spectra, self.targets):
            fields = np.fft.ifft2(kernels * spectrum[None, :, :]).real
            cropped = _crop_stack(fields, self.scene_shape)
            residual = np.einsum("khw,khw->hw", maps, cropped) - target
            loss += float(np.sum(residual**2))
            weighted = maps * residual[None, :, :]
            embedded = _embed_stack(weighted, self.pad_shape)
            grad += (2.0 / self.npix) * np.conj(spectrum)[None, :, :] \
                * np.fft.fft2(embedded)
        diff = kernels - init_kernels
        loss += reg_mu * float(np.sum(np.abs(diff) ** 2))
        grad += 2.0 * reg_mu * diff
        return loss, grad

    def lipschitz_bound(self, grid_side, reg_mu):
        """Upper bound on the loss Hessian's top eigenvalue.

        Per pair, the kernel-to-output map has operator norm at most
        K * max|Y| / sqrt(npix); the quadratic data term contributes twice
        the squared norm, the proximity term 2 * mu.
        """
        total = 0.0
        for spectrum in self.spectra:
            total += grid_side**2 * float(np.max(np.abs(spectrum))) ** 2 / self.npix
        return 2.0 * total + 2.0 * reg_mu


def _crop_stack(stack, scene_shape):
    h, w = scene_shape
    bh, bw = stack.shape[1:]
    top = (bh - h) // 2
    left = (bw - w) // 2
    return stack[:, top : top + h, left : left + w]


def _embed_stack(stack, pad_shape):
    k, h, w = stack.shape
    out = np.zeros((k,) + tuple(pad_shape), dtype=stack.dtype)
    top = (pad_shape[0] - h) // 2
    left = (pad_shape[1] - w) // 2
    out[:, top : top + h, left : left + w] = stack
    return out


def calibrate_kernels(pairs, init, grid_side, reg_mu=1e-6, lr=1e-2,
                      epochs=200, init_reg=1e-3, scene_shape=None,
                      method="gd", history=None):
    """Fit the K^2 deconvolution kernels to (measurement, target) pairs.

    Minimizes sum_j ||svdeconv(y_j) - r_j||^2 + mu * sum_i ||P_i - P_init||^2
    by gradient descent with the analytic gradient. The model is linear in
    the kernels, so the objective is a convex quadratic; steps are sized as
    ``lr`` times the inverse of an analytic Lipschitz bound on the Hessian
    (twice that value is the stability limit), so any lr <= 1 descends
    monotonically. ``method="cg"`` solves the same quadratic by conjugate
    gradients instead, using ``epochs`` as the iteration cap.

    Parameters
    ----------
    pairs : list of (measurement, target)
        Measurements already replicate-padded to the deconvolution size;
        targets on the scene grid.
    init : Psf or ndarray
        Single calibrated PSF; every kernel starts as its Wiener inverse
        filter with regularization ``init_reg``.
    history : list or None
        When a list is passed, per-epoch loss values are appended to it.

    Raises
    ------
    RuntimeError
        If the loss increases over 5 consecutive epochs (diverging run).
    """
    if not pairs:
        raise ValueError("calibration needs at least one pair")
    if grid_side < 1:
        raise ValueError("grid side must be >= 1")
    if epochs < 0:
        raise ValueError("epochs must be >= 0")
    first_y = _as_pixels(pairs[0][0])
    pad_shape = first_y.shape
    if scene_shape is None:
        scene_shape = np.asarray(pairs[0][1]).shape
    pitch = init.pitch if isinstance(init, Psf) else 1.0

    psfs = initial_kernel_set(init, grid_side, pad_shape, scene_shape, pitch,
                              init_reg)
    weights = compute_weights(scene_shape, psfs.centers)
    state = CalibrationState(pairs, weights, pad_shape, scene_shape)
    init_kernels = psfs.kernels.copy()
    kernels = psfs.kernels.copy()

    if method == "cg":
        kernels = _solve_cg(state, init_kernels, reg_mu, epochs, history)
    elif method == "gd":
        step = lr / state.lipschitz_bound(grid_side, reg_mu)
        rising = 0
        prev = None
        for _ in range(epochs):
            loss, grad = state.loss_and_grad(kernels, init_kernels, reg_mu)
            if history is not None:
                history.append(loss)
            if prev is not None and loss > prev:
                rising += 1
                if rising >= 5:
                    tail = (history or [loss])[-6:]
                    raise RuntimeError(
                        f"calibration diverging; loss tail {tail}"
                    )
            else:
                rising = 0
            prev = loss
            kernels = kernels - step * grad
    else:
        raise ValueError(f"unknown calibration method '{method}'")

    return PsfSet(kernels, psfs.centers, grid_side, pitch, "frequency",
                  tuple(scene_shape))


def _solve_cg(state, init_kernels, reg_mu, max_iter, history):
    """Conjugate gradients on the (real-linear, PSD) normal equations."""

    def inner(a, b):
        return float(np.sum(a.real * b.real + a.imag * b.imag))

    loss0, grad0 = state.loss_and_grad(init_kernels, init_kernels, reg_mu)

    def hess_vec(v):
        _, g_at_v = state.loss_and_grad(init_kernels + v, init_kernels, reg_mu)
        return g_at_v - grad0

    x = np.zeros_like(init_kernels)
    r = -grad0
    p = r.copy()
    rs = inner(r, r)
    for _ in range(max_iter):
        if history is not None:
            loss, _ = state.loss_and_grad(init_kernels + x, init_kernels, reg_mu)
            history.append(loss)
        if np.sqrt(rs) < 1e-12:
            break
        hp = hess_vec(p)
        alpha = rs / max(inner(p, hp), 1e-300)
        x = x + alpha * p
        r = r - alpha * hp
        rs_new = inner(r, r)
        p = r + (rs_new / rs) * p
        rs = rs_new
    return init_kernels + x


def soft_threshold(v, kappa):
    """Elementwise shrinkage sign(v) * max(|v| - kappa, 0)."""
    return np.sign(v) * np.maximum(np.abs(v) - kappa, 0.0)


def admm_tv(y, h, cfg, scene_shape=None, return_history=False):
    """Total-variation reconstruction by ADMM splitting.

    Solves min_x 0.5 * ||C(h * x) - y||^2 + tau * ||grad x||_1 with the
    splitting v = h (.) x (circular on the working grid), z = grad x. The
    x-update is a pointwise frequency-domain solve, the gradient variable
    is soft-thresholded at tau / rho, and scaled dual variables ascend.
    Anisotropic TV with periodic forward differences.

    ``y`` is the (possibly cropped) measurement; the working grid is the
    linear-convolution size scene + kernel - 1 and the result is centered-
    cropped back to ``scene_shape`` (defaults to the measurement dims).
    """
    pixels = _as_pixels(y)
    kernel = h.intensity if isinstance(h, Psf) else np.asarray(h, dtype=np.float64)
    if scene_shape is None:
        scene_shape = pixels.shape
    tau, rho = cfg.tv_weight, cfg.penalty

    work = (scene_shape[0] + kernel.shape[0] - 1,
            scene_shape[1] + kernel.shape[1] - 1)
    if pixels.shape[0] > work[0] or pixels.shape[1] > work[1]:
        raise ValueError("measurement larger than the working grid")
    transfer = _kernel_transfer(kernel, work)
    if np.max(np.abs(transfer)) == 0:
        raise ValueError("all-zero PSF")

    # circular forward-difference stencils
    d_row = np.zeros(work)
    d_row[0, 0] = -1.0
    d_row[-1, 0] = 1.0
    d_col = np.zeros(work)
    d_col[0, 0] = -1.0
    d_col[0, -1] = 1.0
    f_row = np.fft.fft2(d_row)
    f_col = np.fft.fft2(d_col)
    denom = (np.abs(transfer) ** 2 + np.abs(f_row) ** 2 + np.abs(f_col) ** 2)
    denom[denom == 0] = 1.0

    sensor_mask = centered_embed(np.ones_like(pixels), work)
    y_embedded = centered_embed(pixels, work)

    def grad_op(img):
        return (np.roll(img, -1, axis=0) - img, np.roll(img, -1, axis=1) - img)

    x = np.zeros(work)
    v = np.zeros(work)
    z = (np.zeros(work), np.zeros(work))
    u_v = np.zeros(work)
    u_z = (np.zeros(work), np.zeros(work))
    history = []

    hx = np.zeros(work)
    gx = grad_op(x)
    for _ in range(cfg.iterations):
        v = (y_embedded + rho * (hx + u_v)) / (sensor_mask + rho)
        z = tuple(soft_threshold(g + u, tau / rho) for g, u in zip(gx, u_z))
        rhs = (np.conj(transfer) * np.fft.fft2(v - u_v)
               + np.conj(f_row) * np.fft.fft2(z[0] - u_z[0])
               + np.conj(f_col) * np.fft.fft2(z[1] - u_z[1]))
        x = np.fft.ifft2(rhs / denom).real
        hx = np.fft.ifft2(transfer * np.fft.fft2(x)).real
        gx = grad_op(x)
        u_v = u_v + hx - v
        u_z = tuple(u + g - zz for u, g, zz in zip(u_z, gx, z))
        primal = np.sqrt(np.sum((hx - v) ** 2)
                         + sum(np.sum((g - zz) ** 2) for g, zz in zip(gx, z)))
        primal /= np.sqrt(work[0] * work[1])
        history.append(primal)
        if cfg.tolerance > 0 and primal < cfg.tolerance:
            break

    result = centered_crop(x, scene_shape)
    if return_history:
        return result, history
    return result
