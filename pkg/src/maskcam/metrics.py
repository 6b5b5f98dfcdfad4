"""Full-reference image quality metrics and center/periphery evaluation."""

from dataclasses import dataclass

import numpy as np
from scipy import signal

PSNR_CAP_DB = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


@dataclass(frozen=True)
class RegionSpec:
    """Central box covering ``center_fraction`` of each dimension; the
    complement is the periphery."""

    center_fraction: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.center_fraction < 1.0:
            raise ValueError("center fraction must lie in (0, 1)")


def psnr(a, b, peak=1.0, cap=PSNR_CAP_DB):
    """Peak signal-to-noise ratio 10*log10(peak^2 / MSE), capped at ``cap``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("images must share dims")
    if peak <= 0:
        raise ValueError("peak must be positive")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return cap
    return min(10.0 * np.log10(peak**2 / mse), cap)


def _gaussian_window(size, sigma):
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    window = np.outer(g, g)
    return window / window.sum()


def ssim(a, b, peak=1.0):
    """Mean local structural similarity (Gaussian window 11, sigma 1.5).

    Stabilizers C1 = (0.01 * peak)^2 and C2 = (0.03 * peak)^2; local
    statistics over 'valid' windows only. Returns 1.0 exactly for
    identical inputs.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("images must share dims")
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW} cells per side")
    window = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2

    def local_mean(img):
        return signal.correlate(img, window, mode="valid")

    mu_a = local_mean(a)
    mu_b = local_mean(b)
    var_a = local_mean(a * a) - mu_a**2
    var_b = local_mean(b * b) - mu_b**2
    cov = local_mean(a * b) - mu_a * mu_b
    numerator = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    denominator = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(numerator / denominator))


def _center_slices(shape, fraction):
    ch = int(round(shape[0] * fraction))
    cw = int(round(shape[1] * fraction))
    ch = min(max(ch, 1), shape[0] - 1)
    cw = min(max(cw, 1), shape[1] - 1)
    top = (shape[0] - ch) // 2
    left = (shape[1] - cw) // 2
    return slice(top, top + ch), slice(left, left + cw)


def region_psnr(a, b, region=None, peak=1.0, cap=PSNR_CAP_DB):
    """PSNR over the central box and over its complement.

    Returns (center_db, periphery_db). Rejects degenerate regions where
    either part would be empty.
    """
    if region is None:
        region = RegionSpec()
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("images must share dims")
    if min(a.shape) < 2:
        raise ValueError("images too small for a center/periphery split")
    rows, cols = _center_slices(a.shape, region.center_fraction)
    mask = np.zeros(a.shape, dtype=bool)
    mask[rows, cols] = True
    if not mask.any() or mask.all():
        raise ValueError("degenerate region split")

    def masked_psnr(select):
        mse = float(np.mean((a[select] - b[select]) ** 2))
        if mse == 0.0:
            return cap
        return min(10.0 * np.log10(peak**2 / mse), cap)

    return masked_psnr(mask), masked_psnr(~mask)
