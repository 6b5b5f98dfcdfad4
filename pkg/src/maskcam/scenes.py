"""Procedural grayscale test scenes.

Seeded generator mixing smooth gradients, piecewise-constant shapes, and
band-limited texture; used for dataset synthesis demos and tests.
"""

import numpy as np


def synthetic_scene(size, seed, kind="mixed"):
    """One scene grid in [0, 1], deterministic given ``seed``.

    kind: "mixed" (default), "shapes" (piecewise constant only), or
    "smooth" (gradients and blobs only).
    """
    h, w = (size, size) if np.isscalar(size) else size
    rng = np.random.default_rng(seed)
    rows = np.linspace(0.0, 1.0, h)[:, None]
    cols = np.linspace(0.0, 1.0, w)[None, :]

    img = np.zeros((h, w))
    if kind in ("mixed", "smooth"):
        img += rng.uniform(0.1, 0.5) * (
            rng.uniform(-1, 1) * rows + rng.uniform(-1, 1) * cols
        )
        for _ in range(rng.integers(2, 5)):
            cy, cx = rng.uniform(0.1, 0.9, 2)
            s = rng.uniform(0.05, 0.25)
            img += rng.uniform(-0.5, 0.8) * np.exp(
                -((rows - cy) ** 2 + (cols - cx) ** 2) / (2 * s**2)
            )
    if kind in ("mixed", "shapes"):
        for _ in range(rng.integers(3, 7)):
            cy, cx = rng.uniform(0.05, 0.95, 2)
            ry, rx = rng.uniform(0.05, 0.3, 2)
            level = rng.uniform(-0.6, 0.9)
            if rng.random() < 0.5:
                inside = (np.abs(rows - cy) < ry) & (np.abs(cols - cx) < rx)
            else:
                inside = ((rows - cy) / ry) ** 2 + ((cols - cx) / rx) ** 2 < 1.0
            img = np.where(inside, img + level, img)
    if kind == "mixed":
        fy = rng.uniform(2, 6, 2)
        img += rng.uniform(0.0, 0.15) * np.sin(
            2 * np.pi * (fy[0] * rows + fy[1] * cols) + rng.uniform(0, 2 * np.pi)
        )

    lo, hi = img.min(), img.max()
    if hi - lo < 1e-12:
        return np.full((h, w), 0.5)
    return (img - lo) / (hi - lo)
