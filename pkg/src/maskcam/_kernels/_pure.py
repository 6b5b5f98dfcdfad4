"""Pure NumPy twin of the compiled direct-sum propagation kernel.

Kept algorithmically identical to ``_core.pyx`` (same kernel table, same
per-output-cell summation) so the two backends agree to round-off.
"""

import numpy as np


def huygens_sum(field, pitch, distance, wavelength):
    """Propagate ``field`` by ``distance`` with the exact spherical kernel.

    See ``_core.huygens_sum`` for the formula. Output cells are evaluated
    one at a time against a precomputed (2h-1, 2w-1) kernel table.
    """
    field = np.ascontiguousarray(field, dtype=np.complex128)
    h, w = field.shape
    k = 2.0 * np.pi / wavelength

    di = (np.arange(2 * h - 1) - (h - 1)) * pitch
    dj = (np.arange(2 * w - 1) - (w - 1)) * pitch
    r = np.sqrt(distance**2 + di[:, None] ** 2 + dj[None, :] ** 2)
    amp = distance / (wavelength * r * r) * pitch * pitch
    ph = k * r
    table = amp * (np.sin(ph) - 1j * np.cos(ph))

    # out[m, n] = sum_{p, q} field[p, q] * table[m - p + h - 1, n - q + w - 1]
    rev = table[::-1, ::-1]
    out = np.empty((h, w), dtype=np.complex128)
    for m in range(h):
        for n in range(w):
            out[m, n] = np.sum(field * rev[h - 1 - m : 2 * h - 1 - m,
                                           w - 1 - n : 2 * w - 1 - n])
    return out
