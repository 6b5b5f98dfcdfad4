# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled direct-sum propagation kernel.

Brute-force evaluation of the spherical-wave superposition integral on a
uniform grid. This is the o(N^4) hot loop of the toolkit; everything else
is FFT work. A pure NumPy twin lives in ``_pure.py`` and must stay
algorithmically identical (same kernel table, same summation).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin, sqrt

cnp.import_array()


def huygens_sum(cnp.complex128_t[:, ::1] field, double pitch,
                double distance, double wavelength):
    """Propagate ``field`` by ``distance`` with the exact spherical kernel.

    out[m, n] = sum_{p, q} field[p, q] * K(m - p, n - q)
    K(di, dj) = d / (j * lam * r^2) * exp(j * k * r) * pitch^2,
    r = sqrt(d^2 + (di * pitch)^2 + (dj * pitch)^2)
    """
    cdef Py_ssize_t h = field.shape[0]
    cdef Py_ssize_t w = field.shape[1]
    cdef double k = 2.0 * np.pi / wavelength
    cdef double d2 = distance * distance
    cdef double cell_area = pitch * pitch

    table_arr = np.empty((2 * h - 1, 2 * w - 1), dtype=np.complex128)
    cdef cnp.complex128_t[:, ::1] table = table_arr
    cdef Py_ssize_t i, j
    cdef double dx, dy, r, amp, ph
    for i in range(2 * h - 1):
        dy = (i - (h - 1)) * pitch
        for j in range(2 * w - 1):
            dx = (j - (w - 1)) * pitch
            r = sqrt(d2 + dx * dx + dy * dy)
            amp = distance / (wavelength * r * r) * cell_area
            ph = k * r
            # 1/j * exp(j*ph) = sin(ph) - j*cos(ph)
            table[i, j] = amp * (sin(ph) - 1j * cos(ph))

    out_arr = np.zeros((h, w), dtype=np.complex128)
    cdef cnp.complex128_t[:, ::1] out = out_arr
    cdef Py_ssize_t m, n, p, q
    cdef double complex acc
    for m in range(h):
        for n in range(w):
            acc = 0
            for p in range(h):
                for q in range(w):
                    acc = acc + field[p, q] * table[m - p + h - 1, n - q + w - 1]
            out[m, n] = acc
    return out_arr
