"""Kernel backends: compiled core vs pure NumPy twin."""

import numpy as np
import pytest

from maskcam._kernels import _pure

try:
    from maskcam._kernels import _core
except ImportError:
    _core = None

LAM = 532e-9


def test_one_source_cell_on_axis_closed_form():
    # single term of the superposition sum: |out| = d/(lam*r^2) * area, r = d
    pitch, d = 4e-6, 1e-3
    field = np.ones((1, 1), dtype=complex)
    out = _pure.huygens_sum(field, pitch, d, LAM)
    expected = d / (LAM * d**2) * pitch**2
    assert out.shape == (1, 1)
    assert abs(abs(out[0, 0]) - expected) / expected < 1e-12


def test_zero_field_stays_zero():
    out = _pure.huygens_sum(np.zeros((8, 8), dtype=complex), 4e-6, 1e-3, LAM)
    assert np.all(out == 0)


def test_linearity_of_sum():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    b = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    out_sum = _pure.huygens_sum(2.0 * a + 3.0 * b, 4e-6, 1e-3, LAM)
    out_parts = (2.0 * _pure.huygens_sum(a, 4e-6, 1e-3, LAM)
                 + 3.0 * _pure.huygens_sum(b, 4e-6, 1e-3, LAM))
    np.testing.assert_allclose(out_sum, out_parts, rtol=1e-12)


@pytest.mark.skipif(_core is None, reason="compiled kernels not built")
def test_backends_agree():
    rng = np.random.default_rng(7)
    field = rng.standard_normal((24, 24)) + 1j * rng.standard_normal((24, 24))
    field = np.ascontiguousarray(field)
    pure = _pure.huygens_sum(field, 8e-6, 2e-3, LAM)
    compiled = _core.huygens_sum(field, 8e-6, 2e-3, LAM)
    np.testing.assert_allclose(compiled, pure, rtol=1e-12, atol=1e-15)


@pytest.mark.skipif(_core is None, reason="compiled kernels not built")
def test_backend_selection_env(monkeypatch):
    import importlib

    import maskcam._kernels as kernels

    monkeypatch.setenv("MASKCAM_PURE_KERNELS", "1")
    reloaded = importlib.reload(kernels)
    assert reloaded.BACKEND == "pure"
    monkeypatch.delenv("MASKCAM_PURE_KERNELS")
    reloaded = importlib.reload(kernels)
    assert reloaded.BACKEND == "compiled"
