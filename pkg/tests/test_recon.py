"""Reconstruction: Wiener, weights, SVDeconv, calibration, ADMM-TV."""

import numpy as np
import pytest

from maskcam import imaging, metrics, optics, recon, scenes


def gaussian_kernel(size, sigma):
    coords = np.arange(size) - (size - 1) / 2
    g = np.exp(-(coords[:, None] ** 2 + coords[None, :] ** 2) / (2 * sigma**2))
    return g / g.sum()


def well_conditioned_psf():
    h = np.zeros((9, 9))
    h[4, 4] = 0.9
    h += 0.1 * gaussian_kernel(9, 1.0)
    return h


class TestWienerDeconvolve:
    def test_delta_psf_zero_reg_is_identity(self):
        rng = np.random.default_rng(0)
        y = rng.random((16, 16))
        out = recon.wiener_deconvolve(y, np.ones((1, 1)), 0.0)
        np.testing.assert_allclose(out, y, atol=1e-12)

    def test_zero_measurement_gives_zero(self):
        out = recon.wiener_deconvolve(np.zeros((16, 16)),
                                      gaussian_kernel(5, 1.0), 1e-3)
        np.testing.assert_allclose(out, 0.0, atol=1e-15)

    def test_round_trip_well_conditioned(self):
        h = well_conditioned_psf()
        transfer = recon._kernel_transfer(h, (24, 24))
        assert np.min(np.abs(transfer)) >= 0.1 * np.max(np.abs(transfer))
        x = scenes.synthetic_scene(16, seed=1)
        y = imaging.conv_forward(x, h)  # full sensor, noise-free
        out = recon.wiener_deconvolve(y, h, 1e-6, scene_shape=(16, 16))
        assert metrics.psnr(out, x) >= 60.0

    def test_negative_reg_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            recon.wiener_deconvolve(np.ones((8, 8)), np.ones((1, 1)), -1e-3)

    def test_zero_psf_rejected(self):
        with pytest.raises(ValueError, match="all-zero"):
            recon.wiener_deconvolve(np.ones((8, 8)), np.zeros((3, 3)), 1e-3)


class TestWeights:
    def test_equidistant_point_gets_uniform_weights(self):
        centers = recon.region_grid((9, 9), 2)
        w = recon.interpolation_weights([(4.5, 4.5)], centers)[0]
        np.testing.assert_allclose(w, 0.25, atol=1e-12)

    def test_weight_at_own_center_with_far_neighbors(self):
        # the half-cell clamp makes w -> 1 as other centers recede
        w = recon.interpolation_weights(
            [(0.5, 0.5)], [(0.5, 0.5), (0.5, 2000.5)])[0]
        assert w[0] >= 1.0 - 1e-3
        assert w[0] + w[1] == pytest.approx(1.0, abs=1e-15)

    def test_frozen_inverse_distance_example(self):
        # d = (0.25, 0.25, 1.25, 1.25) -> weights
        # (0.3454915, 0.3454915, 0.1545085, 0.1545085)
        w = recon.interpolation_weights(
            [(0.0, 0.5)], [(0, 0), (0, 1), (1, 0), (1, 1)])[0]
        np.testing.assert_allclose(
            w, [0.3454915, 0.3454915, 0.1545085, 0.1545085], atol=1e-7)

    def test_maps_sum_to_one_everywhere(self):
        rng = np.random.default_rng(2)
        centers = rng.uniform(0, 20, size=(6, 2))
        field = recon.compute_weights((20, 20), centers)
        np.testing.assert_allclose(field.maps.sum(axis=0), 1.0, atol=1e-12)
        assert np.all(field.maps >= 0)

    def test_duplicate_centers_rejected(self):
        with pytest.raises(ValueError, match="distinct"):
            recon.interpolation_weights([(0, 0)], [(1, 1), (1, 1)])


class TestRegionGrid:
    def test_single_region_center_is_midpoint(self):
        centers = recon.region_grid((10, 6), 1)
        np.testing.assert_allclose(centers, [[5.0, 3.0]])

    def test_frozen_k2_example(self):
        centers = recon.region_grid((4, 4), 2)
        np.testing.assert_allclose(
            centers, [[1, 1], [1, 3], [3, 1], [3, 3]])

    def test_rotation_symmetry(self):
        centers = recon.region_grid((12, 8), 3)
        rotated = {(12.0 - r, 8.0 - c) for r, c in centers}
        original = {(r, c) for r, c in centers}
        assert rotated == original

    def test_k_must_be_positive(self):
        with pytest.raises(ValueError):
            recon.region_grid((8, 8), 0)


class TestSvdeconvApply:
    def test_k1_matches_wiener_exactly(self):
        h = well_conditioned_psf()
        rng = np.random.default_rng(3)
        y = rng.random((24, 24))
        psfs = recon.initial_kernel_set(h, 1, (24, 24), (16, 16), 1e-6, 1e-4)
        weights = recon.compute_weights((16, 16), psfs.centers)
        sv = recon.svdeconv_apply(y, psfs, weights, (16, 16))
        wiener = recon.wiener_deconvolve(y, h, 1e-4, (16, 16))
        np.testing.assert_array_equal(sv, wiener)

    def test_identical_kernels_ignore_weights(self):
        h = well_conditioned_psf()
        rng = np.random.default_rng(4)
        y = rng.random((24, 24))
        k3 = recon.initial_kernel_set(h, 3, (24, 24), (16, 16), 1e-6, 1e-4)
        weights = recon.compute_weights((16, 16), k3.centers)
        sv = recon.svdeconv_apply(y, k3, weights, (16, 16))
        wiener = recon.wiener_deconvolve(y, h, 1e-4, (16, 16))
        np.testing.assert_allclose(sv, wiener, atol=1e-12)

    def test_linear_in_measurement(self):
        h = well_conditioned_psf()
        rng = np.random.default_rng(5)
        y1 = rng.random((24, 24))
        y2 = rng.random((24, 24))
        psfs = recon.initial_kernel_set(h, 2, (24, 24), (16, 16), 1e-6, 1e-4)
        weights = recon.compute_weights((16, 16), psfs.centers)
        combined = recon.svdeconv_apply(2 * y1 - 3 * y2, psfs, weights,
                                        (16, 16))
        parts = (2 * recon.svdeconv_apply(y1, psfs, weights, (16, 16))
                 - 3 * recon.svdeconv_apply(y2, psfs, weights, (16, 16)))
        np.testing.assert_allclose(combined, parts, atol=1e-10)

    def test_size_mismatch_rejected(self):
        h = well_conditioned_psf()
        psfs = recon.initial_kernel_set(h, 2, (24, 24), (16, 16), 1e-6, 1e-4)
        weights = recon.compute_weights((16, 16), psfs.centers)
        with pytest.raises(ValueError, match="do not match"):
            recon.svdeconv_apply(np.ones((20, 20)), psfs, weights, (16, 16))

    def test_spatial_kernels_rejected(self):
        psfs = recon.PsfSet(np.ones((1, 8, 8)), [[4.0, 4.0]], 1, 1e-6,
                            "spatial", (8, 8))
        weights = recon.compute_weights((8, 8), psfs.centers)
        with pytest.raises(ValueError, match="frequency"):
            recon.svdeconv_apply(np.ones((8, 8)), psfs, weights, (8, 8))


def build_calibration_data(spatially_varying, count=8, scene_side=24,
                           seed=100):
    scene_shape = (scene_side, scene_side)
    crop = scene_shape
    centers = recon.region_grid(scene_shape, 2)
    h_center = gaussian_kernel(9, 1.0)
    if spatially_varying:
        kernels = []
        for i in range(4):
            k = gaussian_kernel(9, 0.7 + 0.5 * i)
            k = np.roll(k, (i % 2, i // 2), axis=(0, 1))
            kernels.append(k)
    else:
        kernels = [h_center] * 4
    psfs = recon.PsfSet(np.array(kernels), centers, 2, 1e-6, "spatial",
                        scene_shape)
    weights = recon.compute_weights(scene_shape, centers)
    pairs = []
    for i in range(count):
        x = scenes.synthetic_scene(scene_side, seed=seed + i)
        y = imaging.sv_forward(x, psfs, crop=crop, noise_snr_db=35.0,
                               seed=seed + 50 + i, weights=weights)
        padded = imaging.replicate_pad(y, 2.0)
        pairs.append((padded.pixels, x))
    return pairs, h_center, scene_shape


def fit_mse(pairs, h_center, scene_shape, grid_side, **kwargs):
    history = []
    kernel_set = recon.calibrate_kernels(
        pairs, optics.Psf(h_center, 1e-6), grid_side, scene_shape=scene_shape,
        history=history, **kwargs)
    weights = recon.compute_weights(scene_shape, kernel_set.centers)
    total = 0.0
    for y, target in pairs:
        out = recon.svdeconv_apply(y, kernel_set, weights, scene_shape)
        total += float(np.mean((out - target) ** 2))
    return total / len(pairs), history, kernel_set


class TestCalibration:
    def test_gradient_matches_finite_differences(self):
        pairs, h_center, scene_shape = build_calibration_data(True, count=3)
        pad_shape = pairs[0][0].shape
        psfs = recon.initial_kernel_set(h_center, 2, pad_shape, scene_shape,
                                        1e-6, 1e-3)
        weights = recon.compute_weights(scene_shape, psfs.centers)
        state = recon.CalibrationState(pairs, weights, pad_shape, scene_shape)
        rng = np.random.default_rng(0)
        kernels = psfs.kernels + 0.1 * (
            rng.standard_normal(psfs.kernels.shape)
            + 1j * rng.standard_normal(psfs.kernels.shape))
        _, grad = state.loss_and_grad(kernels, psfs.kernels, 1e-3)
        eps = 1e-6
        for _ in range(5):
            i = rng.integers(0, kernels.shape[0])
            r = rng.integers(0, kernels.shape[1])
            c = rng.integers(0, kernels.shape[2])
            for delta, analytic in ((eps, grad[i, r, c].real),
                                    (1j * eps, grad[i, r, c].imag)):
                plus = kernels.copy()
                plus[i, r, c] += delta
                minus = kernels.copy()
                minus[i, r, c] -= delta
                lp, _ = state.loss_and_grad(plus, psfs.kernels, 1e-3)
                lm, _ = state.loss_and_grad(minus, psfs.kernels, 1e-3)
                fd = (lp - lm) / (2 * eps)
                assert fd == pytest.approx(analytic, rel=1e-5)

    def test_zero_epochs_returns_wiener_initialization(self):
        pairs, h_center, scene_shape = build_calibration_data(False, count=2)
        kernel_set = recon.calibrate_kernels(
            pairs, optics.Psf(h_center, 1e-6), 2, epochs=0,
            init_reg=2e-3, scene_shape=scene_shape)
        reference = recon.initial_kernel_set(
            h_center, 2, pairs[0][0].shape, scene_shape, 1e-6, 2e-3)
        np.testing.assert_array_equal(kernel_set.kernels, reference.kernels)

    def test_gd_loss_non_increasing_at_safe_step(self):
        pairs, h_center, scene_shape = build_calibration_data(True, count=4)
        _, history, _ = fit_mse(pairs, h_center, scene_shape, 2,
                                method="gd", lr=1.0, epochs=25, reg_mu=1e-6)
        diffs = np.diff(history)
        assert np.all(diffs <= 1e-9 * np.abs(history[:-1]))

    def test_control_no_spurious_gain_on_shift_invariant_data(self):
        pairs, h_center, scene_shape = build_calibration_data(False, count=6)
        mse_k2, _, _ = fit_mse(pairs, h_center, scene_shape, 2,
                               method="cg", epochs=25, reg_mu=1e-6)
        mse_k1, _, _ = fit_mse(pairs, h_center, scene_shape, 1,
                               method="cg", epochs=25, reg_mu=1e-6)
        assert mse_k2 <= 1.05 * mse_k1

    def test_treatment_gain_on_spatially_varying_data(self):
        pairs, h_center, scene_shape = build_calibration_data(True, count=6)
        mse_k2, _, _ = fit_mse(pairs, h_center, scene_shape, 2,
                               method="cg", epochs=40, reg_mu=1e-8)
        mse_k1, _, _ = fit_mse(pairs, h_center, scene_shape, 1,
                               method="cg", epochs=40, reg_mu=1e-8)
        assert mse_k2 < mse_k1

    def test_divergence_aborts_with_diagnostics(self):
        pairs, h_center, scene_shape = build_calibration_data(True, count=2)
        with pytest.raises(RuntimeError, match="diverging"):
            recon.calibrate_kernels(
                pairs, optics.Psf(h_center, 1e-6), 2, method="gd",
                lr=50.0, epochs=40, scene_shape=scene_shape)

    def test_empty_pairs_rejected(self):
        with pytest.raises(ValueError, match="at least one"):
            recon.calibrate_kernels([], np.ones((3, 3)), 2)

    def test_unknown_method_rejected(self):
        pairs, h_center, scene_shape = build_calibration_data(False, count=1)
        with pytest.raises(ValueError, match="method"):
            recon.calibrate_kernels(pairs, optics.Psf(h_center, 1e-6), 1,
                                    method="adam", scene_shape=scene_shape)


class TestAdmmTv:
    def test_zero_measurement_gives_zero(self):
        out = recon.admm_tv(np.zeros((16, 16)), gaussian_kernel(5, 1.0),
                            recon.AdmmConfig(1e-3, 1.0, 20))
        np.testing.assert_array_equal(out, 0.0)

    def test_soft_threshold_closed_form(self):
        assert recon.soft_threshold(0.5, 0.2) == pytest.approx(0.3)
        assert recon.soft_threshold(-0.1, 0.2) == 0.0
        np.testing.assert_allclose(
            recon.soft_threshold(np.array([-1.0, 0.05, 2.0]), 0.5),
            [-0.5, 0.0, 1.5])

    def test_beats_wiener_on_noisy_piecewise_constant(self):
        x = np.zeros((48, 48))
        x[10:30, 8:28] = 0.7
        x[25:40, 30:44] = 0.3
        x[5:12, 32:44] = 1.0
        h = gaussian_kernel(11, 2.0)
        y = imaging.conv_forward(x, h, noise_snr_db=30.0, seed=9)
        admm = recon.admm_tv(y.pixels, h, recon.AdmmConfig(1e-2, 1.0, 120),
                             (48, 48))
        wiener = recon.wiener_deconvolve(y.pixels, h, 1e-3, (48, 48))
        admm_db = metrics.psnr(np.clip(admm, 0, 1), x)
        wiener_db = metrics.psnr(np.clip(wiener, 0, 1), x)
        assert admm_db > wiener_db

    def test_primal_residual_settles(self):
        x = scenes.synthetic_scene(24, seed=6)
        h = gaussian_kernel(7, 1.5)
        y = imaging.conv_forward(x, h, crop=(24, 24), noise_snr_db=35.0,
                                 seed=2)
        _, history = recon.admm_tv(y.pixels, h,
                                   recon.AdmmConfig(1e-3, 1.0, 80), (24, 24),
                                   return_history=True)
        tail = history[len(history) // 2 :]
        assert np.all(np.diff(tail) <= 1e-6)

    def test_tolerance_stops_early(self):
        x = scenes.synthetic_scene(16, seed=7)
        h = gaussian_kernel(5, 1.0)
        y = imaging.conv_forward(x, h, crop=(16, 16))
        _, history = recon.admm_tv(
            y.pixels, h, recon.AdmmConfig(1e-3, 1.0, 200, tolerance=1e-4),
            (16, 16), return_history=True)
        assert len(history) < 200

    def test_config_validation(self):
        with pytest.raises(ValueError):
            recon.AdmmConfig(tv_weight=0.0)
        with pytest.raises(ValueError):
            recon.AdmmConfig(penalty=-1.0)
        with pytest.raises(ValueError):
            recon.AdmmConfig(iterations=0)


class TestPsfSetType:
    def test_kernel_count_must_match_grid(self):
        with pytest.raises(ValueError, match="K\\^2"):
            recon.PsfSet(np.ones((3, 4, 4)), recon.region_grid((8, 8), 2),
                         2, 1e-6, "spatial", (8, 8))

    def test_domain_validated(self):
        with pytest.raises(ValueError, match="domain"):
            recon.PsfSet(np.ones((1, 4, 4)), [[4, 4]], 1, 1e-6, "fourier",
                         (8, 8))

    def test_weight_field_validates_sum(self):
        maps = np.ones((2, 4, 4))  # sums to 2
        with pytest.raises(ValueError, match="sum to 1"):
            recon.WeightField(maps, np.zeros((2, 2)))
