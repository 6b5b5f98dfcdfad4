"""Command-line pipelines.

Subcommands: design-mask, psf-sweep, synthesize, calibrate, reconstruct,
decompose, metrics, demo-scenes. Every command is deterministic given its
config file; all randomness is seeded there. Exit codes: 0 success,
1 runtime failure, 2 config/usage error.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, gridio, imaging, maskdesign, metrics as qmetrics
from . import optics, rangenull, recon, scenes
from .config import ConfigError, load_config

MANIFEST_NAME = "manifest.json"


def _fail(message, code=1):
    print(f"error: {message}", file=sys.stderr)
    raise SystemExit(code)


def _ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _load_mask(path):
    phase, pitch = gridio.read_grid(path)
    if np.iscomplexobj(phase):
        raise ValueError(f"{path}: mask grids must be real (phase values)")
    return optics.PhaseMask(phase.real, pitch)


def _camera_psfs(mask, cfg):
    """K x K recentered off-axis PSFs plus the on-axis PSF, unit energy."""
    n = cfg.optics.grid
    spec = optics.PropagationSpec(cfg.optics.d, cfg.optics.wavelength)
    centers = recon.region_grid((n, n), cfg.forward.k)
    fov = np.deg2rad(cfg.forward.fov_deg)
    kernels = []
    for (cy, cx) in centers:
        ty = fov * (2.0 * cy / n - 1.0)
        tx = fov * (2.0 * cx / n - 1.0)
        psf = optics.simulate_psf(mask, tx, ty, spec, remove_tilt_shift=True)
        kernels.append(psf.intensity / psf.intensity.sum())
    psfs = recon.PsfSet(np.array(kernels), centers, cfg.forward.k,
                        mask.pitch, "spatial", (n, n))
    on_axis = optics.simulate_psf(mask, 0.0, 0.0, spec)
    h_center = on_axis.intensity / on_axis.intensity.sum()
    return psfs, h_center


def cmd_design_mask(args):
    cfg = load_config(args.config)
    out = _ensure_dir(args.out)
    n = cfg.optics.grid
    contour = cfg.mask.contour
    target = maskdesign.perlin_contour_psf(
        n, n, cfg.optics.pitch, cfg.mask.seed, contour_level=contour.level,
        noise_scale=contour.scale, band_width=contour.band,
        blur_sigma=contour.blur,
    )
    nfpr = maskdesign.NfprConfig(cfg.mask.iterations, cfg.optics.d,
                                 cfg.optics.wavelength, cfg.mask.seed)
    mask, residuals = maskdesign.nfpr_optimize(target, nfpr)

    spec = optics.PropagationSpec(cfg.optics.d, cfg.optics.wavelength)
    achieved = optics.fresnel_propagate(
        optics.WaveField(mask.transmission(), mask.pitch), spec
    )
    achieved_intensity = np.abs(achieved.data) ** 2

    gridio.write_grid(os.path.join(out, "mask.pclg"), mask.phase, mask.pitch)
    gridio.write_grid(os.path.join(out, "target_psf.pclg"),
                      target.intensity, target.pitch)
    gridio.write_grid(os.path.join(out, "achieved_psf.pclg"),
                      achieved_intensity, mask.pitch)
    gridio.write_png_preview(os.path.join(out, "target_psf.png"),
                             target.intensity)
    gridio.write_png_preview(os.path.join(out, "achieved_psf.png"),
                             achieved_intensity)
    gridio.write_csv(os.path.join(out, "residuals.csv"), "iter,residual",
                     list(enumerate(residuals)))
    print(f"mask designed: {n}x{n}, {cfg.mask.iterations} iterations, "
          f"final residual {residuals[-1]:.4f}")
    return 0


def cmd_psf_sweep(args):
    cfg = load_config(args.config)
    out = _ensure_dir(args.out)
    mask_path = args.mask or cfg.io.mask
    try:
        mask = _load_mask(mask_path)
    except FileNotFoundError:
        _fail(f"cannot read mask file: {mask_path}")
    spec = optics.PropagationSpec(cfg.optics.d, cfg.optics.wavelength)
    try:
        angles_deg = [float(a) for a in args.angles.split(",") if a.strip()]
    except ValueError:
        _fail(f"bad angle list: {args.angles!r}", code=2)
    if not angles_deg:
        _fail("angle list is empty", code=2)

    reference = optics.simulate_psf(mask, 0.0, 0.0, spec)
    rows = []
    for angle in angles_deg:
        psf = optics.simulate_psf(mask, np.deg2rad(angle), 0.0, spec)
        stem = f"psf_{angle:+07.2f}deg".replace("+", "p").replace("-", "m")
        gridio.write_grid(os.path.join(out, stem + ".pclg"),
                          psf.intensity, psf.pitch)
        gridio.write_png_preview(os.path.join(out, stem + ".png"),
                                 psf.intensity)
        rows.append((angle, optics.psf_similarity(reference, psf)))
    gridio.write_csv(os.path.join(out, "similarity.csv"),
                     "angle_deg,similarity", rows)
    print(f"{len(rows)} PSFs written to {out}")
    return 0


def _scene_files(directory):
    names = sorted(
        f for f in os.listdir(directory)
        if f.lower().endswith((".pgm", ".png"))
    )
    return [os.path.join(directory, f) for f in names]


def cmd_synthesize(args):
    cfg = load_config(args.config)
    out = _ensure_dir(args.out)
    n = cfg.optics.grid
    mask_path = args.mask or cfg.io.mask
    try:
        mask = _load_mask(mask_path)
    except FileNotFoundError:
        _fail(f"cannot read mask file: {mask_path}")

    if not os.path.isdir(args.scenes):
        _fail(f"scene directory not found: {args.scenes}")
    files = _scene_files(args.scenes)
    if not files:
        _fail(f"no inputs: {args.scenes} has no .pgm/.png scenes")

    psfs, h_center = _camera_psfs(mask, cfg)
    fwd_weights = recon.compute_weights((n, n), psfs.centers,
                                        power=cfg.forward.weight_power)
    _ensure_dir(os.path.join(out, "meas"))
    _ensure_dir(os.path.join(out, "target"))
    _ensure_dir(os.path.join(out, "psf"))
    for i, kernel in enumerate(psfs.kernels):
        gridio.write_grid(os.path.join(out, "psf", f"psf_{i:02d}.pclg"),
                          kernel, psfs.pitch)
    gridio.write_grid(os.path.join(out, "psf", "h_center.pclg"),
                      h_center, psfs.pitch)

    items = []
    errors = []
    for index, path in enumerate(files):
        name = os.path.splitext(os.path.basename(path))[0]
        try:
            scene = gridio.read_image(path)
            if scene.shape != (n, n):
                raise ValueError(
                    f"scene is {scene.shape}, config grid is {(n, n)}"
                )
        except (ValueError, OSError) as exc:
            errors.append(f"{path}: {exc}")
            continue
        seed_y = (cfg.forward.seed, index, 0)
        seed_r = (cfg.forward.seed, index, 1)
        y = imaging.sv_forward(
            scene, psfs, crop=cfg.forward.crop,
            quant_bits=cfg.forward.quant_bits,
            noise_snr_db=cfg.forward.snr_db, seed=seed_y,
            weights=fwd_weights,
        )
        target = rangenull.approx_range_project(
            scene, h_center,
            imaging.ForwardSpec(
                crop=cfg.forward.crop, pad_factor=cfg.forward.pad_factor,
                noise_snr_db=cfg.forward.snr_db,
                quant_bits=cfg.forward.quant_bits, seed=seed_r,
            ),
            wiener_reg=cfg.recon.reg,
        )
        gridio.write_grid(os.path.join(out, "meas", name + ".pclg"),
                          y.pixels, psfs.pitch)
        gridio.write_grid(os.path.join(out, "target", name + ".pclg"),
                          target, psfs.pitch)
        items.append({
            "name": name,
            "measurement": f"meas/{name}.pclg",
            "target": f"target/{name}.pclg",
            "seed": list(seed_y),
            "bit_depth": cfg.forward.quant_bits,
            "quant_scale": y.scale,
        })

    for message in errors:
        print(f"warning: skipped {message}", file=sys.stderr)
    if not items:
        _fail("all scene files failed to load")

    manifest = {
        "format": "maskcam-dataset-v1",
        "scene_grid": [n, n],
        "crop": list(cfg.forward.crop) if cfg.forward.crop else None,
        "pad_factor": cfg.forward.pad_factor,
        "k": cfg.forward.k,
        "fov_deg": cfg.forward.fov_deg,
        "weight_power": cfg.forward.weight_power,
        "snr_db": cfg.forward.snr_db,
        "centers": psfs.centers.tolist(),
        "psf_files": [f"psf/psf_{i:02d}.pclg" for i in range(len(psfs.kernels))],
        "h_center": "psf/h_center.pclg",
        "items": items,
    }
    with open(os.path.join(out, MANIFEST_NAME), "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"dataset: {len(items)} pairs in {out}"
          + (f" ({len(errors)} skipped)" if errors else ""))
    return 0


def _read_manifest(dataset):
    path = os.path.join(dataset, MANIFEST_NAME)
    if not os.path.exists(path):
        _fail(f"dataset manifest not found: {path}")
    with open(path) as fh:
        manifest = json.load(fh)
    if manifest.get("format") != "maskcam-dataset-v1":
        _fail(f"{path}: unknown dataset format")
    return manifest


def _load_pairs(dataset, manifest, pad_factor):
    pairs = []
    for item in manifest["items"]:
        codes, _ = gridio.read_grid(os.path.join(dataset, item["measurement"]))
        target, _ = gridio.read_grid(os.path.join(dataset, item["target"]))
        y = imaging.Measurement(codes.real, item["bit_depth"],
                                item["quant_scale"])
        padded = imaging.replicate_pad(y, pad_factor)
        pairs.append((padded.physical(), target.real))
    return pairs


def cmd_calibrate(args):
    cfg = load_config(args.config)
    out = _ensure_dir(args.out)
    manifest = _read_manifest(args.dataset)
    scene_shape = tuple(manifest["scene_grid"])
    pairs = _load_pairs(args.dataset, manifest, manifest["pad_factor"])
    h_center, pitch = gridio.read_grid(
        os.path.join(args.dataset, manifest["h_center"])
    )
    calib = cfg.recon.calib
    history = []
    try:
        kernel_set = recon.calibrate_kernels(
            pairs, optics.Psf(h_center.real, pitch), manifest["k"],
            reg_mu=calib.mu, lr=calib.lr, epochs=calib.epochs,
            init_reg=calib.init_reg, scene_shape=scene_shape,
            method=calib.method, history=history,
        )
    except RuntimeError as exc:
        _fail(str(exc))
    gridio.write_kernel_set(os.path.join(out, "kernels.pclk"), kernel_set)
    gridio.write_csv(os.path.join(out, "loss.csv"), "epoch,mse",
                     list(enumerate(history)))
    final = history[-1] if history else float("nan")
    print(f"calibrated {manifest['k']}x{manifest['k']} kernels "
          f"({calib.method}, {calib.epochs} epochs, final loss {final:.4f})")
    return 0


def cmd_reconstruct(args):
    cfg = load_config(args.config)
    out = _ensure_dir(args.out)
    method = args.method or cfg.recon.method
    if method not in ("wiener", "admm", "svdeconv"):
        _fail(f"unknown reconstruction method '{method}'", code=2)
    manifest = _read_manifest(args.dataset)
    scene_shape = tuple(manifest["scene_grid"])
    h_center, _ = gridio.read_grid(
        os.path.join(args.dataset, manifest["h_center"])
    )
    h_center = h_center.real

    kernel_set = weight_field = None
    if method == "svdeconv":
        kernels_path = args.kernels or cfg.io.kernels
        if not os.path.exists(kernels_path):
            _fail(
                "svdeconv needs a calibrated kernel file: pass --kernels "
                f"(looked for '{kernels_path}'); run 'maskcam calibrate' first",
                code=2,
            )
        kernel_set = gridio.read_kernel_set(kernels_path)
        weight_field = recon.compute_weights(scene_shape, kernel_set.centers)

    admm_cfg = recon.AdmmConfig(
        tv_weight=cfg.recon.admm.tv_weight, penalty=cfg.recon.admm.penalty,
        iterations=cfg.recon.admm.iterations,
        tolerance=cfg.recon.admm.tolerance,
    )

    _ensure_dir(os.path.join(out, "recon"))
    rows = []
    for item in sorted(manifest["items"], key=lambda it: it["name"]):
        codes, pitch = gridio.read_grid(
            os.path.join(args.dataset, item["measurement"])
        )
        y = imaging.Measurement(codes.real, item["bit_depth"],
                                item["quant_scale"])
        target, _ = gridio.read_grid(
            os.path.join(args.dataset, item["target"])
        )
        target = target.real
        physical = y.physical()
        if method == "wiener":
            padded = imaging.replicate_pad(physical, manifest["pad_factor"])
            xhat = recon.wiener_deconvolve(padded, h_center, cfg.recon.reg,
                                           scene_shape)
        elif method == "admm":
            xhat = recon.admm_tv(physical, h_center, admm_cfg, scene_shape)
        else:
            padded = imaging.replicate_pad(physical, manifest["pad_factor"])
            xhat = recon.svdeconv_apply(padded, kernel_set, weight_field,
                                        scene_shape)
        gridio.write_grid(
            os.path.join(out, "recon", item["name"] + ".pclg"), xhat, pitch
        )
        region = qmetrics.RegionSpec(cfg.metrics.center_fraction)
        center_db, periph_db = qmetrics.region_psnr(xhat, target, region)
        rows.append((item["name"], qmetrics.psnr(xhat, target),
                     qmetrics.ssim(xhat, target), center_db, periph_db))
    gridio.write_csv(os.path.join(out, "metrics.csv"),
                     "name,psnr,ssim,center_psnr,periphery_psnr", rows)
    mean_psnr = float(np.mean([row[1] for row in rows]))
    print(f"{method}: {len(rows)} reconstructions, mean PSNR "
          f"{mean_psnr:.2f} dB")
    return 0


def _decompose_operator(scene_side, model):
    """Small explicit operator for the decomposition checks."""
    scene_shape = (scene_side, scene_side)
    if model == "delta":
        forward = lambda x: x
        return imaging.build_matrix(forward, scene_shape, scene_shape)
    # cropped spatially varying model with two distinct blur kernels per axis
    k = 2
    centers = recon.region_grid(scene_shape, k)
    kernels = []
    coords = np.arange(5) - 2.0
    for i in range(k * k):
        sigma = 0.6 + 0.35 * i
        g = np.exp(-(coords[:, None] ** 2 + coords[None, :] ** 2)
                   / (2 * sigma**2))
        kernels.append(g / g.sum())
    psfs = recon.PsfSet(np.array(kernels), centers, k, 1.0, "spatial",
                        scene_shape)
    weights = recon.compute_weights(scene_shape, centers)
    crop = (scene_side - 2, scene_side - 2)
    forward = lambda x: imaging.sv_forward(
        np.clip(x, 0.0, 1.0), psfs, crop=crop, weights=weights
    ).pixels
    return imaging.build_matrix(forward, scene_shape, crop)


def cmd_decompose(args):
    cfg = load_config(args.config)
    side = args.scene_size
    if side * side > imaging.MAX_DENSE_CELLS:
        _fail(f"scene size {side} exceeds the dense-operator guard "
              f"({imaging.MAX_DENSE_CELLS} cells); use a smaller scene",
              code=2)
    operator = _decompose_operator(side, args.model)
    pinv = rangenull.pseudo_inverse(operator)
    if args.inject_fault:
        vt = pinv.vt.copy()
        vt[0] = vt[0] + 1e-4
        pinv = rangenull.PseudoInverse(
            pinv.u, pinv.singular_values, vt, pinv.rank, pinv.rcond,
            pinv.scene_shape, pinv.sensor_shape,
        )

    a = operator.matrix
    proj = pinv.vt[: pinv.rank].T @ pinv.vt[: pinv.rank]
    eye = np.eye(proj.shape[0])
    rng = np.random.default_rng(cfg.forward.seed)
    checks = []

    norm_proj = np.linalg.norm(proj)
    checks.append(("projector idempotency",
                   np.linalg.norm(proj @ proj - proj) / norm_proj, 1e-9))
    checks.append(("null x range product",
                   np.linalg.norm((eye - proj) @ proj) / norm_proj, 1e-9))
    checks.append(("A annihilates null space",
                   np.linalg.norm(a @ (eye - proj)) / np.linalg.norm(a), 1e-9))

    x = rng.standard_normal(operator.scene_shape)
    range_part = rangenull.range_project(x, pinv)
    null_part = x - range_part
    denom = (np.linalg.norm(range_part) * np.linalg.norm(null_part)
             + 1e-300)
    checks.append(("orthogonality of components",
                   abs(float(np.sum(range_part * null_part))) / denom, 1e-9))
    checks.append(("decomposition completeness",
                   float(np.max(np.abs(range_part + null_part - x))), 1e-12))

    worst = 0.0
    ax_norm = np.linalg.norm(a @ x.ravel())
    for _ in range(20):
        proposal = rng.standard_normal(operator.scene_shape)
        completed = rangenull.null_complete(range_part, proposal, pinv)
        residual = np.linalg.norm(a @ (completed - x).ravel()) / ax_norm
        worst = max(worst, residual)
    checks.append(("null completion consistency", worst, 1e-9))

    null_vec = (eye - proj) @ rng.standard_normal(proj.shape[0])
    exact = rangenull.null_loss(null_vec.reshape(operator.scene_shape),
                                np.zeros(operator.scene_shape), operator)
    checks.append(("null-space loss vanishes", exact, 1e-18))

    failed = False
    for name, residual, tol in checks:
        status = "PASS" if residual <= tol else "FAIL"
        failed = failed or status == "FAIL"
        print(f"{status}  {name:32s} residual {residual:.3e}  tol {tol:.0e}")
    return 1 if failed else 0


def cmd_metrics(args):
    cfg = load_config(args.config)
    recon_files = {
        os.path.splitext(f)[0]: os.path.join(args.recon, f)
        for f in os.listdir(args.recon) if f.endswith(".pclg")
    }
    ref_files = {
        os.path.splitext(f)[0]: os.path.join(args.reference, f)
        for f in os.listdir(args.reference) if f.endswith(".pclg")
    }
    names = sorted(set(recon_files) & set(ref_files))
    if not names:
        _fail("no matching grid files between the two directories")
    region = qmetrics.RegionSpec(cfg.metrics.center_fraction)
    rows = []
    for name in names:
        a, _ = gridio.read_grid(recon_files[name])
        b, _ = gridio.read_grid(ref_files[name])
        center_db, periph_db = qmetrics.region_psnr(a.real, b.real, region)
        rows.append((name, qmetrics.psnr(a.real, b.real),
                     qmetrics.ssim(a.real, b.real), center_db, periph_db))
    gridio.write_csv(args.out, "name,psnr,ssim,center_psnr,periphery_psnr",
                     rows)
    print(f"metrics for {len(rows)} pairs written to {args.out}")
    return 0


def cmd_demo_scenes(args):
    out = _ensure_dir(args.out)
    for i in range(args.count):
        scene = scenes.synthetic_scene(args.size, seed=args.seed + i)
        gridio.write_pgm(os.path.join(out, f"scene_{i:04d}.pgm"), scene)
    print(f"{args.count} scenes of {args.size}x{args.size} written to {out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="maskcam",
        description="Mask-based lensless camera toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(func=func)
        p.add_argument("--config", "-c", default=None,
                       help="config file (or set MASKCAM_CONFIG)")
        return p

    p = add("design-mask", cmd_design_mask,
            help="design a phase mask from a gradient-noise contour target")
    p.add_argument("--out", required=True, help="output directory")

    p = add("psf-sweep", cmd_psf_sweep,
            help="simulate off-axis PSFs and their similarity to on-axis")
    p.add_argument("--mask", default=None, help="mask grid file")
    p.add_argument("--angles", default="0,5,10,15,20,25,30",
                   help="comma-separated angles in degrees")
    p.add_argument("--out", required=True)

    p = add("synthesize", cmd_synthesize,
            help="build a measurement + range-content dataset from scenes")
    p.add_argument("--scenes", required=True, help="scene image directory")
    p.add_argument("--mask", default=None)
    p.add_argument("--out", required=True)

    p = add("calibrate", cmd_calibrate,
            help="fit spatially varying deconvolution kernels to a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)

    p = add("reconstruct", cmd_reconstruct,
            help="reconstruct a dataset and report quality metrics")
    p.add_argument("--dataset", required=True)
    p.add_argument("--method", default=None,
                   choices=["wiener", "admm", "svdeconv"])
    p.add_argument("--kernels", default=None,
                   help="calibrated kernel file (svdeconv)")
    p.add_argument("--out", required=True)

    p = add("decompose", cmd_decompose,
            help="verify range/null-space identities on an explicit operator")
    p.add_argument("--scene-size", type=int, default=16)
    p.add_argument("--model", choices=["delta", "sv"], default="sv")
    p.add_argument("--inject-fault", action="store_true",
                   help="perturb the pseudo-inverse; the checks must fail")

    p = add("metrics", cmd_metrics,
            help="full-reference metrics between two grid directories")
    p.add_argument("--recon", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("demo-scenes",
                       help="generate procedural grayscale test scenes")
    p.set_defaults(func=cmd_demo_scenes)
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
