"""Pipeline configuration: TOML document with a strict schema.

One config file is one reproducible experiment record: every pipeline
parameter, including all random seeds, lives here. Unknown keys are
rejected; physical quantities are in SI units (meters) and decibels.

Sections and defaults::

    [optics]            # required: d, lambda, pitch, grid
    d = 1e-3            # mask-to-sensor distance (m)
    lambda = 532e-9     # design wavelength (m)
    pitch = 2e-6        # cell size (m)
    grid = 256          # simulation grid side (cells)

    [mask]
    seed = 1234
    iterations = 200

    [mask.contour]
    level = 0.5         # level-set position as a fraction of noise range
    scale = 48.0        # gradient-noise lattice size (cells)
    band = 0.01         # level-set band half-width (fraction of range)
    blur = 1.0          # Gaussian blur sigma (cells)

    [forward]
    k = 3               # kernel grid side (K x K regions)
    crop = [64, 64]     # centered sensor size; [] keeps full size
    pad_factor = 2.0
    snr_db = 30.0
    quant_bits = 12
    seed = 777
    fov_deg = 25.0      # field half-angle at the scene edge
    weight_power = 1.5  # forward low-rank blend sharpness (recon uses 0.5)

    [recon]
    method = "wiener"   # wiener | admm | svdeconv
    reg = 3e-4

    [recon.admm]
    tv_weight = 1e-3
    penalty = 1.0
    iterations = 100
    tolerance = 0.0

    [recon.calib]
    lr = 1e-2           # fraction of the analytic stability step (gd)
    epochs = 200
    mu = 1e-6           # proximity to the initial kernels
    method = "cg"       # cg | gd
    init_reg = 3e-4

    [metrics]
    center_fraction = 0.5

    [io]
    mask = "mask.pclg"      # paths may be overridden by CLI flags
    dataset = "dataset"
    kernels = "kernels.pclk"
"""

import os
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - version dependent
    import tomli as tomllib

ENV_CONFIG = "MASKCAM_CONFIG"


class ConfigError(Exception):
    """Schema violation, unknown key, or missing required field."""


@dataclass(frozen=True)
class OpticsConfig:
    d: float
    wavelength: float
    pitch: float
    grid: int


@dataclass(frozen=True)
class ContourConfig:
    level: float = 0.5
    scale: float = 48.0
    band: float = 0.01
    blur: float = 1.0


@dataclass(frozen=True)
class MaskConfig:
    seed: int = 1234
    iterations: int = 200
    contour: ContourConfig = field(default_factory=ContourConfig)


@dataclass(frozen=True)
class ForwardConfig:
    k: int = 3
    crop: tuple | None = None
    pad_factor: float = 2.0
    snr_db: float | None = 30.0
    quant_bits: int | None = 12
    seed: int = 777
    fov_deg: float = 25.0
    weight_power: float = 1.5


@dataclass(frozen=True)
class AdmmSection:
    tv_weight: float = 1e-3
    penalty: float = 1.0
    iterations: int = 100
    tolerance: float = 0.0


@dataclass(frozen=True)
class CalibSection:
    lr: float = 1e-2
    epochs: int = 200
    mu: float = 1e-6
    method: str = "cg"
    init_reg: float = 3e-4


@dataclass(frozen=True)
class ReconConfig:
    method: str = "wiener"
    reg: float = 3e-4
    admm: AdmmSection = field(default_factory=AdmmSection)
    calib: CalibSection = field(default_factory=CalibSection)


@dataclass(frozen=True)
class MetricsConfig:
    center_fraction: float = 0.5


@dataclass(frozen=True)
class IoConfig:
    mask: str = "mask.pclg"
    dataset: str = "dataset"
    kernels: str = "kernels.pclk"


@dataclass(frozen=True)
class PipelineConfig:
    optics: OpticsConfig
    mask: MaskConfig
    forward: ForwardConfig
    recon: ReconConfig
    metrics: MetricsConfig
    io: IoConfig


_SCHEMA = {
    "optics": {"d", "lambda", "pitch", "grid"},
    "mask": {"seed", "iterations", "contour"},
    "mask.contour": {"level", "scale", "band", "blur"},
    "forward": {"k", "crop", "pad_factor", "snr_db", "quant_bits", "seed",
                "fov_deg", "weight_power"},
    "recon": {"method", "reg", "admm", "calib"},
    "recon.admm": {"tv_weight", "penalty", "iterations", "tolerance"},
    "recon.calib": {"lr", "epochs", "mu", "method", "init_reg"},
    "metrics": {"center_fraction"},
    "io": {"mask", "dataset", "kernels"},
}

_REQUIRED = [("optics", "d"), ("optics", "lambda"), ("optics", "pitch"),
             ("optics", "grid")]


def _check_keys(document):
    for section, content in document.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section '{section}'")
        if not isinstance(content, dict):
            raise ConfigError(f"section '{section}' must be a table")
        for key, value in content.items():
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown config field '{section}.{key}'")
            sub = f"{section}.{key}"
            if sub in _SCHEMA:
                if not isinstance(value, dict):
                    raise ConfigError(f"field '{sub}' must be a table")
                for subkey in value:
                    if subkey not in _SCHEMA[sub]:
                        raise ConfigError(
                            f"unknown config field '{sub}.{subkey}'"
                        )


def _number(document, section, key, default=None, required=False):
    table = document.get(section, {})
    if key not in table:
        if required:
            raise ConfigError(f"missing required field '{section}.{key}'")
        return default
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"field '{section}.{key}' must be a number")
    return value


def _get(document, section, key, default):
    return document.get(section, {}).get(key, default)


def parse_config(document):
    """Validate a parsed TOML document and build a PipelineConfig."""
    _check_keys(document)
    for section, key in _REQUIRED:
        if key not in document.get(section, {}):
            raise ConfigError(f"missing required field '{section}.{key}'")

    optics = OpticsConfig(
        d=float(_number(document, "optics", "d", required=True)),
        wavelength=float(_number(document, "optics", "lambda", required=True)),
        pitch=float(_number(document, "optics", "pitch", required=True)),
        grid=int(_number(document, "optics", "grid", required=True)),
    )
    if optics.d <= 0 or optics.wavelength <= 0 or optics.pitch <= 0:
        raise ConfigError("optics quantities must be positive")
    if optics.grid < 16:
        raise ConfigError("optics.grid must be at least 16")

    contour_doc = document.get("mask", {}).get("contour", {})
    contour = ContourConfig(
        level=float(contour_doc.get("level", 0.5)),
        scale=float(contour_doc.get("scale", 48.0)),
        band=float(contour_doc.get("band", 0.01)),
        blur=float(contour_doc.get("blur", 1.0)),
    )
    mask = MaskConfig(
        seed=int(_number(document, "mask", "seed", 1234)),
        iterations=int(_number(document, "mask", "iterations", 200)),
        contour=contour,
    )

    crop_raw = _get(document, "forward", "crop", [64, 64])
    if crop_raw in ([], None):
        crop = None
    else:
        if (not isinstance(crop_raw, (list, tuple)) or len(crop_raw) != 2
                or not all(isinstance(v, int) and v > 0 for v in crop_raw)):
            raise ConfigError("forward.crop must be [height, width] or []")
        crop = (crop_raw[0], crop_raw[1])
    snr = _number(document, "forward", "snr_db", 30.0)
    bits = _get(document, "forward", "quant_bits", 12)
    if bits is not None and (isinstance(bits, bool) or not isinstance(bits, int)):
        raise ConfigError("forward.quant_bits must be an integer")
    forward = ForwardConfig(
        k=int(_number(document, "forward", "k", 3)),
        crop=crop,
        pad_factor=float(_number(document, "forward", "pad_factor", 2.0)),
        snr_db=None if snr is None else float(snr),
        quant_bits=bits,
        seed=int(_number(document, "forward", "seed", 777)),
        fov_deg=float(_number(document, "forward", "fov_deg", 25.0)),
        weight_power=float(_number(document, "forward", "weight_power", 1.5)),
    )
    if forward.k < 1:
        raise ConfigError("forward.k must be >= 1")
    if forward.pad_factor < 1:
        raise ConfigError("forward.pad_factor must be >= 1")
    if forward.quant_bits is not None and not 1 <= forward.quant_bits <= 16:
        raise ConfigError("forward.quant_bits must be in [1, 16]")

    admm_doc = document.get("recon", {}).get("admm", {})
    admm = AdmmSection(
        tv_weight=float(admm_doc.get("tv_weight", 1e-3)),
        penalty=float(admm_doc.get("penalty", 1.0)),
        iterations=int(admm_doc.get("iterations", 100)),
        tolerance=float(admm_doc.get("tolerance", 0.0)),
    )
    calib_doc = document.get("recon", {}).get("calib", {})
    calib = CalibSection(
        lr=float(calib_doc.get("lr", 1e-2)),
        epochs=int(calib_doc.get("epochs", 200)),
        mu=float(calib_doc.get("mu", 1e-6)),
        method=str(calib_doc.get("method", "cg")),
        init_reg=float(calib_doc.get("init_reg", 3e-4)),
    )
    if calib.method not in ("cg", "gd"):
        raise ConfigError("recon.calib.method must be 'cg' or 'gd'")
    recon = ReconConfig(
        method=str(_get(document, "recon", "method", "wiener")),
        reg=float(_number(document, "recon", "reg", 3e-4)),
        admm=admm,
        calib=calib,
    )
    if recon.method not in ("wiener", "admm", "svdeconv"):
        raise ConfigError("recon.method must be wiener, admm, or svdeconv")

    metrics = MetricsConfig(
        center_fraction=float(
            _number(document, "metrics", "center_fraction", 0.5)
        ),
    )
    if not 0.0 < metrics.center_fraction < 1.0:
        raise ConfigError("metrics.center_fraction must lie in (0, 1)")

    io_doc = document.get("io", {})
    io = IoConfig(
        mask=str(io_doc.get("mask", "mask.pclg")),
        dataset=str(io_doc.get("dataset", "dataset")),
        kernels=str(io_doc.get("kernels", "kernels.pclk")),
    )
    return PipelineConfig(optics, mask, forward, recon, metrics, io)


def load_config(path=None):
    """Load and validate a config file.

    ``path`` may be None, in which case the MASKCAM_CONFIG environment
    variable must point at the file.
    """
    if path is None:
        path = os.environ.get(ENV_CONFIG)
        if not path:
            raise ConfigError(
                f"no config given: pass --config or set {ENV_CONFIG}"
            )
    try:
        with open(path, "rb") as fh:
            document = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}")
    return parse_config(document)
