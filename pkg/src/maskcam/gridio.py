"""File formats: binary grid containers, kernel-set containers, operator
blobs, PGM/PNG images, and CSV tables.

GridFile layout (little-endian, bit-exact round trip):

    magic   4s   b"PCLG"
    version u16  1
    dtype   u16  0 = real64, 1 = complex128
    width   u32
    height  u32
    pitch   f64  meters per cell
    payload      width * height values, row-major

Kernel-set container ("PCLK"): header (version u16, domain u16
0=spatial/1=frequency, K u16, kernel w/h u32, scene w/h u32, pitch f64),
then K^2 * 2 f64 focal centers (row, col) and K^2 kernel grids (f64 or
c128, row-major). Operator blob ("PCLO"): version u16, sensor h/w u32,
scene h/w u32, then the f64 matrix row-major (sensor cells x scene cells).
"""

import struct

import numpy as np
from PIL import Image

GRID_MAGIC = b"PCLG"
KERNELS_MAGIC = b"PCLK"
OPERATOR_MAGIC = b"PCLO"
FORMAT_VERSION = 1

_GRID_HEADER = struct.Struct("<4sHHIId")
_KERNELS_HEADER = struct.Struct("<4sHHHIIIId")
_OPERATOR_HEADER = struct.Struct("<4sHIIII")

_DTYPE_TAGS = {0: np.dtype("<f8"), 1: np.dtype("<c16")}


def write_grid(path, data, pitch):
    """Write a 2-D real or complex grid; dtype tag chosen from the data."""
    data = np.asarray(data)
    if data.ndim != 2:
        raise ValueError("grid must be 2-D")
    if np.iscomplexobj(data):
        tag, dtype = 1, _DTYPE_TAGS[1]
    else:
        tag, dtype = 0, _DTYPE_TAGS[0]
    height, width = data.shape
    with open(path, "wb") as fh:
        fh.write(_GRID_HEADER.pack(GRID_MAGIC, FORMAT_VERSION, tag,
                                   width, height, float(pitch)))
        fh.write(np.ascontiguousarray(data, dtype=dtype).tobytes())


def read_grid(path):
    """Read a grid file; returns (data, pitch)."""
    with open(path, "rb") as fh:
        header = fh.read(_GRID_HEADER.size)
        if len(header) != _GRID_HEADER.size:
            raise ValueError(f"{path}: truncated grid header")
        magic, version, tag, width, height, pitch = _GRID_HEADER.unpack(header)
        if magic != GRID_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        if tag not in _DTYPE_TAGS:
            raise ValueError(f"{path}: unknown dtype tag {tag}")
        dtype = _DTYPE_TAGS[tag]
        payload = fh.read(width * height * dtype.itemsize)
        if len(payload) != width * height * dtype.itemsize:
            raise ValueError(f"{path}: truncated payload")
    data = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    return data.copy(), pitch


def write_kernel_set(path, psfs):
    """Write a PsfSet container (see maskcam.recon.PsfSet)."""
    domain_tag = 0 if psfs.domain == "spatial" else 1
    count, kh, kw = psfs.kernels.shape
    scene = psfs.scene_shape or (0, 0)
    dtype = _DTYPE_TAGS[0] if domain_tag == 0 else _DTYPE_TAGS[1]
    with open(path, "wb") as fh:
        fh.write(_KERNELS_HEADER.pack(
            KERNELS_MAGIC, FORMAT_VERSION, domain_tag, psfs.grid_side,
            kw, kh, scene[1], scene[0], float(psfs.pitch)))
        fh.write(np.ascontiguousarray(psfs.centers, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(psfs.kernels, dtype=dtype).tobytes())


def read_kernel_set(path):
    """Read a PsfSet container back into a PsfSet."""
    from .recon import PsfSet

    with open(path, "rb") as fh:
        header = fh.read(_KERNELS_HEADER.size)
        if len(header) != _KERNELS_HEADER.size:
            raise ValueError(f"{path}: truncated kernel-set header")
        (magic, version, domain_tag, side, kw, kh, scene_w, scene_h,
         pitch) = _KERNELS_HEADER.unpack(header)
        if magic != KERNELS_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        count = side * side
        centers = np.frombuffer(fh.read(count * 2 * 8), dtype="<f8")
        centers = centers.reshape(count, 2).copy()
        dtype = _DTYPE_TAGS[0] if domain_tag == 0 else _DTYPE_TAGS[1]
        kernels = np.frombuffer(fh.read(count * kh * kw * dtype.itemsize),
                                dtype=dtype)
        kernels = kernels.reshape(count, kh, kw).copy()
    domain = "spatial" if domain_tag == 0 else "frequency"
    scene_shape = (scene_h, scene_w) if scene_h and scene_w else None
    return PsfSet(kernels, centers, side, pitch, domain, scene_shape)


def write_operator(path, operator):
    """Write a LinearOperator blob."""
    with open(path, "wb") as fh:
        fh.write(_OPERATOR_HEADER.pack(
            OPERATOR_MAGIC, FORMAT_VERSION,
            operator.sensor_shape[0], operator.sensor_shape[1],
            operator.scene_shape[0], operator.scene_shape[1]))
        fh.write(np.ascontiguousarray(operator.matrix, dtype="<f8").tobytes())


def read_operator(path):
    """Read a LinearOperator blob."""
    from .imaging import LinearOperator

    with open(path, "rb") as fh:
        header = fh.read(_OPERATOR_HEADER.size)
        magic, version, sh, sw, ch, cw = _OPERATOR_HEADER.unpack(header)
        if magic != OPERATOR_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        matrix = np.frombuffer(fh.read(sh * sw * ch * cw * 8), dtype="<f8")
    return LinearOperator(matrix.reshape(sh * sw, ch * cw).copy(),
                          (ch, cw), (sh, sw))


def write_pgm(path, image, maxval=65535):
    """Write a [0, 1] grid as binary PGM (16-bit big-endian by default)."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ValueError("PGM images must be 2-D")
    codes = np.clip(np.round(image * maxval), 0, maxval)
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n{maxval}\n".encode()
    payload = codes.astype(">u2" if maxval > 255 else "u1").tobytes()
    with open(path, "wb") as fh:
        fh.write(header + payload)


def _read_pgm(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        tokens.append(blob[start:pos])
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: only binary (P5) PGM is supported")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    pos += 1  # single whitespace after maxval
    dtype = ">u2" if maxval > 255 else "u1"
    count = width * height
    data = np.frombuffer(blob, dtype=dtype, count=count, offset=pos)
    return data.reshape(height, width).astype(np.float64) / maxval


def read_image(path):
    """Read a grayscale image (PGM or PNG) scaled to [0, 1]."""
    name = str(path).lower()
    if name.endswith(".pgm"):
        return _read_pgm(path)
    if name.endswith(".png"):
        img = Image.open(path)
        if img.mode not in ("L", "I;16", "I"):
            img = img.convert("L")
        arr = np.asarray(img, dtype=np.float64)
        maxval = 65535.0 if img.mode in ("I;16", "I") else 255.0
        return arr / maxval
    raise ValueError(f"{path}: unsupported image format")


def write_png_preview(path, image):
    """8-bit min/max-normalized PNG preview; for visual inspection only."""
    image = np.asarray(image, dtype=np.float64)
    lo, hi = image.min(), image.max()
    if hi - lo < 1e-300:
        codes = np.zeros(image.shape, dtype=np.uint8)
    else:
        codes = np.round((image - lo) / (hi - lo) * 255.0).astype(np.uint8)
    Image.fromarray(codes, mode="L").save(path)


def write_csv(path, header, rows):
    """ASCII CSV with LF endings; floats serialized with repr (round-trip)."""

    def fmt(value):
        if isinstance(value, float):
            return repr(value)
        if isinstance(value, (np.floating,)):
            return repr(float(value))
        return str(value)

    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def read_csv(path):
    """Read a CSV written by write_csv; returns (header, list of rows)."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    return lines[0], [ln.split(",") for ln in lines[1:]]
