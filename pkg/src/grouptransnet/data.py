"""Synthetic RGB-D scenes, binary PPM/PGM codec, augmentation and input resizing.

Dataset layout::

    <root>/rgb/<name>.ppm     P6, 8-bit
    <root>/depth/<name>.pgm   P5, 8-bit, larger value = nearer
    <root>/gt/<name>.pgm      P5, 0 or 255
    <root>/manifest.txt       one name per line
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tensor import interp_matrix

MANIFEST = "manifest.txt"


class CodecError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class DataError(ValueError):
    pass


# ---------------------------------------------------------------- codec

def encode_pnm(image: np.ndarray) -> bytes:
    """uint8 H x W -> P5, uint8 H x W x 3 -> P6."""
    img = np.asarray(image)
    if img.dtype != np.uint8:
        raise ValueError(f"encode_pnm: expected uint8, got {img.dtype}")
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"encode_pnm: unsupported shape {img.shape}")
    h, w = img.shape[:2]
    return magic + f"\n{w} {h}\n255\n".encode() + np.ascontiguousarray(img).tobytes()


def decode_pnm(blob: bytes) -> tuple[np.ndarray, int]:
    """Decode binary P5/P6 into (raster, maxval); uint8 when maxval < 256, else uint16."""
    if blob[:2] not in (b"P5", b"P6"):
        raise CodecError(f"unsupported magic {blob[:2]!r}, expected P5 or P6", 0)
    channels = 3 if blob[:2] == b"P6" else 1
    pos = 2
    fields, starts = [], []
    while len(fields) < 3:
        start = pos
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos:pos + 1] == b"#":
            while pos < len(blob) and blob[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        if pos == start and fields:
            raise CodecError("expected whitespace between header fields", pos)
        token_start = pos
        while pos < len(blob) and blob[pos:pos + 1].isdigit():
            pos += 1
        if pos == token_start:
            raise CodecError("malformed header: expected a decimal number", pos)
        fields.append(int(blob[token_start:pos]))
        starts.append(token_start)
    if pos >= len(blob) or not blob[pos:pos + 1].isspace():
        raise CodecError("malformed header: missing whitespace before raster", pos)
    pos += 1
    width, height, maxval = fields
    for start, ok in ((starts[0], width > 0), (starts[1], height > 0), (starts[2], 0 < maxval < 65536)):
        if not ok:
            raise CodecError(f"malformed header: width={width} height={height} maxval={maxval}", start)
    dtype = np.dtype(np.uint8) if maxval < 256 else np.dtype(">u2")
    need = width * height * channels * dtype.itemsize
    if len(blob) - pos < need:
        raise CodecError(f"truncated raster: need {need} bytes, have {len(blob) - pos}", len(blob))
    data = np.frombuffer(blob, dtype=dtype, count=width * height * channels, offset=pos)
    shape = (height, width, 3) if channels == 3 else (height, width)
    return data.reshape(shape).astype(np.uint8 if maxval < 256 else np.uint16), maxval


def read_pnm(path) -> tuple[np.ndarray, int]:
    try:
        return decode_pnm(Path(path).read_bytes())
    except CodecError as err:
        raise CodecError(f"{path}: {err.args[0].rsplit(' (byte offset', 1)[0]}", err.offset) from None


def write_pnm(path, image: np.ndarray) -> None:
    Path(path).write_bytes(encode_pnm(image))


def to_unit(raw: np.ndarray, maxval: int) -> np.ndarray:
    return raw.astype(np.float64) / maxval


def to_uint8(x: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(x) * 255.0), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------- samples

@dataclass
class SamplePair:
    rgb: np.ndarray    # 3 x S x S in [0, 1]
    depth: np.ndarray  # 1 x S x S in [0, 1]
    gt: np.ndarray     # 1 x S x S, exactly 0.0 / 1.0


@dataclass
class DatasetManifest:
    root: Path
    names: list[str]
    split: str = "train"

    def paths(self, name: str) -> tuple[Path, Path, Path]:
        return (self.root / "rgb" / f"{name}.ppm", self.root / "depth" / f"{name}.pgm",
                self.root / "gt" / f"{name}.pgm")


def read_manifest(root) -> DatasetManifest:
    root = Path(root)
    path = root / MANIFEST
    if not path.is_file():
        raise DataError(f"no {MANIFEST} in {root}")
    names = [line.strip() for line in path.read_text().splitlines() if line.strip()]
    if not names:
        raise DataError(f"{path} lists no samples")
    if len(set(names)) != len(names):
        raise DataError(f"{path} lists duplicate names")
    manifest = DatasetManifest(root, names)
    for name in names:
        for p in manifest.paths(name):
            if not p.is_file():
                raise DataError(f"manifest entry {name!r}: missing {p}")
    return manifest


def load_sample(paths) -> SamplePair:
    rgb_path, depth_path, gt_path = paths
    rgb, rmax = read_pnm(rgb_path)
    depth, dmax = read_pnm(depth_path)
    gt, gmax = read_pnm(gt_path)
    if rgb.ndim != 3 or depth.ndim != 2 or gt.ndim != 2:
        raise DataError(f"expected P6 rgb and P5 depth/gt, got shapes {rgb.shape}, {depth.shape}, {gt.shape}")
    if not rgb.shape[:2] == depth.shape == gt.shape:
        raise DataError(f"size mismatch among {rgb_path}, {depth_path}, {gt_path}")
    threshold = 128 if gmax == 255 else (gmax + 1) / 2
    return SamplePair(to_unit(rgb, rmax).transpose(2, 0, 1), to_unit(depth, dmax)[None],
                      (gt >= threshold).astype(np.float64)[None])


def load_dataset(root) -> tuple[DatasetManifest, list[SamplePair]]:
    manifest = read_manifest(root)
    return manifest, [load_sample(manifest.paths(n)) for n in manifest.names]


def save_sample(root, name: str, pair: SamplePair) -> None:
    root = Path(root)
    for sub in ("rgb", "depth", "gt"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    write_pnm(root / "rgb" / f"{name}.ppm", to_uint8(pair.rgb.transpose(1, 2, 0)))
    write_pnm(root / "depth" / f"{name}.pgm", to_uint8(pair.depth[0]))
    write_pnm(root / "gt" / f"{name}.pgm", (pair.gt[0] > 0.5).astype(np.uint8) * 255)


# ---------------------------------------------------------------- synthetic scenes

def _hsv_to_rgb(h: float, s: float, v: float) -> np.ndarray:
    k = (np.array([5.0, 3.0, 1.0]) + h * 6.0) % 6.0
    return v - v * s * np.clip(np.minimum(k, 4.0 - k), 0.0, 1.0)


def _shape_mask(rng: np.random.Generator, size: int, lo: float, hi: float) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size] + 0.5
    hgt, wid = rng.uniform(lo, hi, 2) * size
    cy = rng.uniform(hgt / 2, size - hgt / 2)
    cx = rng.uniform(wid / 2, size - wid / 2)
    if rng.random() < 0.5:
        return (np.abs(yy - cy) <= hgt / 2) & (np.abs(xx - cx) <= wid / 2)
    return ((yy - cy) / (hgt / 2)) ** 2 + ((xx - cx) / (wid / 2)) ** 2 <= 1.0


def synth_sample(rng: np.random.Generator, size: int) -> SamplePair:
    """One cluttered scene whose salient shape has its own hue and is strictly nearest."""
    yy, xx = np.mgrid[0:size, 0:size] / size
    base_hue = rng.random()
    rgb = np.empty((size, size, 3))
    freq = rng.uniform(2, 6, 2)
    phase = rng.uniform(0, 2 * np.pi, 2)
    texture = 0.5 + 0.25 * (np.sin(2 * np.pi * freq[0] * xx + phase[0])
                            * np.cos(2 * np.pi * freq[1] * yy + phase[1]))
    rgb[:] = _hsv_to_rgb(base_hue, 0.25, 0.6)
    rgb *= texture[..., None] + 0.5
    rgb += rng.normal(0, 0.04, rgb.shape)

    gy, gx = rng.uniform(-0.1, 0.1, 2)
    depth = 0.25 + gy * (yy - 0.5) + gx * (xx - 0.5) + rng.normal(0, 0.02, (size, size))

    salient_hue = (base_hue + rng.uniform(0.3, 0.7)) % 1.0
    for _ in range(rng.integers(0, 3)):
        mask = _shape_mask(rng, size, 0.1, 0.35)
        hue = (base_hue + rng.uniform(-0.12, 0.12)) % 1.0
        rgb[mask] = _hsv_to_rgb(hue, rng.uniform(0.3, 0.6), rng.uniform(0.4, 0.8))
        depth[mask] = rng.uniform(0.3, 0.42)

    while True:
        gt = _shape_mask(rng, size, 0.2, 0.55)
        if 0.02 < gt.mean() < 0.5:
            break
    shade = 0.85 + 0.15 * texture
    rgb[gt] = _hsv_to_rgb(salient_hue, rng.uniform(0.7, 1.0), 0.9) * shade[gt][:, None]
    near = rng.uniform(0.65, 0.85) + rng.normal(0, 0.02, int(gt.sum()))

    rgb = np.clip(rgb, 0.0, 1.0)
    # background (distractors included) stays below 0.47, the salient shape above 0.6
    depth = np.clip(depth, 0.0, 0.47)
    depth[gt] = np.clip(near, 0.6, 1.0)
    # quantise here so the returned sample is exactly what lands on disk
    return SamplePair(_quantise(rgb.transpose(2, 0, 1)), _quantise(depth)[None],
                      gt.astype(np.float64)[None])


def _quantise(x: np.ndarray) -> np.ndarray:
    return to_uint8(x).astype(np.float64) / 255.0


def gen_synthetic(root, count: int, size: int, seed: int) -> Path:
    """Write ``count`` scenes under ``root``; returns the manifest path."""
    if count < 1:
        raise ValueError("gen_synthetic: count must be >= 1")
    if size <= 0 or size % 32:
        raise ValueError(f"gen_synthetic: size must be a positive multiple of 32, got {size}")
    root = Path(root)
    try:
        for sub in ("rgb", "depth", "gt"):
            (root / sub).mkdir(parents=True, exist_ok=True)
        probe = root / ".write_probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as err:
        raise DataError(f"cannot write dataset to {root}: {err}") from None
    rng = np.random.default_rng(seed)
    names = [f"syn_{i:05d}" for i in range(count)]
    for name in names:
        save_sample(root, name, synth_sample(rng, size))
    manifest = root / MANIFEST
    manifest.write_text("".join(n + "\n" for n in names))
    return manifest


# ---------------------------------------------------------------- geometry

def resample(x: np.ndarray, size: int, mode: str = "bilinear") -> np.ndarray:
    """Resize the last two axes of a C x H x W array to size x size."""
    h, w = x.shape[-2:]
    if (h, w) == (size, size):
        return x.copy()
    if mode == "bilinear":
        return interp_matrix(h, size) @ x @ interp_matrix(w, size).T
    if mode == "nearest":
        rows = np.minimum(((np.arange(size) + 0.5) * h / size).astype(int), h - 1)
        cols = np.minimum(((np.arange(size) + 0.5) * w / size).astype(int), w - 1)
        return x[..., rows[:, None], cols[None, :]]
    raise ValueError(f"resample: unknown mode {mode!r}")


def resize_input(pair: SamplePair, target: int) -> SamplePair:
    if target <= 0 or target % 32:
        raise ValueError(f"resize_input: target must be a positive multiple of 32, got {target}")
    return SamplePair(resample(pair.rgb, target), resample(pair.depth, target),
                      resample(pair.gt, target, "nearest"))


def augment(pair: SamplePair, seed, crop: float = 0.9, force_flip: bool | None = None,
            rotation: int | None = None) -> SamplePair:
    """Random horizontal flip, 90% crop resized back, and a multiple-of-90 rotation.

    rgb, depth and gt receive the identical geometric transform; gt is
    resized with nearest neighbour and re-binarised.
    """
    rng = np.random.default_rng(seed)
    flip = rng.random() < 0.5 if force_flip is None else force_flip
    size = pair.gt.shape[-1]
    side = max(1, int(round(crop * size)))
    top, left = rng.integers(0, size - side + 1, 2)
    quarter = int(rng.integers(0, 4)) if rotation is None else rotation % 4

    def geom(x, mode):
        if flip:
            x = x[..., ::-1]
        if side < size:
            x = resample(x[..., top:top + side, left:left + side], size, mode)
        return np.ascontiguousarray(np.rot90(x, quarter, axes=(-2, -1)))

    gt = (geom(pair.gt, "nearest") >= 0.5).astype(np.float64)
    return SamplePair(geom(pair.rgb, "bilinear"), geom(pair.depth, "bilinear"), gt)


def flip(pair: SamplePair) -> SamplePair:
    return SamplePair(pair.rgb[..., ::-1].copy(), pair.depth[..., ::-1].copy(), pair.gt[..., ::-1].copy())


def stack(pairs: list[SamplePair]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return (np.stack([p.rgb for p in pairs]), np.stack([p.depth for p in pairs]),
            np.stack([p.gt for p in pairs]))


def list_maps(directory) -> dict[str, Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"not a directory: {directory}")
    return {p.stem: p for p in sorted(directory.iterdir())
            if p.suffix.lower() in (".pgm", ".ppm") and p.is_file()}

