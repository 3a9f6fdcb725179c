"""Data pipeline: PGM ingestion, resizing, standardization and a
synthetic four-class chest-image stand-in generator.

Images are grayscale float arrays in [0, 255].  The preprocessing
order for model input is resize first, then per-image standardization
(zero mean, unit variance), so the statistics match what the network
actually consumes.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .rng import stream
from .tree import LABELS


@dataclass(frozen=True)
class LabeledImage:
    pixels: np.ndarray  # (h, w) float
    label: str
    source_id: str

    def __post_init__(self):
        if self.pixels.ndim != 2:
            raise ValueError(f"expected a 2-D grayscale image, got {self.pixels.shape}")
        if min(self.pixels.shape) < 8:
            raise ValueError(f"image sides must be >= 8, got {self.pixels.shape}")
        if not np.isfinite(self.pixels).all():
            raise ValueError(f"non-finite pixels in {self.source_id}")
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r} in {self.source_id}")


def standardize(image: np.ndarray) -> np.ndarray:
    """Per-image zero mean, unit variance (population denominator).

    Constant images have no scale to normalize by and map to zeros.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.size == 0:
        raise ValueError("empty image")
    mu = img.mean()
    sigma = img.std()
    if sigma == 0.0:
        return np.zeros_like(img)
    return (img - mu) / sigma


def _area_weights(src: int, dst: int) -> np.ndarray:
    """Row-overlap weights for area-average downsampling."""
    w = np.zeros((dst, src))
    r = src / dst
    for i in range(dst):
        lo, hi = i * r, (i + 1) * r
        s0, s1 = int(np.floor(lo)), int(np.ceil(hi))
        for s in range(s0, min(s1, src)):
            w[i, s] = max(0.0, min(hi, s + 1) - max(lo, s)) / r
    return w


def _bilinear_weights(src: int, dst: int) -> np.ndarray:
    """Half-pixel-center bilinear weights for enlarging."""
    w = np.zeros((dst, src))
    for i in range(dst):
        pos = (i + 0.5) * src / dst - 0.5
        s0 = int(np.floor(pos))
        frac = pos - s0
        lo = min(max(s0, 0), src - 1)
        hi = min(max(s0 + 1, 0), src - 1)
        w[i, lo] += 1.0 - frac
        w[i, hi] += frac
    return w


def _axis_weights(src: int, dst: int) -> np.ndarray:
    if dst == src:
        return np.eye(src)
    if dst < src:
        return _area_weights(src, dst)
    return _bilinear_weights(src, dst)


def resize(image: np.ndarray, target_side: int) -> np.ndarray:
    """Resample to target_side x target_side.

    Shrinking axes use exact area averaging (each output pixel is the
    mean of its source box); enlarging axes use bilinear
    interpolation.  Same-size axes pass through unchanged.
    """
    if target_side <= 0:
        raise ValueError(f"target side must be positive, got {target_side}")
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    if (h, w) == (target_side, target_side):
        return img.copy()
    wr = _axis_weights(h, target_side)
    wc = _axis_weights(w, target_side)
    return wr @ img @ wc.T


def read_pgm(path) -> np.ndarray:
    """Read a binary 8-bit PGM (P5) into a float array in [0, 255]."""
    with open(path, "rb") as fh:
        blob = fh.read()
    tokens = []
    i = 0
    while len(tokens) < 4:
        if i >= len(blob):
            raise ValueError(f"{path}: truncated PGM header")
        ch = blob[i : i + 1]
        if ch == b"#":
            while i < len(blob) and blob[i : i + 1] not in (b"\n", b"\r"):
                i += 1
        elif ch.isspace():
            i += 1
        else:
            start = i
            while i < len(blob) and not blob[i : i + 1].isspace() and blob[i : i + 1] != b"#":
                i += 1
            tokens.append(blob[start:i])
    magic, ws, hs, maxs = tokens
    if magic != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {magic!r})")
    try:
        w, h, maxval = int(ws), int(hs), int(maxs)
    except ValueError:
        raise ValueError(f"{path}: malformed PGM header") from None
    if w <= 0 or h <= 0:
        raise ValueError(f"{path}: invalid PGM dimensions {w}x{h}")
    if not 0 < maxval <= 255:
        raise ValueError(f"{path}: unsupported PGM maxval {maxval}")
    i += 1  # single whitespace byte after the header
    raster = blob[i : i + w * h]
    if len(raster) != w * h:
        raise ValueError(f"{path}: truncated PGM raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w).astype(np.float64)


def write_pgm(path, image: np.ndarray) -> None:
    """Write a float image in [0, 255] as binary 8-bit PGM."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D image, got {img.shape}")
    data = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def write_manifest(path, records) -> None:
    """Write (relative_path, label) records as a path,label CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "label"])
        for rec_path, label in records:
            writer.writerow([rec_path, label])


def read_manifest(path):
    """Read a path,label CSV into a list of (path, label) records."""
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["path", "label"]:
            raise ValueError(f"{path}: manifest header must be 'path,label'")
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'path,label'")
            records.append((row[0], row[1]))
    seen = set()
    for rec_path, _ in records:
        if rec_path in seen:
            raise ValueError(f"{path}: duplicate path {rec_path!r} in manifest")
        seen.add(rec_path)
    return records


def load_dataset(manifest_path) -> list:
    """Decode every manifest record into a LabeledImage, in order.

    Relative record paths resolve against the manifest's directory.
    """
    base = os.path.dirname(os.path.abspath(manifest_path))
    images = []
    for rec_path, label in read_manifest(manifest_path):
        full = rec_path if os.path.isabs(rec_path) else os.path.join(base, rec_path)
        if label not in LABELS:
            raise ValueError(f"record {rec_path!r}: unknown label {label!r}")
        if not os.path.exists(full):
            raise ValueError(f"record {rec_path!r}: file not found: {full}")
        pixels = read_pgm(full)
        images.append(LabeledImage(pixels=pixels, label=label, source_id=rec_path))
    return images


def _bump(side: int, cx: float, cy: float, sigma: float, amp: float) -> np.ndarray:
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    return amp * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * sigma**2))


def _box_blur(img: np.ndarray) -> np.ndarray:
    """3x3 mean filter with edge clamping."""
    padded = np.pad(img, 1, mode="edge")
    out = np.zeros_like(img)
    for dy in range(3):
        for dx in range(3):
            out += padded[dy : dy + img.shape[0], dx : dx + img.shape[1]]
    return out / 9.0


def _background(side: int, rng) -> np.ndarray:
    base = rng.normal(112.0, 2.0)
    gradient = np.linspace(-6.0, 6.0, side)[:, None] * np.ones((1, side))
    texture = _box_blur(_box_blur(rng.normal(0.0, 10.0, (side, side)))) * 3.0
    grain = rng.normal(0.0, 2.0, (side, side))
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    r2 = ((xx - side / 2) ** 2 + (yy - side / 2) ** 2) / (side / 2) ** 2
    vignette = -8.0 * r2
    return base + gradient + texture + grain + vignette


def _synth_one(label: str, side: int, rng) -> np.ndarray:
    img = _background(side, rng)
    if label == "BAC":
        # One large consolidation-like blob.
        sigma = side * rng.uniform(0.12, 0.18)
        amp = rng.uniform(70.0, 90.0)
        cx = side * rng.uniform(0.3, 0.7)
        cy = side * rng.uniform(0.3, 0.7)
        img += _bump(side, cx, cy, sigma, amp)
    elif label == "VIR_NO_COVID":
        # Many small scattered blobs.
        for _ in range(int(rng.integers(6, 11))):
            sigma = side * rng.uniform(0.03, 0.05)
            amp = rng.uniform(35.0, 55.0)
            cx = side * rng.uniform(0.1, 0.9)
            cy = side * rng.uniform(0.1, 0.9)
            img += _bump(side, cx, cy, sigma, amp)
    elif label == "COVID":
        # Bilateral peripheral haze: one diffuse band near each side
        # edge, broadly modulated along the vertical axis.
        yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
        ymod = np.exp(-((yy - side * 0.5) ** 2) / (2.0 * (side * 0.35) ** 2))
        for x_frac in (0.18, 0.82):
            xc = side * (x_frac + rng.uniform(-0.04, 0.04))
            sx = side * rng.uniform(0.08, 0.11)
            amp = rng.uniform(30.0, 45.0)
            img += amp * np.exp(-((xx - xc) ** 2) / (2.0 * sx**2)) * ymod
    elif label != "CTL":
        raise ValueError(f"unknown label {label!r}")
    return np.clip(np.rint(img), 0.0, 255.0)


def synth_generate(n_per_class: int, side: int, seed) -> list:
    """Deterministic synthetic dataset: n_per_class images per label.

    Classes are built to be visually distinct and learnable at small
    resolution: plain background (CTL), one large blob (BAC), many
    small blobs (VIR_NO_COVID), bilateral edge haze (COVID).  Pixels
    are quantized to whole values so a dataset written as PGM files
    reloads bit-identically.
    """
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    if side < 16:
        raise ValueError("side must be >= 16")
    rng = stream(seed, "synth")
    images = []
    for label in LABELS:
        for i in range(n_per_class):
            pixels = _synth_one(label, side, rng)
            images.append(
                LabeledImage(pixels=pixels, label=label, source_id=f"{label}_{i:04d}")
            )
    return images


def prepare_batch(images, side: int, dtype=np.float32) -> np.ndarray:
    """Resize + standardize a list of LabeledImages into (n, side, side, 1)."""
    out = np.empty((len(images), side, side, 1), dtype=dtype)
    for i, img in enumerate(images):
        out[i, :, :, 0] = standardize(resize(img.pixels, side))
    return out


def labels_to_ints(images) -> np.ndarray:
    """Map textual labels to their LABELS indices."""
    index = {label: i for i, label in enumerate(LABELS)}
    return np.array([index[img.label] for img in images], dtype=np.int64)
