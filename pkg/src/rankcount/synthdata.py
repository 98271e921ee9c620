"""Synthetic crowd-style images with exact counts, and count-to-pair conversion.

Each person is an isotropic Gaussian blob composited onto a noisy background,
so the ground-truth count of an image is exactly the number of rendered
blobs.  Count labels can then be turned into ranking pairs under the
high-contrast rule: a pair is emitted only when one count exceeds the other
by a configurable ratio.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rankgraph import RankingPair

MIN_IMAGE_SIDE = 16

# Blob and background parameters, in 8-bit intensity units.
BLOB_PEAK_RANGE = (0.4, 1.0)  # scaled by 255
BLOB_SIGMA_RANGE = (1.5, 3.0)
NOISE_AMPLITUDE = 8.0


@dataclass
class ImageSample:
    """An image known either by its pixels or by a precomputed feature vector."""

    id: str
    pixels: np.ndarray | None = None
    features: np.ndarray | None = None
    count: int | None = None

    def __post_init__(self):
        if (self.pixels is None) == (self.features is None):
            raise ValueError("exactly one of pixels/features must be present")
        if self.pixels is not None:
            h, w = self.pixels.shape
            if h < MIN_IMAGE_SIDE or w < MIN_IMAGE_SIDE:
                raise ValueError(f"image {self.id!r} smaller than {MIN_IMAGE_SIDE} px")
        if self.count is not None and self.count < 0:
            raise ValueError("count must be non-negative")


@dataclass
class SparsityReport:
    """Per-image label counts; ``zeta_mean`` is None when nothing is labeled."""

    zeta_per_image: dict[str, int]
    zeta_mean: float | None


def render_crowd(rng: np.random.Generator, count: int, width: int, height: int):
    """Render ``count`` Gaussian blobs plus background noise.

    Returns (pixels uint8 (height, width), centers list).  The centers list
    is what makes the count label exact: len(centers) == count.
    """
    canvas = np.zeros((height, width), dtype=np.float64)
    centers = []
    lo_peak, hi_peak = BLOB_PEAK_RANGE
    lo_sig, hi_sig = BLOB_SIGMA_RANGE
    for _ in range(count):
        cx = rng.uniform(0.0, width)
        cy = rng.uniform(0.0, height)
        peak = rng.uniform(lo_peak, hi_peak) * 255.0
        sigma = rng.uniform(lo_sig, hi_sig)
        centers.append((cx, cy))
        radius = int(math.ceil(4.0 * sigma))
        x0, x1 = max(0, int(cx) - radius), min(width, int(cx) + radius + 1)
        y0, y1 = max(0, int(cy) - radius), min(height, int(cy) + radius + 1)
        xs = np.arange(x0, x1) - cx
        ys = np.arange(y0, y1) - cy
        dist2 = ys[:, None] ** 2 + xs[None, :] ** 2
        canvas[y0:y1, x0:x1] += peak * np.exp(-dist2 / (2.0 * sigma * sigma))
    canvas += rng.uniform(0.0, NOISE_AMPLITUDE, size=canvas.shape)
    pixels = np.clip(np.rint(canvas), 0, 255).astype(np.uint8)
    return pixels, centers


def generate_synthetic(
    n: int,
    count_min: int,
    count_max: int,
    width: int = 128,
    height: int = 128,
    seed: int = 0,
) -> list[ImageSample]:
    """Generate ``n`` images with counts drawn log-uniformly from the range.

    Fully deterministic given the seed; the count label of every sample is
    exactly the number of blobs rendered into it.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 1 <= count_min <= count_max:
        raise ValueError(f"invalid count range [{count_min}, {count_max}]")
    rng = np.random.default_rng(seed)
    pad = max(4, len(str(n - 1)))
    samples = []
    for k in range(n):
        u = rng.uniform(math.log(count_min), math.log(count_max))
        count = min(max(int(round(math.exp(u))), count_min), count_max)
        pixels, _ = render_crowd(rng, count, width, height)
        samples.append(ImageSample(id=f"img_{k:0{pad}d}", pixels=pixels, count=count))
    return samples


def _qualifies(count_hi: int, count_lo: int, ratio: float) -> bool:
    if count_lo > 0:
        return count_hi >= ratio * count_lo
    return count_hi > 0


def autolabel_pairs(
    counts: dict[str, int],
    ratio: float,
    max_pairs: int | None = None,
    seed: int = 0,
) -> list[RankingPair]:
    """All ordered pairs whose counts differ by at least ``ratio``.

    If more pairs qualify than ``max_pairs``, a seeded uniform subset of
    that size is kept (a fixed annotation budget).
    """
    if ratio < 1:
        raise ValueError("ratio must be >= 1")
    if not counts:
        raise ValueError("counts must be non-empty")
    ids = sorted(counts)
    values = np.array([counts[i] for i in ids], dtype=np.float64)
    hi = values[:, None]
    lo = values[None, :]
    mask = np.where(lo > 0, hi >= ratio * lo, hi > 0)
    np.fill_diagonal(mask, False)
    pairs = [RankingPair(ids[a], ids[b]) for a, b in np.argwhere(mask)]
    if max_pairs is not None and len(pairs) > max_pairs:
        rng = np.random.default_rng(seed)
        keep = sorted(rng.choice(len(pairs), size=max_pairs, replace=False))
        pairs = [pairs[k] for k in keep]
    return pairs


def sparse_pairs(counts: dict[str, int], ratio: float, seed: int = 0) -> list[RankingPair]:
    """Greedy matching of images into disjoint ratio-qualifying pairs.

    Each image appears in at most one pair, so the resulting labels-per-image
    average is exactly 1.  Images with no qualifying partner stay unpaired.
    """
    if ratio < 1:
        raise ValueError("ratio must be >= 1")
    ids = sorted(counts)
    rng = np.random.default_rng(seed)
    order = [ids[k] for k in rng.permutation(len(ids))]
    used = set()
    pairs = []
    for a_pos, a in enumerate(order):
        if a in used:
            continue
        for b in order[a_pos + 1 :]:
            if b in used:
                continue
            ca, cb = counts[a], counts[b]
            if _qualifies(ca, cb, ratio):
                hi, lo = a, b
            elif _qualifies(cb, ca, ratio):
                hi, lo = b, a
            else:
                continue
            pairs.append(RankingPair(hi, lo))
            used.add(a)
            used.add(b)
            break
    return pairs


def sparsity_report(pairs: list[RankingPair]) -> SparsityReport:
    per_image: dict[str, int] = {}
    for pair in pairs:
        per_image[pair.hi] = per_image.get(pair.hi, 0) + 1
        per_image[pair.lo] = per_image.get(pair.lo, 0) + 1
    if not per_image:
        return SparsityReport(zeta_per_image={}, zeta_mean=None)
    mean = sum(per_image.values()) / len(per_image)
    return SparsityReport(zeta_per_image=per_image, zeta_mean=mean)


# ---------------------------------------------------------------------------
# File formats: binary PGM images, count and manifest CSVs.

def write_pgm(path, pixels: np.ndarray) -> None:
    h, w = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pixels.astype(np.uint8).tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    # tokenize by position: the raster may begin with whitespace-valued
    # bytes, so a whole-buffer split would eat pixel data
    pos = 0

    def token() -> bytes:
        nonlocal pos
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        return data[start:pos]

    if token() != b"P5":
        raise ValueError(f"{path}: not a binary (P5) PGM file")
    try:
        w, h, maxval = int(token()), int(token()), int(token())
    except ValueError:
        raise ValueError(f"{path}: malformed PGM header") from None
    if maxval != 255:
        raise ValueError(f"{path}: expected maxval 255, got {maxval}")
    raw = data[pos + 1 : pos + 1 + w * h]  # single whitespace byte ends the header
    if len(raw) != w * h:
        raise ValueError(f"{path}: truncated pixel data")
    return np.frombuffer(raw, dtype=np.uint8).reshape(h, w)


def write_counts(path, counts: dict[str, int]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "count"])
        for image_id in sorted(counts):
            writer.writerow([image_id, counts[image_id]])


def read_counts(path) -> dict[str, int]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["id", "count"]:
            raise ValueError(f"{path}: expected header 'id,count', got {header!r}")
        counts = {}
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"{path}: row {row_no}: expected 2 fields")
            image_id, text = row[0].strip(), row[1].strip()
            if image_id in counts:
                raise ValueError(f"{path}: row {row_no}: duplicate id {image_id!r}")
            counts[image_id] = int(text)
    return counts


def write_dataset(samples: list[ImageSample], out_dir) -> Path:
    """Write PGM images plus a ``id,path,count`` manifest; returns manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.csv"
    with open(manifest, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "path", "count"])
        for sample in samples:
            name = f"{sample.id}.pgm"
            write_pgm(out / name, sample.pixels)
            writer.writerow([sample.id, name, "" if sample.count is None else sample.count])
    return manifest


def _manifest_rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["id", "path", "count"]:
            raise ValueError(f"{path}: expected header 'id,path,count', got {header!r}")
        seen = set()
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}: row {row_no}: expected 3 fields")
            image_id, rel, count_text = (field.strip() for field in row)
            if image_id in seen:
                raise ValueError(f"{path}: row {row_no}: duplicate id {image_id!r}")
            seen.add(image_id)
            yield image_id, rel, int(count_text) if count_text else None


def read_manifest(path) -> list[ImageSample]:
    """Read a manifest CSV; image paths are resolved relative to the manifest."""
    base = Path(path).parent
    return [
        ImageSample(id=image_id, pixels=read_pgm(base / rel), count=count)
        for image_id, rel, count in _manifest_rows(path)
    ]


def manifest_counts(path) -> dict[str, int]:
    """Map image id -> count for manifest rows that carry a count label."""
    return {
        image_id: count
        for image_id, _, count in _manifest_rows(path)
        if count is not None
    }


def manifest_paths(path) -> dict[str, Path]:
    """Map image id -> absolute image path, without loading pixels."""
    base = Path(path).parent
    out = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        for row in reader:
            if row and len(row) >= 2:
                out[row[0].strip()] = (base / row[1].strip()).resolve()
    return out
