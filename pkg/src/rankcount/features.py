"""Fixed-length image features: per-cell intensity statistics.

The image is partitioned into a g x g grid; each cell contributes
[mean, variance, edge energy, local-maxima count], concatenated in
row-major cell order.  Blobby bright spots register as local maxima and
drive edge energy, so the features grow with the number of rendered people.
Every statistic is computed from the cell's own pixels only.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class FeatureConfig:
    grid: int = 8
    localmax_threshold: float = 60.0

    def __post_init__(self):
        if self.grid < 1:
            raise ValueError("grid must be >= 1")
        if not 0 <= self.localmax_threshold <= 255:
            raise ValueError("localmax_threshold must be in [0, 255]")

    @property
    def feature_dim(self) -> int:
        return 4 * self.grid * self.grid


@dataclass
class NormStats:
    mean: np.ndarray
    std: np.ndarray  # every component >= STD_FLOOR

    @classmethod
    def identity(cls, dim: int) -> "NormStats":
        return cls(mean=np.zeros(dim), std=np.ones(dim))


class FeatureFileError(ValueError):
    """Malformed feature file; message carries the 1-based row number."""


def _cell_bounds(size: int, grid: int) -> list[tuple[int, int]]:
    return [((k * size) // grid, ((k + 1) * size) // grid) for k in range(grid)]


def _local_maxima_count(block: np.ndarray, threshold: float) -> int:
    padded = np.pad(block, 1, constant_values=-np.inf)
    center = padded[1:-1, 1:-1]
    is_max = center >= threshold
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            neighbor = padded[1 + dy : padded.shape[0] - 1 + dy, 1 + dx : padded.shape[1] - 1 + dx]
            is_max &= center > neighbor
    return int(np.count_nonzero(is_max))


def extract_features(pixels: np.ndarray, config: FeatureConfig) -> np.ndarray:
    """Feature vector of length 4*g*g for a grayscale image."""
    h, w = pixels.shape
    g = config.grid
    if h < g or w < g:
        raise ValueError(f"image {h}x{w} smaller than {g}x{g} grid")
    img = pixels.astype(np.float64)
    out = np.empty(config.feature_dim)
    k = 0
    for y0, y1 in _cell_bounds(h, g):
        for x0, x1 in _cell_bounds(w, g):
            block = img[y0:y1, x0:x1]
            edge = np.abs(np.diff(block, axis=1)).sum() + np.abs(np.diff(block, axis=0)).sum()
            out[k : k + 4] = (
                block.mean(),
                block.var(),
                edge,
                _local_maxima_count(block, config.localmax_threshold),
            )
            k += 4
    return out


def fit_normalization(vectors) -> NormStats:
    matrix = np.asarray(list(vectors), dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] < 2:
        raise ValueError("need at least 2 feature vectors to fit normalization")
    mean = matrix.mean(axis=0)
    std = np.maximum(matrix.std(axis=0), STD_FLOOR)
    return NormStats(mean=mean, std=std)


def apply_normalization(vector: np.ndarray, stats: NormStats) -> np.ndarray:
    return (np.asarray(vector, dtype=np.float64) - stats.mean) / stats.std


def write_feature_file(path, entries: list[tuple[str, np.ndarray]]) -> None:
    if not entries:
        raise ValueError("no feature vectors to write")
    dim = len(entries[0][1])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id"] + [f"f{k}" for k in range(dim)])
        for image_id, vector in entries:
            writer.writerow([image_id] + [repr(float(x)) for x in vector])


def load_feature_file(path) -> list[tuple[str, np.ndarray]]:
    """Read id -> vector rows; errors report the offending 1-based row."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not header or header[0].strip() != "id":
            raise FeatureFileError(f"row 1: expected header 'id,f0,...', got {header!r}")
        dim = len(header) - 1
        if dim < 1:
            raise FeatureFileError("row 1: header declares no feature columns")
        entries = []
        seen = set()
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 1:
                raise FeatureFileError(
                    f"row {row_no}: expected {dim} feature values, got {len(row) - 1}"
                )
            image_id = row[0].strip()
            if image_id in seen:
                raise FeatureFileError(f"row {row_no}: duplicate id {image_id!r}")
            seen.add(image_id)
            try:
                vector = np.array([float(x) for x in row[1:]], dtype=np.float64)
            except ValueError as exc:
                raise FeatureFileError(f"row {row_no}: {exc}") from exc
            entries.append((image_id, vector))
    return entries


def features_for_samples(samples, config: FeatureConfig | None) -> dict[str, np.ndarray]:
    """Raw feature vectors per sample id (extracted from pixels if needed)."""
    out = {}
    for sample in samples:
        if sample.features is not None:
            out[sample.id] = np.asarray(sample.features, dtype=np.float64)
        else:
            if config is None:
                raise ValueError(f"sample {sample.id!r} has pixels but no feature config given")
            out[sample.id] = extract_features(sample.pixels, config)
    return out
