"""Calibration from potentials to absolute counts.

A small set of counted anchor images, spread across density levels, fixes a
linear map y = a*v + b by least squares.  Query images are then counted by
mapping their potential through it (clamped at zero).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import PotentialModel, forward, potentials_for_samples
from .synthdata import ImageSample


@dataclass(frozen=True)
class AnchorMap:
    slope: float
    intercept: float

    def __post_init__(self):
        if not (math.isfinite(self.slope) and math.isfinite(self.intercept)):
            raise ValueError("anchor map must be finite")


@dataclass(frozen=True)
class AnchorSet:
    entries: tuple  # of (image id, count)

    def __post_init__(self):
        ids = [sid for sid, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("anchor ids must be unique")
        if any(count < 0 for _, count in self.entries):
            raise ValueError("anchor counts must be >= 0")

    @property
    def size(self) -> int:
        return len(self.entries)


def select_anchors(counts: dict[str, int], k: int, seed: int) -> AnchorSet:
    """One seeded draw from each of k equal-frequency count strata."""
    if k < 2:
        raise ValueError("need at least 2 anchors")
    if k > len(counts):
        raise ValueError(f"k={k} exceeds population {len(counts)}")
    ordered = sorted(counts.items(), key=lambda kv: (kv[1], kv[0]))
    rng = np.random.default_rng(seed)
    picked = []
    n = len(ordered)
    for s in range(k):
        lo = (s * n) // k
        hi = ((s + 1) * n) // k
        picked.append(ordered[int(rng.integers(lo, hi))])
    return AnchorSet(entries=tuple(picked))


def fit_anchor_map(anchors: list[tuple[float, float]]) -> AnchorMap:
    """Closed-form least squares for y = a*v + b over (v, y) pairs."""
    if len(anchors) < 2:
        raise ValueError("need at least 2 anchors to fit")
    v = np.array([a[0] for a in anchors], dtype=np.float64)
    y = np.array([a[1] for a in anchors], dtype=np.float64)
    v_bar = v.mean()
    spread = np.sum((v - v_bar) ** 2)
    if spread == 0.0:
        raise ValueError("degenerate anchors: all potentials equal")
    slope = float(np.sum((v - v_bar) * (y - y.mean())) / spread)
    intercept = float(y.mean() - slope * v_bar)
    return AnchorMap(slope=slope, intercept=intercept)


def apply_anchor_map(amap: AnchorMap, v: float) -> float:
    return max(0.0, amap.slope * v + amap.intercept)


def infer_count(model: PotentialModel, amap: AnchorMap, sample: ImageSample) -> float:
    return apply_anchor_map(amap, forward_potential(model, sample))


def forward_potential(model: PotentialModel, sample: ImageSample) -> float:
    if sample.features is not None:
        return forward(model, sample.features)
    return potentials_for_samples(model, [sample])[sample.id]


def calibrate(model: PotentialModel, samples: list[ImageSample], anchor_set: AnchorSet) -> AnchorMap:
    """Fit the map from the model's potentials on the anchor images."""
    potentials = potentials_for_samples(model, samples)
    pairs = []
    for sid, count in anchor_set.entries:
        if sid not in potentials:
            raise ValueError(f"anchor id {sid!r} not among the provided samples")
        pairs.append((potentials[sid], float(count)))
    return fit_anchor_map(pairs)
