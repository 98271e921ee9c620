"""Counting and ranking metrics plus report formatting.

mse here is the root of the mean squared error; the name follows the
counting-benchmark convention of reporting that robustness number in an
"MSE" column next to MAE.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import PotentialModel, potentials_for_samples
from .rankgraph import RankingPair
from .training import pair_ranking_accuracy

DEFAULT_RANGE_EDGES = [0.0, 500.0, 1000.0, 2000.0]
DEFAULT_ACCURACY_DELTA = 0.2


def _paired(preds, gts):
    if len(preds) != len(gts):
        raise ValueError(f"length mismatch: {len(preds)} predictions vs {len(gts)} truths")
    if len(preds) == 0:
        raise ValueError("no samples to evaluate")
    return np.asarray(preds, dtype=np.float64), np.asarray(gts, dtype=np.float64)


def mae(preds, gts) -> float:
    p, g = _paired(preds, gts)
    return float(np.mean(np.abs(p - g)))


def mse(preds, gts) -> float:
    """Root mean squared error (see module docstring on the name)."""
    p, g = _paired(preds, gts)
    return float(math.sqrt(np.mean((p - g) ** 2)))


def ranking_accuracy(model: PotentialModel, pairs: list[RankingPair], samples) -> float:
    """Fraction of pairs the model orders correctly; ties count as wrong."""
    potentials = potentials_for_samples(model, samples)
    for p in pairs:
        if p.hi not in potentials or p.lo not in potentials:
            raise ValueError(f"pair references unknown image id {p.hi!r}/{p.lo!r}")
    return pair_ranking_accuracy(potentials, pairs)


@dataclass(frozen=True)
class RangeRow:
    lo: float
    hi: float | None  # None: open-ended top bucket
    accuracy: float
    mae: float
    n: int

    def label(self) -> str:
        top = "inf" if self.hi is None else f"{self.hi:g}"
        return f"[{self.lo:g}, {top})"


def per_range_report(preds, gts, range_edges, delta: float = DEFAULT_ACCURACY_DELTA):
    """Bucket by ground truth (edges are left edges, last bucket open-ended).

    Per bucket: fraction of samples with |pred - gt| <= delta*gt, bucket MAE,
    and bucket size.  Truths below the first edge fall in no bucket.  Empty
    buckets report n=0 with zeroed statistics.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    edges = [float(e) for e in range_edges]
    if not edges or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError("range edges must be strictly ascending and nonempty")
    p, g = _paired(preds, gts)
    rows = []
    for k, lo in enumerate(edges):
        hi = edges[k + 1] if k + 1 < len(edges) else None
        mask = (g >= lo) if hi is None else (g >= lo) & (g < hi)
        n = int(mask.sum())
        if n == 0:
            rows.append(RangeRow(lo=lo, hi=hi, accuracy=0.0, mae=0.0, n=0))
            continue
        err = np.abs(p[mask] - g[mask])
        accurate = err <= delta * g[mask]
        rows.append(
            RangeRow(
                lo=lo,
                hi=hi,
                accuracy=float(np.mean(accurate)),
                mae=float(np.mean(err)),
                n=n,
            )
        )
    return rows


@dataclass
class MetricsReport:
    mae: float
    mse: float
    n: int
    ranking_accuracy: float | None
    per_range: list[RangeRow]


def build_report(
    preds,
    gts,
    range_edges=None,
    delta: float = DEFAULT_ACCURACY_DELTA,
    ranking_acc: float | None = None,
) -> MetricsReport:
    edges = DEFAULT_RANGE_EDGES if range_edges is None else range_edges
    return MetricsReport(
        mae=mae(preds, gts),
        mse=mse(preds, gts),
        n=len(preds),
        ranking_accuracy=ranking_acc,
        per_range=per_range_report(preds, gts, edges, delta),
    )


def write_predictions(path, preds: dict[str, float]) -> None:
    lines = ["id,count"]
    for sid in sorted(preds):
        lines.append(f"{sid},{float(preds[sid])!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_predictions(path) -> dict[str, float]:
    preds = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "id,count":
            raise ValueError(f"{path}: expected header 'id,count', got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                sid, raw = line.split(",")
                value = float(raw)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed prediction row {line!r}") from None
            if sid in preds:
                raise ValueError(f"{path}:{lineno}: duplicate id {sid!r}")
            preds[sid] = value
    return preds


def write_metrics_csv(report: MetricsReport, path) -> None:
    lines = ["metric,range_lo,range_hi,value"]
    lines.append(f"mae,,,{report.mae!r}")
    lines.append(f"mse,,,{report.mse!r}")
    lines.append(f"n,,,{report.n}")
    rank = "" if report.ranking_accuracy is None else repr(report.ranking_accuracy)
    lines.append(f"ranking_accuracy,,,{rank}")
    for row in report.per_range:
        hi = "" if row.hi is None else f"{row.hi:g}"
        lines.append(f"range_accuracy,{row.lo:g},{hi},{row.accuracy!r}")
        lines.append(f"range_mae,{row.lo:g},{hi},{row.mae!r}")
        lines.append(f"range_n,{row.lo:g},{hi},{row.n}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def format_metrics_table(report: MetricsReport) -> str:
    lines = [
        f"samples           {report.n}",
        f"mae               {report.mae:.4f}",
        f"mse               {report.mse:.4f}",
    ]
    if report.ranking_accuracy is not None:
        lines.append(f"ranking_accuracy  {report.ranking_accuracy:.4f}")
    if report.per_range:
        labels = [row.label() for row in report.per_range]
        width = max(len(s) for s in labels + ["range"])
        lines.append("")
        lines.append(f"{'range':<{width}}  {'n':>6}  {'accuracy':>8}  {'mae':>10}")
        for row, label in zip(report.per_range, labels):
            lines.append(
                f"{label:<{width}}  {row.n:>6}  {row.accuracy:>8.3f}  {row.mae:>10.3f}"
            )
    return "\n".join(lines) + "\n"
