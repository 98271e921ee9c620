"""Hinge-loss ranking training with optional count regression.

The loop draws one ranking pair per iteration (uniform with replacement),
forwards both images through the shared network, and applies a margin hinge
on the potentials.  A hard sample filter can abandon pairs the current model
already separates by a wide ratio.  When a regression set is present and
alpha > 0, each iteration also draws one counted image and adds a squared
error term on the normalized count.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .features import FeatureConfig, features_for_samples
from .model import AdamState, PotentialModel, adam_step, backward_batch, forward_batch
from .rankgraph import RankingPair
from .synthdata import ImageSample

STANDARD_PLUS = "standard_plus"
PAPER_LITERAL_MINUS = "paper_literal_minus"
MARGIN_SIGNS = frozenset({STANDARD_PLUS, PAPER_LITERAL_MINUS})


def hinge_loss(v_hi: float, v_lo: float, margin: float, sign: str = STANDARD_PLUS) -> float:
    """Margin hinge on a ranked potential pair.

    standard_plus penalizes until v_hi exceeds v_lo by the margin;
    paper_literal_minus subtracts the margin instead, so the loss already
    vanishes when v_hi is within margin below v_lo.
    """
    if margin < 0:
        raise ValueError("margin must be >= 0")
    if sign not in MARGIN_SIGNS:
        raise ValueError(f"unknown margin sign {sign!r}")
    offset = margin if sign == STANDARD_PLUS else -margin
    return max(0.0, v_lo - v_hi + offset)


def hard_filter(v_i: float, v_j: float, xi: float) -> bool:
    """True when the pair should be kept for this step.

    Pairs whose potentials are both positive and separated by a ratio of
    xi or more are considered easy and abandoned; non-positive potentials
    keep the pair since the ratio is meaningless there.
    """
    if xi <= 1:
        raise ValueError("filter threshold must be > 1")
    lo, hi = min(v_i, v_j), max(v_i, v_j)
    if lo <= 0:
        return True
    return hi / lo < xi


def regression_loss(v: float, y: float, count_norm: float) -> float:
    """(v - y/count_norm)^2; gradient w.r.t. v is 2(v - y/count_norm)."""
    if count_norm <= 0:
        raise ValueError("count_norm must be positive")
    diff = v - y / count_norm
    return diff * diff


@dataclass
class TrainConfig:
    margin: float = 0.5
    margin_sign: str = STANDARD_PLUS
    filter_threshold: float | None = None  # None disables the hard filter
    alpha: float = 1.0
    count_norm: float | None = None  # None: max count in the regression set
    lr: float = 5e-5
    epochs: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        if self.margin_sign not in MARGIN_SIGNS:
            raise ValueError(f"unknown margin sign {self.margin_sign!r}")
        if self.filter_threshold is not None and self.filter_threshold <= 1:
            raise ValueError("filter threshold must be > 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.count_norm is not None and self.count_norm <= 0:
            raise ValueError("count_norm must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")


@dataclass
class EpochStats:
    epoch: int
    rank_loss: float
    reg_loss: float
    abandoned: int
    rank_acc: float


@dataclass
class TrainReport:
    rows: list[EpochStats] = field(default_factory=list)


def resolve_count_norm(config: TrainConfig, reg_set) -> float:
    if config.count_norm is not None:
        return config.count_norm
    top = max((count for _, count in reg_set), default=0)
    return float(top) if top > 0 else 1.0


def pair_ranking_accuracy(potentials: dict[str, float], pairs) -> float:
    """Fraction of pairs whose higher-ranked image scores strictly higher."""
    if not pairs:
        return 0.0
    good = sum(1 for p in pairs if potentials[p.hi] > potentials[p.lo])
    return good / len(pairs)


def train(
    samples: list[ImageSample],
    pairs: list[RankingPair],
    reg_set: list[tuple[str, int]],
    config: TrainConfig,
    model_init: PotentialModel,
) -> tuple[PotentialModel, TrainReport]:
    """Run the sampled training loop; returns (trained model, per-epoch report).

    One Adam step per iteration, mini-batch of one pair (plus one regression
    sample when active).  Deterministic given config.seed.
    """
    if not pairs:
        raise ValueError("no ranking pairs to train on")
    fc = model_init.feature_config if model_init.feature_config is not None else FeatureConfig()
    feats = features_for_samples(samples, fc)

    ids = sorted(feats)
    row_of = {sid: k for k, sid in enumerate(ids)}
    matrix = np.stack([feats[sid] for sid in ids])
    for p in pairs:
        if p.hi not in row_of or p.lo not in row_of:
            raise ValueError(f"pair references unknown image id {p.hi!r}/{p.lo!r}")
    for sid, _ in reg_set:
        if sid not in row_of:
            raise ValueError(f"regression set references unknown image id {sid!r}")

    model = copy.deepcopy(model_init)
    params = model.parameters()
    state = AdamState.for_params(params)
    rng = np.random.default_rng(config.seed)

    hybrid = config.alpha > 0 and len(reg_set) > 0
    count_norm = resolve_count_norm(config, reg_set)
    hi_rows = np.array([row_of[p.hi] for p in pairs])
    lo_rows = np.array([row_of[p.lo] for p in pairs])
    if hybrid:
        reg_rows = np.array([row_of[sid] for sid, _ in reg_set])
        reg_targets = np.array([count / count_norm for _, count in reg_set])

    report = TrainReport()
    iters = len(pairs)
    for epoch in range(1, config.epochs + 1):
        draws = rng.integers(0, len(pairs), size=iters)
        reg_draws = rng.integers(0, len(reg_set), size=iters) if hybrid else None
        rank_total = 0.0
        reg_total = 0.0
        abandoned = 0
        for it in range(iters):
            k = draws[it]
            rows = [hi_rows[k], lo_rows[k]]
            if hybrid:
                rows.append(reg_rows[reg_draws[it]])
            values, trace = forward_batch(model, matrix[rows])
            v_hi, v_lo = float(values[0]), float(values[1])

            loss = hinge_loss(v_hi, v_lo, config.margin, config.margin_sign)
            rank_total += loss
            keep = True
            if config.filter_threshold is not None:
                keep = hard_filter(v_hi, v_lo, config.filter_threshold)
                abandoned += not keep

            upstream = np.zeros(len(rows))
            if keep and loss > 0:
                upstream[0] = -1.0
                upstream[1] = 1.0
            if hybrid:
                diff = float(values[2]) - reg_targets[reg_draws[it]]
                reg_total += diff * diff
                upstream[2] += config.alpha * 2.0 * diff
            grads = backward_batch(model, trace, upstream)
            adam_step(params, grads, state, config.lr)

        values, _ = forward_batch(model, matrix)
        potentials = dict(zip(ids, values))
        report.rows.append(
            EpochStats(
                epoch=epoch,
                rank_loss=rank_total / iters,
                reg_loss=reg_total / iters,
                abandoned=abandoned,
                rank_acc=pair_ranking_accuracy(potentials, pairs),
            )
        )
    return model, report


def write_train_report(report: TrainReport, path) -> None:
    lines = ["epoch,rank_loss,reg_loss,abandoned,rank_acc"]
    for r in report.rows:
        lines.append(f"{r.epoch},{r.rank_loss!r},{r.reg_loss!r},{r.abandoned},{r.rank_acc!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
