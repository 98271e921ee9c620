import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rankcount.features import NormStats
from rankcount.metrics import (
    MetricsReport,
    build_report,
    format_metrics_table,
    mae,
    mse,
    per_range_report,
    ranking_accuracy,
    write_metrics_csv,
)
from rankcount.model import PotentialModel
from rankcount.rankgraph import RankingPair
from rankcount.synthdata import ImageSample, autolabel_pairs


def scalar_model(weight=1.0):
    return PotentialModel(
        [1, 1],
        [np.array([[weight]])],
        [np.array([0.0])],
        NormStats.identity(1),
    )


def count_samples(counts):
    return [
        ImageSample(id=sid, features=np.array([float(c)]), count=c)
        for sid, c in counts.items()
    ]


def test_mae_hand_values():
    assert mae([5.0, 9.0], [5.0, 9.0]) == 0.0
    assert mae([10.0, 20.0], [12.0, 16.0]) == pytest.approx(3.0)
    assert mae([7.0], [10.0]) == pytest.approx(3.0)


def test_mse_hand_values():
    assert mse([5.0, 9.0], [5.0, 9.0]) == 0.0
    assert mse([10.0, 20.0], [12.0, 16.0]) == pytest.approx(math.sqrt(10.0))
    assert mse([13.0, 28.0, 103.0], [10.0, 25.0, 100.0]) == pytest.approx(3.0)


def test_metric_input_validation():
    with pytest.raises(ValueError, match="mismatch"):
        mae([1.0], [1.0, 2.0])
    with pytest.raises(ValueError, match="no samples"):
        mse([], [])


@given(
    st.lists(
        st.tuples(
            st.floats(min_value=-1e6, max_value=1e6),
            st.floats(min_value=0, max_value=1e6),
        ),
        min_size=1,
        max_size=60,
    )
)
def test_mae_never_exceeds_mse(pairs):
    preds = [p for p, _ in pairs]
    gts = [g for _, g in pairs]
    assert mae(preds, gts) <= mse(preds, gts) + 1e-9


def test_metrics_permutation_invariant():
    rng = np.random.default_rng(0)
    preds = rng.uniform(0, 100, size=30)
    gts = rng.uniform(0, 100, size=30)
    order = rng.permutation(30)
    assert mae(preds, gts) == pytest.approx(mae(preds[order], gts[order]))
    assert mse(preds, gts) == pytest.approx(mse(preds[order], gts[order]))


def test_ranking_accuracy_oracle_constant_and_inverted():
    rng = np.random.default_rng(4)
    counts = {f"s{k:02d}": int(c) for k, c in enumerate(rng.integers(0, 300, size=20))}
    samples = count_samples(counts)
    pairs = autolabel_pairs(counts, ratio=2.0)
    assert pairs
    assert ranking_accuracy(scalar_model(1.0), pairs, samples) == 1.0
    assert ranking_accuracy(scalar_model(0.0), pairs, samples) == 0.0
    assert ranking_accuracy(scalar_model(-1.0), pairs, samples) == 0.0


def test_ranking_accuracy_unknown_id():
    samples = count_samples({"a": 1, "b": 5})
    with pytest.raises(ValueError, match="unknown"):
        ranking_accuracy(scalar_model(), [RankingPair("b", "zz")], samples)


def test_per_range_boundary_arithmetic():
    rows = per_range_report([119.0, 121.0], [100.0, 100.0], [0.0, 1000.0], delta=0.2)
    assert rows[0].n == 2
    assert rows[0].accuracy == pytest.approx(0.5)
    assert rows[0].mae == pytest.approx(20.0)


def test_per_range_bucketing_and_empty_buckets():
    rows = per_range_report([50.0, 500.0], [50.0, 500.0], [0.0, 100.0, 1000.0])
    assert [r.n for r in rows] == [1, 1, 0]
    assert rows[0].label() == "[0, 100)"
    assert rows[2].label() == "[1000, inf)"
    assert rows[2].accuracy == 0.0 and rows[2].mae == 0.0
    for row in rows[:2]:
        assert row.accuracy == 1.0


def test_per_range_exact_predictions_everywhere_accurate():
    rng = np.random.default_rng(7)
    gts = rng.uniform(0, 3000, size=50)
    rows = per_range_report(gts, gts, [0.0, 500.0, 1000.0, 2000.0], delta=0.01)
    for row in rows:
        if row.n:
            assert row.accuracy == 1.0
            assert row.mae == 0.0


def test_per_range_zero_count_needs_exact_prediction():
    rows = per_range_report([0.0, 1.0], [0.0, 0.0], [0.0], delta=0.2)
    assert rows[0].n == 2
    assert rows[0].accuracy == pytest.approx(0.5)


def test_per_range_validation():
    with pytest.raises(ValueError, match="ascending"):
        per_range_report([1.0], [1.0], [100.0, 50.0])
    with pytest.raises(ValueError, match="delta"):
        per_range_report([1.0], [1.0], [0.0], delta=0.0)


def test_report_csv_and_table(tmp_path):
    report = build_report(
        [10.0, 20.0, 700.0],
        [12.0, 16.0, 600.0],
        range_edges=[0.0, 500.0],
        delta=0.2,
        ranking_acc=0.875,
    )
    assert isinstance(report, MetricsReport)
    assert report.n == 3
    assert report.mae <= report.mse

    path = tmp_path / "metrics.csv"
    write_metrics_csv(report, path)
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "metric,range_lo,range_hi,value"
    cells = {ln.split(",")[0]: ln for ln in lines[1:]}
    assert float(cells["mae"].split(",")[3]) == report.mae
    assert cells["ranking_accuracy"].endswith("0.875")
    assert any(ln.startswith("range_accuracy,0,500,") for ln in lines)
    assert any(ln.startswith("range_n,500,,") for ln in lines)

    table = format_metrics_table(report)
    assert "mae" in table and "[500, inf)" in table
    assert table.endswith("\n")


def test_report_without_ranking_accuracy(tmp_path):
    report = build_report([1.0], [1.0])
    assert report.ranking_accuracy is None
    path = tmp_path / "m.csv"
    write_metrics_csv(report, path)
    lines = path.read_text().splitlines()
    assert "ranking_accuracy,,," in lines
    assert "ranking_accuracy" not in format_metrics_table(report)
