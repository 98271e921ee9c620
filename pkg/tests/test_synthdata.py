import math

import numpy as np
import pytest

from rankcount.rankgraph import RankingPair
from rankcount.synthdata import (
    ImageSample,
    autolabel_pairs,
    generate_synthetic,
    manifest_counts,
    read_counts,
    read_manifest,
    read_pgm,
    render_crowd,
    sparse_pairs,
    sparsity_report,
    write_counts,
    write_dataset,
    write_pgm,
)


def brute_force_pair_count(counts, ratio):
    total = 0
    for i, ci in counts.items():
        for j, cj in counts.items():
            if i == j:
                continue
            if (cj > 0 and ci >= ratio * cj) or (cj == 0 and ci > 0):
                total += 1
    return total


def test_degenerate_range_gives_exact_count():
    (sample,) = generate_synthetic(1, 5, 5, width=32, height=32, seed=3)
    assert sample.count == 5
    assert sample.pixels.shape == (32, 32)
    assert sample.pixels.dtype == np.uint8


def test_same_seed_is_byte_identical():
    a = generate_synthetic(4, 10, 40, width=48, height=32, seed=11)
    b = generate_synthetic(4, 10, 40, width=48, height=32, seed=11)
    for sa, sb in zip(a, b):
        assert sa.id == sb.id and sa.count == sb.count
        assert sa.pixels.tobytes() == sb.pixels.tobytes()


def test_log_uniform_count_mean():
    samples = generate_synthetic(200, 10, 500, width=16, height=16, seed=0)
    mean_log = np.mean([math.log(s.count) for s in samples])
    midpoint = (math.log(10) + math.log(500)) / 2
    assert abs(mean_log - midpoint) <= 0.05 * midpoint


def test_rendered_centers_match_count():
    rng = np.random.default_rng(21)
    for count in (0, 1, 17, 80):
        pixels, centers = render_crowd(rng, count, 64, 64)
        assert len(centers) == count
        assert pixels.shape == (64, 64)


def test_invalid_ranges_rejected():
    with pytest.raises(ValueError):
        generate_synthetic(1, 10, 5)
    with pytest.raises(ValueError):
        generate_synthetic(0, 1, 5)
    with pytest.raises(ValueError):
        ImageSample(id="x", pixels=np.zeros((8, 8), dtype=np.uint8))
    with pytest.raises(ValueError):
        ImageSample(id="x")


def test_autolabel_high_contrast_triple():
    counts = {"A": 254, "B": 580, "C": 1202}
    pairs = {(p.hi, p.lo) for p in autolabel_pairs(counts, ratio=2.0)}
    assert pairs == {("B", "A"), ("C", "B"), ("C", "A")}


def test_autolabel_equal_counts_empty():
    assert autolabel_pairs({"A": 10, "B": 10}, ratio=1.5) == []


def test_autolabel_matches_brute_force():
    rng = np.random.default_rng(5)
    counts = {f"im{k}": int(c) for k, c in enumerate(rng.integers(0, 800, size=300))}
    pairs = autolabel_pairs(counts, ratio=2.0)
    assert len(pairs) == brute_force_pair_count(counts, 2.0)
    for p in pairs:
        ci, cj = counts[p.hi], counts[p.lo]
        assert (cj > 0 and ci >= 2.0 * cj) or (cj == 0 and ci > 0)


def test_autolabel_threshold_monotone():
    rng = np.random.default_rng(9)
    counts = {f"im{k}": int(c) for k, c in enumerate(rng.integers(1, 500, size=60))}
    loose = {(p.hi, p.lo) for p in autolabel_pairs(counts, ratio=1.5)}
    tight = {(p.hi, p.lo) for p in autolabel_pairs(counts, ratio=3.0)}
    assert tight <= loose


def test_autolabel_budget_subsamples():
    counts = {f"im{k}": 2**k for k in range(12)}
    full = autolabel_pairs(counts, ratio=2.0)
    capped = autolabel_pairs(counts, ratio=2.0, max_pairs=10, seed=4)
    assert len(capped) == 10
    assert set(capped) <= set(full)
    assert capped == autolabel_pairs(counts, ratio=2.0, max_pairs=10, seed=4)


def test_sparse_pairs_is_matching_with_zeta_one():
    rng = np.random.default_rng(2)
    counts = {f"im{k:04d}": int(c) for k, c in enumerate(rng.integers(10, 2000, size=2000))}
    pairs = sparse_pairs(counts, ratio=2.0, seed=1)
    assert len(pairs) <= 1000
    seen = [x for p in pairs for x in (p.hi, p.lo)]
    assert len(seen) == len(set(seen))
    report = sparsity_report(pairs)
    assert report.zeta_mean == 1.0
    full = {(p.hi, p.lo) for p in autolabel_pairs(counts, ratio=2.0)}
    assert {(p.hi, p.lo) for p in pairs} <= full


def test_sparse_pairs_hand_case():
    counts = {"a": 1, "b": 3, "c": 10, "d": 30}
    # Every cross pair qualifies at ratio 2, so greedy always finds 2 pairs.
    for seed in range(6):
        pairs = sparse_pairs(counts, ratio=2.0, seed=seed)
        assert len(pairs) == 2
        assert len({x for p in pairs for x in (p.hi, p.lo)}) == 4


def test_sparse_pairs_equal_counts_empty():
    assert sparse_pairs({"a": 7, "b": 7, "c": 7}, ratio=2.0) == []


def test_sparsity_report_hand_values():
    disjoint = sparsity_report([RankingPair("A", "B"), RankingPair("C", "D")])
    assert disjoint.zeta_mean == 1.0

    shared = sparsity_report([RankingPair("A", "B"), RankingPair("A", "C")])
    assert shared.zeta_per_image == {"A": 2, "B": 1, "C": 1}
    assert shared.zeta_mean == pytest.approx(4 / 3)

    empty = sparsity_report([])
    assert empty.zeta_mean is None
    assert empty.zeta_per_image == {}


def test_pgm_round_trip(tmp_path):
    pixels = np.arange(16 * 20, dtype=np.uint8).reshape(20, 16) % 251
    path = tmp_path / "img.pgm"
    write_pgm(path, pixels)
    assert np.array_equal(read_pgm(path), pixels)


def test_pgm_round_trip_whitespace_valued_raster(tmp_path):
    # newline/tab/space byte values at the start of the raster must survive
    pixels = np.full((16, 16), 10, dtype=np.uint8)
    pixels[0, 1] = 9
    pixels[0, 2] = 32
    pixels[0, 3] = 13
    path = tmp_path / "ws.pgm"
    write_pgm(path, pixels)
    assert np.array_equal(read_pgm(path), pixels)


def test_counts_round_trip(tmp_path):
    counts = {"b": 3, "a": 100, "z": 0}
    path = tmp_path / "counts.csv"
    write_counts(path, counts)
    assert read_counts(path) == counts


def test_dataset_manifest_round_trip(tmp_path):
    samples = generate_synthetic(3, 5, 20, width=24, height=18, seed=8)
    manifest = write_dataset(samples, tmp_path / "data")
    loaded = read_manifest(manifest)
    assert [s.id for s in loaded] == [s.id for s in samples]
    for orig, back in zip(samples, loaded):
        assert back.count == orig.count
        assert np.array_equal(back.pixels, orig.pixels)
    assert manifest_counts(manifest) == {s.id: s.count for s in samples}
