"""Metric values against loop oracles, scipy, and hand-worked cases."""

import itertools

import numpy as np
import pytest
import scipy.stats
from hypothesis import given
from hypothesis import strategies as st

from oracles import pearson_loops, ranks_by_counting
from relish.errors import CoverageError, DegenerateSeriesError, MetricError, RangeError
from relish.metrics import (
    METRIC_NAMES,
    AggregateStat,
    RunRecord,
    average_ranks,
    format_metrics_table,
    macro_aggregate,
    nrmse,
    pearson,
    rmse,
    spearman,
)


def record(method="relish", seed=42, dataset="d", backbone="b", **metrics):
    vals = {"pearson": 0.9, "spearman": 0.9, "rmse": 1.0, "nrmse": 0.1}
    vals.update(metrics)
    return RunRecord(dataset=dataset, backbone=backbone, method=method, seed=seed, **vals)


# ---------------------------------------------------------------------------
# pearson


def test_pearson_perfect_and_sign():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert pearson([1, 2, 3], [6, 4, 2]) == pytest.approx(-1.0)
    assert pearson([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)  # shift+scale invariant


def test_pearson_hand_case():
    # centered products: x-mean=(-1,0,1), y-mean=(-2,3,-1) -> cov=1, vx=2, vy=14
    assert pearson([1, 2, 3], [0, 5, 1]) == pytest.approx(1.0 / np.sqrt(28.0))


def test_pearson_matches_loop_oracle_and_scipy():
    rng = np.random.default_rng(0)
    for _ in range(30):
        n = int(rng.integers(2, 40))
        x = rng.normal(size=n)
        y = rng.normal(size=n) + 0.5 * x
        got = pearson(x, y)
        assert got == pytest.approx(pearson_loops(list(x), list(y)), abs=1e-12)
        assert got == pytest.approx(scipy.stats.pearsonr(x, y).statistic, abs=1e-12)


def test_pearson_degenerate_names_the_series():
    with pytest.raises(DegenerateSeriesError, match="predictions"):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(DegenerateSeriesError, match="golds"):
        pearson([1, 2, 3], [5, 5, 5])


def test_pearson_input_validation():
    with pytest.raises(MetricError):
        pearson([1], [1])
    with pytest.raises(MetricError):
        pearson([1, 2], [1, 2, 3])
    with pytest.raises(MetricError):
        pearson([1, np.nan], [1, 2])


# ---------------------------------------------------------------------------
# ranks and spearman


def test_ranks_hand_cases():
    np.testing.assert_array_equal(average_ranks([10, 20, 30]), [1, 2, 3])
    np.testing.assert_array_equal(average_ranks([30, 20, 10]), [3, 2, 1])
    np.testing.assert_array_equal(average_ranks([1, 2, 2, 3]), [1, 2.5, 2.5, 4])
    np.testing.assert_array_equal(average_ranks([5, 5, 5]), [2, 2, 2])


def test_ranks_exhaustive_small_inputs():
    # every tuple over a 3-letter alphabet up to length 6, vs the counting rule
    for n in range(1, 7):
        for tup in itertools.product((0.0, 1.0, 2.0), repeat=n):
            np.testing.assert_array_equal(
                average_ranks(list(tup)), ranks_by_counting(list(tup))
            )


def test_ranks_match_scipy():
    rng = np.random.default_rng(1)
    for _ in range(20):
        v = rng.integers(0, 5, size=12).astype(float)
        np.testing.assert_allclose(average_ranks(v), scipy.stats.rankdata(v))


def test_spearman_hand_value():
    # ranks (1, 2.5, 2.5, 4) vs (1, 2, 3, 4)
    assert spearman([1, 2, 2, 3], [1, 2, 3, 4]) == pytest.approx(0.9486832980505138)


def test_spearman_monotone_nonlinear_is_one():
    x = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    assert spearman(np.exp(x), x) == pytest.approx(1.0)
    assert pearson(np.exp(x), x) < 1.0


def test_spearman_matches_scipy_with_ties():
    rng = np.random.default_rng(2)
    for _ in range(25):
        n = int(rng.integers(3, 30))
        p = rng.integers(0, 6, size=n).astype(float)
        g = rng.integers(0, 6, size=n).astype(float)
        if np.all(p == p[0]) or np.all(g == g[0]):
            continue
        ref = scipy.stats.spearmanr(p, g).statistic
        assert spearman(p, g) == pytest.approx(ref, abs=1e-12)


# ---------------------------------------------------------------------------
# error metrics


def test_rmse_values():
    assert rmse([1, 2, 3], [1, 2, 3]) == 0.0
    assert rmse([0, 0], [3, 4]) == pytest.approx(np.sqrt(12.5))
    assert rmse([2], [5]) == pytest.approx(3.0)


def test_nrmse_scales_by_nominal_range():
    preds, golds = [0.0, 1.0], [1.0, 0.0]
    assert nrmse(preds, golds, 0.0, 5.0) == pytest.approx(rmse(preds, golds) / 5.0)
    assert nrmse(preds, golds, 0.0, 100.0) == pytest.approx(rmse(preds, golds) / 100.0)


def test_nrmse_uses_declared_range_not_sample():
    # sample spans 0..1 but the scale is 0..10: divide by 10
    assert nrmse([0.0, 1.0], [1.0, 0.0], 0.0, 10.0) == pytest.approx(0.1)


def test_nrmse_rejects_empty_range():
    with pytest.raises(RangeError):
        nrmse([1, 2], [1, 2], 3.0, 3.0)
    with pytest.raises(RangeError):
        nrmse([1, 2], [1, 2], 5.0, 3.0)


@given(
    st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=20),
    st.floats(-1e3, 1e3),
)
def test_rmse_shift_both_series_invariant(xs, shift):
    ys = [x + 1.0 for x in xs]
    base = rmse(xs, ys)
    shifted = rmse([x + shift for x in xs], [y + shift for y in ys])
    assert shifted == pytest.approx(base, abs=1e-6)


# ---------------------------------------------------------------------------
# records and aggregation


def test_run_record_round_trip_and_metric():
    rec = record(pearson=0.8, spearman=0.7, rmse=1.5, nrmse=0.3)
    assert RunRecord.from_dict(rec.as_dict()) == rec
    assert rec.metric("pearson") == 0.8
    assert rec.metric("nrmse") == 0.3
    with pytest.raises(MetricError):
        rec.metric("mae")


def test_macro_aggregate_hand_case():
    # two seeds, two cells each:
    # seed 1 macro mean = (0.9 + 0.7)/2 = 0.8, seed 2 = (0.8 + 0.6)/2 = 0.7
    # mean = 0.75, sample std = sqrt(((0.05)^2 + (0.05)^2)/1) = 0.0707...
    recs = [
        record(seed=1, dataset="a", pearson=0.9),
        record(seed=1, dataset="b", pearson=0.7),
        record(seed=2, dataset="a", pearson=0.8),
        record(seed=2, dataset="b", pearson=0.6),
    ]
    stat = macro_aggregate(recs, "pearson")
    assert stat.per_seed == (0.8, 0.7)
    assert stat.mean == pytest.approx(0.75)
    assert stat.std == pytest.approx(0.07071067811865475)
    assert stat.n_seeds == 2


def test_macro_aggregate_single_seed_std_zero():
    stat = macro_aggregate([record(seed=7, pearson=0.5)], "pearson")
    assert stat == AggregateStat(mean=0.5, std=0.0, per_seed=(0.5,))


def test_macro_aggregate_weighs_cells_not_examples():
    # macro: each cell counts once regardless of how large its dataset was
    recs = [record(seed=1, dataset="big", pearson=1.0),
            record(seed=1, dataset="small", pearson=0.0)]
    assert macro_aggregate(recs, "pearson").mean == pytest.approx(0.5)


def test_macro_aggregate_duplicate_cell():
    recs = [record(seed=1), record(seed=1)]
    with pytest.raises(CoverageError, match="one method at a time"):
        macro_aggregate(recs, "pearson")


def test_macro_aggregate_ragged_coverage():
    recs = [
        record(seed=1, dataset="a"),
        record(seed=1, dataset="b"),
        record(seed=2, dataset="a"),
    ]
    with pytest.raises(CoverageError):
        macro_aggregate(recs, "pearson")


def test_macro_aggregate_empty():
    with pytest.raises(CoverageError):
        macro_aggregate([], "pearson")


def test_format_table_layout():
    recs = [
        record(method="relish", seed=1, pearson=0.9),
        record(method="linear", seed=1, pearson=0.5),
    ]
    text = format_metrics_table(recs)
    lines = text.strip().splitlines()
    assert lines[0].startswith("metric")
    assert "linear" in lines[0] and "relish" in lines[0]
    assert len(lines) == 2 + len(METRIC_NAMES)
    assert "0.9000±0.0000" in text and "0.5000±0.0000" in text
