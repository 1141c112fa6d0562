import datetime as dt

import numpy as np
import pytest
from oracles import exhaustive_segmentation, sse_exact

from cpevents import _kernels
from cpevents.changepoint import (
    Segment,
    choose_k,
    classify_long_term,
    cusum,
    merge_short_segments,
    read_segment_bounds,
    segment_means,
    segmentation_from_bounds,
    segneigh_mean,
    write_segments_csv,
)
from cpevents.errors import DataError, NumericalError


def bounds_of(seg):
    return [s.end + 1 for s in seg.segments]


class TestSegNeigh:
    def test_recovers_steps(self):
        v = np.r_[np.full(20, 10.0), np.full(15, 4.0), np.full(25, 10.0)]
        segs = segneigh_mean(v, 4)
        assert bounds_of(segs[2]) == [20, 35, 60]
        assert segs[2].total_cost == pytest.approx(0.0, abs=1e-9)
        assert [s.mean for s in segs[2].segments] == pytest.approx([10, 4, 10])

    def test_costs_non_increasing(self):
        rng = np.random.default_rng(1)
        segs = segneigh_mean(rng.normal(size=50), 8)
        costs = [s.total_cost for s in segs]
        assert all(a >= b - 1e-9 for a, b in zip(costs, costs[1:]))
        assert [s.k for s in segs] == list(range(1, 9))

    def test_single_segment_is_sse(self):
        v = np.array([1.0, 2.0, 4.0, 7.0])
        seg = segneigh_mean(v, 1)[0]
        assert seg.total_cost == pytest.approx(((v - v.mean()) ** 2).sum())
        assert seg.changepoints == []

    @pytest.mark.parametrize("seed", range(30))
    def test_matches_exhaustive(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 13))
        v = rng.integers(0, 4, n).astype(float)  # small integers force ties
        segs = segneigh_mean(v, min(4, n))
        for k, seg in enumerate(segs, 1):
            best, bounds = exhaustive_segmentation(v, k)
            assert seg.total_cost == best
            assert bounds_of(seg) == bounds

    def test_tie_rule_earliest_boundary(self):
        # cutting after the first or before the last value costs the same
        v = np.array([0.0, 1.0, 0.0, 1.0])
        seg = segneigh_mean(v, 2)[1]
        _, bounds = exhaustive_segmentation(v, 2)
        assert bounds_of(seg) == bounds == [1, 4]

    def test_near_exact_optimum(self):
        rng = np.random.default_rng(7)
        v = np.round(rng.normal(100, 5, 12), 2)
        for k, seg in enumerate(segneigh_mean(v, 3), 1):
            exact, _ = exhaustive_segmentation(v, k, cost=sse_exact)
            assert seg.total_cost == pytest.approx(float(exact), rel=1e-9, abs=1e-9)

    @pytest.mark.parametrize("seed", range(5))
    def test_backends_agree(self, seed):
        rng = np.random.default_rng(seed)
        v = rng.normal(size=60) + np.repeat(rng.normal(size=4) * 3, 15)
        a = segneigh_mean(v, 6, backend="numba")
        b = segneigh_mean(v, 6, backend="numpy")
        assert [s.total_cost for s in a] == [s.total_cost for s in b]
        assert [bounds_of(s) for s in a] == [bounds_of(s) for s in b]

    def test_kernel_tables_identical(self):
        rng = np.random.default_rng(3)
        v = rng.normal(size=40)
        v = v - v.mean()
        c1 = np.concatenate(([0.0], np.cumsum(v)))
        c2 = np.concatenate(([0.0], np.cumsum(v * v)))
        D1, A1 = _kernels.segneigh_loops(c1, c2, 5)
        D2, A2 = _kernels.segneigh_numpy(c1, c2, 5)
        assert np.array_equal(D1, D2) and np.array_equal(A1, A2)

    def test_bad_arguments(self):
        with pytest.raises(DataError):
            segneigh_mean([], 1)
        with pytest.raises(DataError):
            segneigh_mean([1.0, 2.0], 3)


class TestChooseK:
    def test_three_level_step(self):
        rng = np.random.default_rng(0)
        v = np.r_[np.full(40, 100.0), np.full(20, 80.0), np.full(60, 100.0)] + rng.normal(0, 1, 120)
        segs = segneigh_mean(v, 8)
        assert choose_k(segs) == 3

    def test_flat_series(self):
        rng = np.random.default_rng(0)
        segs = segneigh_mean(rng.normal(size=100), 8)
        assert choose_k(segs) == 1

    def test_constant_series(self):
        assert choose_k(segneigh_mean(np.ones(10), 3)) == 1


class TestMerge:
    def test_single_day_segment_folds_into_nearer_mean(self):
        v = np.r_[np.full(5, 10.0), [3.0], np.full(5, 2.0)]
        seg = segmentation_from_bounds(v, [5, 6, 11])
        merged = merge_short_segments(v, seg, 2)
        assert bounds_of(merged) == [5, 11]

    def test_first_segment_merges_forward(self):
        v = np.r_[[50.0], np.full(5, 10.0)]
        merged = merge_short_segments(v, segmentation_from_bounds(v, [1, 6]), 2)
        assert bounds_of(merged) == [6]

    def test_isolated_spikes_are_absorbed(self):
        v = np.full(70, 100.0)
        v[45] = v[48] = 70.0
        seg = segmentation_from_bounds(v, [45, 46, 48, 49, 70])
        assert bounds_of(merge_short_segments(v, seg, 2)) == [70]

    def test_transition_day_keeps_level_shift(self):
        v = np.r_[np.full(30, 100.0), [90.0], np.full(30, 80.0)]
        seg = segmentation_from_bounds(v, [30, 31, 61])
        assert bounds_of(merge_short_segments(v, seg, 2)) == [31, 61]

    def test_noop(self):
        v = np.arange(10.0)
        seg = segmentation_from_bounds(v, [4, 10])
        assert merge_short_segments(v, seg, 2) == seg


class TestClassify:
    def seg(self, mean):
        return Segment(0, 9, mean, 0.0)

    def test_threshold(self):
        res = classify_long_term([self.seg(85.0), self.seg(84.99), self.seg(100.0)], [100.0, 100.0, 100.0])
        assert [r.is_event for r in res] == [False, True, False]
        assert res[1].diff_percent_rounded == 85

    def test_rounding_half_up(self):
        r = classify_long_term([self.seg(56.5)], [100.0])[0]
        assert r.diff_percent_rounded == 57

    def test_misaligned(self):
        with pytest.raises(DataError):
            classify_long_term([self.seg(1.0)], [1.0, 2.0])

    def test_zero_reference(self):
        with pytest.raises(NumericalError):
            classify_long_term([self.seg(1.0)], [0.0])


def test_cusum_ends_at_zero():
    v = np.array([1.0, 5.0, 2.0, 8.0])
    c = cusum(v)
    assert c[-1] == pytest.approx(0.0)
    assert c[0] == pytest.approx(1.0 - 4.0)


def test_segment_means():
    v = np.arange(6.0)
    seg = segmentation_from_bounds(v, [2, 6])
    assert segment_means(v * 2, seg) == [1.0, 7.0]
    with pytest.raises(DataError):
        segment_means(np.arange(5.0), seg)


def test_segments_csv_round_trip(tmp_path):
    dates = [dt.date(2012, 1, 1) + dt.timedelta(i) for i in range(6)]
    v = np.array([5.0, 5, 5, 1, 1, 1])
    seg = segmentation_from_bounds(v, [3, 6])
    res = classify_long_term(seg, [5.0, 5.0])
    write_segments_csv(dates, res, tmp_path / "s.csv")
    assert read_segment_bounds(tmp_path / "s.csv", dates) == [3, 6]
    text = (tmp_path / "s.csv").read_text().splitlines()
    assert text[0] == "k,start_date,end_date,mean,cost,diff_percent,is_event"
    assert text[2].endswith(",20,yes")
