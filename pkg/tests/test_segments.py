import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccd.core import ComplicationKind
from ccd.scoring import FrameRisk
from ccd.segments import (
    HighRiskSegment,
    RiskTrace,
    flag_segments,
    make_trace,
    merge_segments,
    select_top_k,
    trace_from_csv,
    trace_to_csv,
    window_scores,
)
from oracles import brute_window_means

KIND = ComplicationKind.IRIS_PROLAPSE


def trace_of(values, start=0, kind=KIND):
    risks = tuple(FrameRisk(start + i, float(v)) for i, v in enumerate(values))
    return RiskTrace(kind=kind, start_frame=start, end_frame=start + len(values), scores=risks)


def seg(start, end, peak, mean=None, rep=None, covered=None, kind=KIND):
    return HighRiskSegment(
        kind=kind, start_frame=start, end_frame=end, peak_score=float(peak),
        mean_score=float(peak if mean is None else mean),
        representative_frame=start if rep is None else rep,
        covered_frames=(end - start) if covered is None else covered,
    )


class TestWindowScores:
    def test_all_zero_trace(self):
        windows = window_scores(trace_of([0.0] * 50), 10)
        assert len(windows) == 41
        assert all(mean == 0.0 for _, mean in windows)

    def test_ten_ones_single_full_window(self):
        values = [0.0] * 20 + [1.0] * 10 + [0.0] * 20
        windows = window_scores(trace_of(values), 10)
        full = [(s, m) for s, m in windows if m == 1.0]
        assert full == [(20, 1.0)]

    def test_short_trace_single_window(self):
        windows = window_scores(trace_of([1.0, 2.0, 3.0, 4.0]), 10)
        assert windows == [(0, 2.5)]

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            values = rng.random(rng.integers(1, 60)).tolist()
            start = int(rng.integers(0, 100))
            got = window_scores(trace_of(values, start=start), 10)
            expected = [(start + i, m) for i, m in brute_window_means(values, 10)]
            assert [s for s, _ in got] == [s for s, _ in expected]
            assert np.allclose([m for _, m in got], [m for _, m in expected])


class TestFlagSegments:
    def test_nothing_above_threshold(self):
        assert flag_segments(trace_of([0.1] * 30), 10, 1.0) == []

    def test_single_flagged_window(self):
        # only the window exactly covering the ten 10s reaches mean 10
        values = [0.0] * 20 + [10.0] * 10 + [0.0] * 20
        segments = flag_segments(trace_of(values), 10, 9.5)
        assert len(segments) == 1
        only = segments[0]
        assert (only.start_frame, only.end_frame) == (20, 30)
        assert only.peak_score == 10.0
        assert only.representative_frame == 20  # ties go to the earliest frame

    def test_overlapping_windows_merge_into_one_run(self):
        values = [0.0] * 20 + [10.0] * 11 + [0.0] * 20
        segments = flag_segments(trace_of(values), 10, 9.5)
        # windows at starts 20 and 21 both flag; union covers [20, 31)
        assert [(s.start_frame, s.end_frame) for s in segments] == [(20, 31)]

    def test_representative_is_argmax(self):
        values = [0.0] * 10 + [5.0, 6.0, 9.0, 6.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0] + [0.0] * 10
        segments = flag_segments(trace_of(values), 10, 5.0)
        assert segments[0].representative_frame == 12

    def test_scoped_trace_offsets(self):
        values = [0.0] * 5 + [3.0] * 10 + [0.0] * 5
        segments = flag_segments(trace_of(values, start=100), 10, 2.9)
        assert all(100 <= s.start_frame < s.end_frame <= 120 for s in segments)


class TestMergeSegments:
    def test_close_segments_fuse(self):
        merged = merge_segments([seg(10, 20, 5.0), seg(22, 30, 7.0)], gap=5)
        assert len(merged) == 1
        fused = merged[0]
        assert (fused.start_frame, fused.end_frame) == (10, 30)
        assert fused.peak_score == 7.0
        assert fused.covered_frames == 18  # gap frames contribute nothing

    def test_distant_segments_unchanged(self):
        segments = [seg(10, 20, 5.0), seg(40, 50, 7.0)]
        assert merge_segments(segments, gap=5) == segments

    def test_empty_input(self):
        assert merge_segments([], gap=5) == []

    def test_mean_weighted_by_covered_frames(self):
        merged = merge_segments(
            [seg(0, 10, 4.0, mean=2.0), seg(12, 17, 8.0, mean=6.0)], gap=5
        )
        assert merged[0].mean_score == pytest.approx((2.0 * 10 + 6.0 * 5) / 15)

    def test_representative_follows_higher_peak(self):
        merged = merge_segments(
            [seg(0, 10, 4.0, rep=3), seg(12, 17, 8.0, rep=14)], gap=5
        )
        assert merged[0].representative_frame == 14

    def test_idempotent(self):
        segments = [seg(0, 10, 1.0), seg(13, 20, 2.0), seg(40, 44, 3.0)]
        once = merge_segments(segments, gap=4)
        assert merge_segments(once, gap=4) == once


class TestSelectTopK:
    def test_fewer_than_k_passes_through(self):
        segments = [seg(0, 5, 1.0), seg(10, 15, 2.0), seg(20, 25, 3.0)]
        assert select_top_k(segments, 5) == segments

    def test_top_five_of_seven(self):
        segments = [seg(i * 10, i * 10 + 5, peak) for i, peak in enumerate([9, 8, 7, 6, 5, 4, 3])]
        picked = select_top_k(segments, 5)
        assert sorted(s.peak_score for s in picked) == [5, 6, 7, 8, 9]
        assert [s.start_frame for s in picked] == sorted(s.start_frame for s in picked)

    def test_tie_goes_to_earlier_start(self):
        segments = [seg(50, 60, 7.0), seg(10, 20, 7.0)]
        assert select_top_k(segments, 1)[0].start_frame == 10


# ---------------------------------------------------------------------------
# property suites (acceptance: >= 1000 randomized cases, zero violations)

trace_strategy = st.builds(
    trace_of,
    st.lists(st.floats(0.0, 100.0, allow_nan=False), min_size=1, max_size=80),
    start=st.integers(0, 50),
)


@settings(max_examples=350, deadline=None)
@given(trace_strategy, st.integers(1, 15), st.floats(0.1, 90.0))
def test_property_flagged_segments_disjoint_sorted_in_scope(trace, window, threshold):
    segments = flag_segments(trace, window, threshold)
    for a, b in zip(segments, segments[1:]):
        assert a.end_frame <= b.start_frame
    for s in segments:
        assert trace.start_frame <= s.start_frame < s.end_frame <= trace.end_frame
        assert s.start_frame <= s.representative_frame < s.end_frame
        assert s.peak_score >= s.mean_score


@settings(max_examples=350, deadline=None)
@given(trace_strategy, st.integers(1, 15), st.floats(0.1, 45.0), st.floats(0.1, 45.0))
def test_property_monotone_shrinkage_in_threshold(trace, window, t1, delta):
    t2 = t1 + delta
    low = flag_segments(trace, window, t1)
    high = flag_segments(trace, window, t2)
    # every segment at the higher threshold nests inside one at the lower
    for s in high:
        assert any(
            c.start_frame <= s.start_frame and s.end_frame <= c.end_frame for c in low
        )


@settings(max_examples=350, deadline=None)
@given(trace_strategy, st.integers(1, 12), st.floats(0.5, 60.0), st.integers(0, 20))
def test_property_merge_idempotent(trace, window, threshold, gap):
    segments = flag_segments(trace, window, threshold)
    once = merge_segments(segments, gap)
    assert merge_segments(once, gap) == once
    for a, b in zip(once, once[1:]):
        assert a.gap_to(b) > gap


@settings(max_examples=350, deadline=None)
@given(
    st.lists(
        st.tuples(st.integers(0, 500), st.integers(1, 30), st.floats(0.0, 50.0)),
        max_size=12,
    ),
    st.integers(1, 6),
)
def test_property_top_k_ordering(raw, k):
    # build disjoint segments from sorted offsets
    segments = []
    cursor = 0
    for offset, length, peak in sorted(raw):
        start = max(cursor, offset)
        segments.append(seg(start, start + length, peak))
        cursor = start + length + 1
    picked = select_top_k(segments, k)
    assert len(picked) <= min(k, len(segments))
    if segments and picked:
        unpicked = [s for s in segments if s not in picked]
        if unpicked:
            assert min(s.peak_score for s in picked) >= max(s.peak_score for s in unpicked)
    assert [s.start_frame for s in picked] == sorted(s.start_frame for s in picked)


class TestCsvRoundTrip:
    def test_round_trip(self):
        trace = trace_of([0.0, 1.5, 2.0, 0.25], start=7)
        text = trace_to_csv(trace)
        assert text.splitlines()[0] == "frame_index,score"
        back = trace_from_csv(text, KIND)
        assert back.values().tolist() == trace.values().tolist()
        assert (back.start_frame, back.end_frame) == (7, 11)

    def test_trace_requires_dense_ascending(self):
        with pytest.raises(ValueError):
            RiskTrace(KIND, 0, 3, (FrameRisk(0, 1.0), FrameRisk(2, 1.0), FrameRisk(1, 1.0)))
