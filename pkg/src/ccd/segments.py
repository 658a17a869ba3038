"""Sliding-window aggregation of risk traces into high-risk segments.

A window of W frame scores is flagged when its mean crosses the
complication threshold; a segment is the union of frames covered by a
chain of flagged windows.  Nearby segments are merged so the
adjudicator sees temporally diverse candidates, then the top k by peak
score go forward.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace

import numpy as np

from .core import ComplicationKind
from .scoring import FrameRisk


@dataclass(frozen=True)
class RiskTrace:
    kind: ComplicationKind
    start_frame: int
    end_frame: int  # exclusive
    scores: tuple[FrameRisk, ...]

    def __post_init__(self):
        expected = list(range(self.start_frame, self.end_frame))
        got = [s.frame for s in self.scores]
        if got != expected:
            raise ValueError(
                f"trace must cover [{self.start_frame},{self.end_frame}) densely and ascending"
            )

    def __len__(self) -> int:
        return self.end_frame - self.start_frame

    def values(self) -> np.ndarray:
        return np.array([s.score for s in self.scores], dtype=float)

    def score_at(self, frame: int) -> float:
        return self.scores[frame - self.start_frame].score


def make_trace(kind: ComplicationKind, scope: tuple[int, int], risks: list[FrameRisk]) -> RiskTrace:
    return RiskTrace(kind=kind, start_frame=scope[0], end_frame=scope[1], scores=tuple(risks))


@dataclass(frozen=True)
class HighRiskSegment:
    kind: ComplicationKind
    start_frame: int
    end_frame: int  # exclusive
    peak_score: float
    mean_score: float
    representative_frame: int
    covered_frames: int  # frames contributing to the stats (gaps excluded after merge)

    def gap_to(self, other: "HighRiskSegment") -> int:
        return other.start_frame - self.end_frame

    def to_record(self) -> dict:
        return {
            "kind": str(self.kind),
            "start_frame": self.start_frame,
            "end_frame": self.end_frame,
            "peak_score": self.peak_score,
            "mean_score": self.mean_score,
            "representative_frame": self.representative_frame,
            "covered_frames": self.covered_frames,
        }


def segment_from_record(rec: dict) -> HighRiskSegment:
    return HighRiskSegment(
        kind=ComplicationKind(rec["kind"]),
        start_frame=int(rec["start_frame"]),
        end_frame=int(rec["end_frame"]),
        peak_score=float(rec["peak_score"]),
        mean_score=float(rec["mean_score"]),
        representative_frame=int(rec["representative_frame"]),
        covered_frames=int(rec["covered_frames"]),
    )


def window_scores(trace: RiskTrace, window: int) -> list[tuple[int, float]]:
    """(start_frame, mean) per window position; one whole-trace window if short."""
    if window < 1:
        raise ValueError("window must be >= 1")
    values = trace.values()
    n = len(values)
    if n == 0:
        return []
    if n < window:
        return [(trace.start_frame, float(values.mean()))]
    csum = np.concatenate([[0.0], np.cumsum(values)])
    means = (csum[window:] - csum[:-window]) / window
    return [(trace.start_frame + i, float(means[i])) for i in range(n - window + 1)]


def flag_segments(trace: RiskTrace, window: int, threshold: float) -> list[HighRiskSegment]:
    """Maximal frame runs covered by windows whose mean reaches the threshold."""
    if threshold <= 0:
        raise ValueError("threshold must be > 0")
    n = len(trace)
    if n == 0:
        return []
    effective = min(window, n)
    covered = np.zeros(n, dtype=bool)
    for start, mean in window_scores(trace, window):
        if mean >= threshold:
            lo = start - trace.start_frame
            covered[lo:lo + effective] = True
    if not covered.any():
        return []

    values = trace.values()
    segments = []
    idx = [int(i) for i in np.nonzero(covered)[0]]
    run_start = idx[0]
    prev = idx[0]
    for i in idx[1:] + [None]:
        if i is not None and i == prev + 1:
            prev = i
            continue
        lo, hi = run_start, prev + 1
        chunk = values[lo:hi]
        best = int(np.argmax(chunk))  # argmax takes the earliest maximum
        peak = float(chunk.max())
        segments.append(
            HighRiskSegment(
                kind=trace.kind,
                start_frame=trace.start_frame + lo,
                end_frame=trace.start_frame + hi,
                peak_score=peak,
                # summation rounding must not push the mean past the peak
                mean_score=min(float(chunk.mean()), peak),
                representative_frame=trace.start_frame + lo + best,
                covered_frames=hi - lo,
            )
        )
        if i is not None:
            run_start = prev = i
    return segments


def merge_segments(segments: list[HighRiskSegment], gap: int) -> list[HighRiskSegment]:
    """Fuse consecutive segments separated by <= gap frames.

    Stats are recomputed over the union of the fused segments' covered
    frames; the gap frames contribute nothing.  Idempotent.
    """
    if not segments:
        return []
    ordered = sorted(segments, key=lambda s: s.start_frame)
    merged = [ordered[0]]
    for seg in ordered[1:]:
        cur = merged[-1]
        if seg.kind != cur.kind:
            raise ValueError("merge_segments: mixed complication kinds")
        if cur.gap_to(seg) <= gap:
            covered = cur.covered_frames + seg.covered_frames
            mean = min(
                (cur.mean_score * cur.covered_frames + seg.mean_score * seg.covered_frames)
                / covered,
                max(cur.peak_score, seg.peak_score),
            )
            if seg.peak_score > cur.peak_score:
                rep = seg.representative_frame
            elif seg.peak_score < cur.peak_score:
                rep = cur.representative_frame
            else:
                rep = min(cur.representative_frame, seg.representative_frame)
            merged[-1] = replace(
                cur,
                end_frame=seg.end_frame,
                peak_score=max(cur.peak_score, seg.peak_score),
                mean_score=mean,
                representative_frame=rep,
                covered_frames=covered,
            )
        else:
            merged.append(seg)
    return merged


def select_top_k(segments: list[HighRiskSegment], k: int = 5) -> list[HighRiskSegment]:
    """Up to k segments with the highest peaks, re-sorted by start frame."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(segments, key=lambda s: (-s.peak_score, s.start_frame))
    return sorted(ranked[:k], key=lambda s: s.start_frame)


# ---------------------------------------------------------------------------
# audit exports

def trace_to_csv(trace: RiskTrace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["frame_index", "score"])
    for risk in trace.scores:
        writer.writerow([risk.frame, repr(risk.score)])
    return buf.getvalue()


def trace_from_csv(text: str, kind: ComplicationKind) -> RiskTrace:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["frame_index", "score"]:
        raise ValueError("trace CSV must start with header 'frame_index,score'")
    risks = [FrameRisk(int(frame), float(score)) for frame, score in rows[1:]]
    if not risks:
        raise ValueError("trace CSV has no rows")
    return RiskTrace(
        kind=kind,
        start_frame=risks[0].frame,
        end_frame=risks[-1].frame + 1,
        scores=tuple(risks),
    )
