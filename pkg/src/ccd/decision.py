"""Video-level decisions from segment verdicts, plus corpus metrics.

Aggregation rules differ per complication because their visual
signatures differ in reliability:

  iris prolapse   any segment answered yes          (cues are distinct)
  PCR             any segment yes or unsure         (cues are subtle;
                                                     unclear counts)
  vitreous loss   one yes at high confidence, or
                  two yes at medium confidence      (conservative)

Confidence is ignored for iris and PCR; for vitreous loss a yes at low
confidence never contributes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .adjudicate import SegmentVerdict
from .core import ComplicationKind
from .errors import EmptyInput, MixedKinds

STAGE_SCOPED_OUT = "scoped_out"
STAGE_NO_SEGMENTS = "no_segments"
STAGE_ADJUDICATED = "adjudicated"


@dataclass(frozen=True)
class VideoDecision:
    video_id: str
    kind: ComplicationKind
    label: bool
    stage_reached: str
    basis: tuple[SegmentVerdict, ...] = ()

    def to_record(self) -> dict:
        return {
            "video_id": self.video_id,
            "kind": str(self.kind),
            "label": self.label,
            "stage_reached": self.stage_reached,
            "basis": [
                {
                    "segment_index": v.segment_index,
                    "label": v.label,
                    "confidence": v.confidence,
                }
                for v in self.basis
            ],
        }


def scoped_out_decision(video_id: str, kind: ComplicationKind) -> VideoDecision:
    return VideoDecision(video_id, kind, False, STAGE_SCOPED_OUT)


def aggregate_video(
    kind: ComplicationKind,
    verdicts: list[SegmentVerdict],
    video_id: str = "",
) -> VideoDecision:
    """Fold segment verdicts into one per-video label for this kind."""
    for verdict in verdicts:
        if verdict.kind != kind:
            raise MixedKinds(f"verdict for '{verdict.kind}' passed to '{kind}' aggregation")
    if not verdicts:
        return VideoDecision(video_id, kind, False, STAGE_NO_SEGMENTS)

    if kind is ComplicationKind.IRIS_PROLAPSE:
        basis = [v for v in verdicts if v.label == "yes"]
    elif kind is ComplicationKind.PCR:
        basis = [v for v in verdicts if v.label in ("yes", "unsure")]
    else:  # vitreous loss
        high = [v for v in verdicts if v.label == "yes" and v.confidence == "high"]
        medium = [v for v in verdicts if v.label == "yes" and v.confidence == "medium"]
        if high:
            basis = high
        elif len(medium) >= 2:
            basis = medium
        else:
            basis = []

    return VideoDecision(
        video_id, kind, bool(basis), STAGE_ADJUDICATED, tuple(basis)
    )


# ---------------------------------------------------------------------------
# metrics

@dataclass(frozen=True)
class MetricsReport:
    kind: ComplicationKind
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    sensitivity: float
    specificity: float
    f1: float

    def to_record(self) -> dict:
        return {
            "kind": str(self.kind),
            "tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
            "accuracy": self.accuracy,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "f1": self.f1,
        }


def _pct(numerator: float, denominator: float) -> float:
    # A vacuous rate (0/0) counts as perfect: no cases existed to get wrong.
    if denominator == 0:
        return 100.0
    return round(100.0 * numerator / denominator, 2)


def metrics_from_counts(kind: ComplicationKind, tp: int, fp: int, tn: int, fn: int) -> MetricsReport:
    if tp == 0 and (fp > 0 or fn > 0):
        f1 = 0.0
    else:
        f1 = _pct(2 * tp, 2 * tp + fp + fn)
    return MetricsReport(
        kind=kind, tp=tp, fp=fp, tn=tn, fn=fn,
        accuracy=_pct(tp + tn, tp + fp + tn + fn),
        sensitivity=_pct(tp, tp + fn),
        specificity=_pct(tn, tn + fp),
        f1=f1,
    )


def compute_metrics(decisions: list[tuple[VideoDecision, bool]]) -> MetricsReport:
    """Confusion counts and percentage metrics over (decision, truth) pairs."""
    if not decisions:
        raise EmptyInput("compute_metrics: no decisions")
    kinds = {d.kind for d, _ in decisions}
    if len(kinds) != 1:
        raise MixedKinds(f"compute_metrics: mixed kinds {sorted(str(k) for k in kinds)}")
    tp = fp = tn = fn = 0
    for decision, truth in decisions:
        if decision.label and truth:
            tp += 1
        elif decision.label and not truth:
            fp += 1
        elif not decision.label and truth:
            fn += 1
        else:
            tn += 1
    return metrics_from_counts(kinds.pop(), tp, fp, tn, fn)


def average_metrics(reports: list[MetricsReport]) -> dict:
    """Mean of the rounded per-kind percentages, rounded again to 2 decimals."""
    n = len(reports)
    return {
        "accuracy": round(sum(r.accuracy for r in reports) / n, 2),
        "sensitivity": round(sum(r.sensitivity for r in reports) / n, 2),
        "specificity": round(sum(r.specificity for r in reports) / n, 2),
        "f1": round(sum(r.f1 for r in reports) / n, 2),
    }


# ---------------------------------------------------------------------------
# stagewise funnel

@dataclass(frozen=True)
class FunnelRow:
    kind: ComplicationKind
    total: int                 # videos evaluated (scoped-out ones excluded)
    total_true: int
    after_risk: int            # videos with at least one high-risk segment
    after_risk_true: int
    positive: int              # videos decided positive
    positive_true: int
    scoped_out: int = 0

    def cells(self) -> list[str]:
        return [
            f"{self.total} ({self.total_true})",
            f"{self.after_risk} ({self.after_risk_true})",
            f"{self.positive} ({self.positive_true})",
        ]

    def to_record(self) -> dict:
        return {
            "kind": str(self.kind),
            "total": [self.total, self.total_true],
            "after_risk_scoring": [self.after_risk, self.after_risk_true],
            "after_vlm": [self.positive, self.positive_true],
            "scoped_out": self.scoped_out,
        }


def funnel_counts(records: list[tuple[VideoDecision, bool]]) -> dict[ComplicationKind, FunnelRow]:
    """Stage survival counts per kind, truth counts in parentheses.

    Scoped-out videos are excluded from all three columns (they were
    never evaluated for the kind); their count is kept separately for
    audit.
    """
    rows: dict[ComplicationKind, FunnelRow] = {}
    for kind in ComplicationKind:
        mine = [(d, t) for d, t in records if d.kind == kind]
        if not mine:
            continue
        scoped_out = [(d, t) for d, t in mine if d.stage_reached == STAGE_SCOPED_OUT]
        evaluated = [(d, t) for d, t in mine if d.stage_reached != STAGE_SCOPED_OUT]
        adjudicated = [(d, t) for d, t in evaluated if d.stage_reached == STAGE_ADJUDICATED]
        positive = [(d, t) for d, t in evaluated if d.label]
        rows[kind] = FunnelRow(
            kind=kind,
            total=len(evaluated),
            total_true=sum(1 for _, t in evaluated if t),
            after_risk=len(adjudicated),
            after_risk_true=sum(1 for _, t in adjudicated if t),
            positive=len(positive),
            positive_true=sum(1 for _, t in positive if t),
            scoped_out=len(scoped_out),
        )
    return rows


# ---------------------------------------------------------------------------
# text rendering

_KIND_TITLES = {
    ComplicationKind.IRIS_PROLAPSE: "Iris Prolapse",
    ComplicationKind.PCR: "PCR",
    ComplicationKind.VITREOUS_LOSS: "Vitreous Loss",
}


def format_metrics_table(reports: list[MetricsReport]) -> str:
    header = ["Complication", "Accuracy", "Sensitivity", "Specificity", "F1 score"]
    lines = ["  ".join(f"{h:>14}" if i else f"{h:<14}" for i, h in enumerate(header))]
    for r in reports:
        cells = [f"{_KIND_TITLES[r.kind]:<14}"] + [
            f"{v:>14.2f}" for v in (r.accuracy, r.sensitivity, r.specificity, r.f1)
        ]
        lines.append("  ".join(cells))
    if len(reports) > 1:
        avg = average_metrics(reports)
        cells = [f"{'Average':<14}"] + [
            f"{avg[k]:>14.2f}" for k in ("accuracy", "sensitivity", "specificity", "f1")
        ]
        lines.append("  ".join(cells))
    return "\n".join(lines)


def format_funnel_table(rows: dict[ComplicationKind, FunnelRow]) -> str:
    header = ["Complication", "Total", "After Risk Scoring", "After VLM Classifier"]
    lines = ["  ".join(f"{h:>20}" if i else f"{h:<14}" for i, h in enumerate(header))]
    for kind in ComplicationKind:
        if kind not in rows:
            continue
        row = rows[kind]
        cells = [f"{_KIND_TITLES[kind]:<14}"] + [f"{c:>20}" for c in row.cells()]
        lines.append("  ".join(cells))
    return "\n".join(lines)
