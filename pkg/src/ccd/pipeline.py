"""End-to-end per-video pipeline and corpus evaluation.

Per video and complication: scope by phase, score every scoped frame,
flag/merge/rank windows into segments, adjudicate the top k, aggregate
into a decision.  All intermediates are written out so any stage can be
recomputed from disk without re-scoring.

Everything written here is deterministic for a fixed bundle and mock:
JSON is sorted-key, floats use repr, and nothing embeds timestamps.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .adjudicate import (
    AdjudicationRequest,
    SegmentVerdict,
    adjudicate_all,
    build_prompt,
    crop_roi,
    make_client,
)
from .config import PipelineConfig
from .core import ALL_KINDS, ComplicationKind, VideoManifest, load_frame, load_mask, load_manifest
from .decision import (
    STAGE_SCOPED_OUT,
    VideoDecision,
    aggregate_video,
    average_metrics,
    compute_metrics,
    format_funnel_table,
    format_metrics_table,
    funnel_counts,
    scoped_out_decision,
)
from .errors import EmptyInput, LabelMissing
from .phases import scope_frames
from .scoring import risk_trace
from .segments import (
    HighRiskSegment,
    RiskTrace,
    flag_segments,
    make_trace,
    merge_segments,
    select_top_k,
    trace_to_csv,
)


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def segments_for_trace(trace: RiskTrace, config: PipelineConfig) -> list[HighRiskSegment]:
    flagged = flag_segments(trace, config.window, config.threshold_for(str(trace.kind)))
    return merge_segments(flagged, config.merge_gap)


def build_requests(
    manifest: VideoManifest,
    kind: ComplicationKind,
    selected: list[HighRiskSegment],
    config: PipelineConfig,
) -> list[AdjudicationRequest]:
    prompt = build_prompt(kind)
    requests = []
    for index, segment in enumerate(selected):
        frame = segment.representative_frame
        crop = crop_roi(
            load_frame(manifest, frame),
            load_mask(manifest, "iris", frame),
            load_mask(manifest, "pupil", frame),
            config.vlm.margin_fraction,
        )
        requests.append(
            AdjudicationRequest(
                kind=kind,
                video_id=manifest.video_id,
                segment=segment,
                segment_index=index,
                crop=crop,
                prompt_text=prompt,
            )
        )
    return requests


def run_video(
    manifest_path: str | Path,
    config: PipelineConfig,
    out_dir: str | Path,
    client=None,
) -> dict[ComplicationKind, VideoDecision]:
    """Full pipeline for one bundle; writes traces, segments, verdicts, decision."""
    config.validate()
    manifest = load_manifest(manifest_path)
    bundle_root = manifest.root
    out = Path(out_dir) / manifest.video_id
    if client is None:
        client = make_client(config.vlm, bundle_root)

    decisions: dict[ComplicationKind, VideoDecision] = {}
    segment_records: dict[str, list[dict]] = {}
    verdict_records: dict[str, list[dict]] = {}
    scope_records: dict[str, list[int] | None] = {}

    for kind in ALL_KINDS:
        scope = scope_frames(manifest, kind)
        scope_records[str(kind)] = list(scope) if scope else None
        if scope is None:
            decisions[kind] = scoped_out_decision(manifest.video_id, kind)
            segment_records[str(kind)] = []
            verdict_records[str(kind)] = []
            continue

        trace = make_trace(kind, scope, risk_trace(manifest, kind, scope, config))
        traces_dir = out / "traces"
        traces_dir.mkdir(parents=True, exist_ok=True)
        (traces_dir / f"{kind}.csv").write_text(trace_to_csv(trace))

        merged = segments_for_trace(trace, config)
        selected = select_top_k(merged, config.top_k) if merged else []
        selected_keys = {(s.start_frame, s.end_frame) for s in selected}
        segment_records[str(kind)] = [
            {**seg.to_record(), "selected": (seg.start_frame, seg.end_frame) in selected_keys}
            for seg in merged
        ]

        requests = build_requests(manifest, kind, selected, config)
        verdicts = adjudicate_all(requests, client, config.vlm.max_concurrent)
        verdict_records[str(kind)] = [v.to_record() for v in verdicts]
        decisions[kind] = aggregate_video(kind, verdicts, manifest.video_id)

    _write_json(out / "segments.json", {
        "video_id": manifest.video_id, "scopes": scope_records, "segments": segment_records,
    })
    _write_json(out / "verdicts.json", {
        "video_id": manifest.video_id, "verdicts": verdict_records,
    })
    _write_json(out / "decision.json", {
        "video_id": manifest.video_id,
        "decisions": {str(k): d.to_record() for k, d in decisions.items()},
    })
    return decisions


def load_labels(labels_path: str | Path) -> dict[str, dict[str, bool]]:
    doc = json.loads(Path(labels_path).read_text())
    return {
        video_id: {str(kind): bool(flags.get(str(kind), False)) for kind in ALL_KINDS}
        for video_id, flags in doc.items()
    }


def run_eval(
    corpus_dir: str | Path,
    labels_path: str | Path,
    config: PipelineConfig,
    out_dir: str | Path,
    jobs: int = 1,
) -> dict:
    """Run every bundle in the corpus and emit metrics + funnel reports."""
    config.validate()
    corpus = Path(corpus_dir)
    bundles = sorted(p.parent for p in corpus.glob("*/manifest.json"))
    if not bundles:
        raise EmptyInput(f"no bundles (subdirectories with manifest.json) under {corpus}")
    labels = load_labels(labels_path)
    for bundle in bundles:
        if bundle.name not in labels:
            raise LabelMissing(bundle.name)

    def one(bundle: Path) -> dict[ComplicationKind, VideoDecision]:
        return run_video(bundle, config, out_dir)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, bundles))
    else:
        results = [one(b) for b in bundles]

    pairs: dict[ComplicationKind, list[tuple[VideoDecision, bool]]] = {k: [] for k in ALL_KINDS}
    for bundle, decisions in zip(bundles, results):
        for kind, decision in decisions.items():
            pairs[kind].append((decision, labels[bundle.name][str(kind)]))

    reports = []
    metrics_records = {}
    for kind in ALL_KINDS:
        evaluated = [(d, t) for d, t in pairs[kind] if d.stage_reached != STAGE_SCOPED_OUT]
        if not evaluated:
            metrics_records[str(kind)] = None
            continue
        report = compute_metrics(evaluated)
        reports.append(report)
        metrics_records[str(kind)] = report.to_record()

    funnel = funnel_counts([pair for kind in ALL_KINDS for pair in pairs[kind]])

    report_doc = {
        "videos": len(bundles),
        "metrics": metrics_records,
        "average": average_metrics(reports) if reports else None,
        "funnel": {str(k): row.to_record() for k, row in funnel.items()},
        "decisions": {
            bundle.name: {str(k): d.to_record() for k, d in decisions.items()}
            for bundle, decisions in zip(bundles, results)
        },
    }
    out = Path(out_dir)
    _write_json(out / "report.json", report_doc)
    text = format_metrics_table(reports) + "\n\n" + format_funnel_table(funnel) + "\n"
    (out / "report.txt").write_text(text)
    return report_doc
