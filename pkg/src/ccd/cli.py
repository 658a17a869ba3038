"""Command-line entry point.

Each pipeline stage is independently invocable so stagewise behavior
can be inspected: validate, synth, score, segments, adjudicate, decide,
run (all stages), eval (corpus).

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 endpoint
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .adjudicate import make_client
from .config import load_config
from .core import ALL_KINDS, ComplicationKind, load_manifest
from .decision import aggregate_video
from .errors import (
    CcdError,
    EndpointUnreachable,
    Misconfigured,
)
from .phantom import PhantomSpec, synth_bundle
from .phases import scope_frames
from .scoring import risk_trace
from .segments import make_trace, segment_from_record, select_top_k, trace_to_csv
from .adjudicate import SegmentVerdict, adjudicate_all

log = logging.getLogger("ccd")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_ENDPOINT = 3


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="key-value config file")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="override one config key (repeatable)",
    )


def _kind(value: str) -> ComplicationKind:
    try:
        return ComplicationKind(value)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"unknown complication '{value}' (choose from {[str(k) for k in ALL_KINDS]})"
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccd",
        description="Complication detection pipeline for cataract-surgery video bundles.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a bundle against the manifest schema")
    p.add_argument("bundle", type=Path)

    p = sub.add_parser("synth", help="render a synthetic phantom bundle")
    p.add_argument("--spec", type=Path, required=True, help="phantom spec JSON")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--fps", type=float, default=5.0)

    p = sub.add_parser("score", help="write per-frame risk traces")
    p.add_argument("bundle", type=Path)
    p.add_argument("--kind", type=_kind, action="append", default=None)
    p.add_argument("--out", type=Path, required=True)
    _add_config_args(p)

    p = sub.add_parser("segments", help="flag/merge/rank segments from stored traces")
    p.add_argument("bundle", type=Path)
    p.add_argument("--out", type=Path, required=True, help="output dir holding traces/")
    _add_config_args(p)

    p = sub.add_parser("adjudicate", help="adjudicate selected segments from segments.json")
    p.add_argument("bundle", type=Path)
    p.add_argument("--out", type=Path, required=True)
    _add_config_args(p)

    p = sub.add_parser("decide", help="aggregate stored verdicts into decisions")
    p.add_argument("bundle", type=Path)
    p.add_argument("--out", type=Path, required=True)
    _add_config_args(p)

    p = sub.add_parser("run", help="run all stages for one bundle")
    p.add_argument("bundle", type=Path)
    p.add_argument("--out", type=Path, required=True)
    _add_config_args(p)

    p = sub.add_parser("eval", help="run a labeled corpus and report metrics + funnel")
    p.add_argument("corpus", type=Path)
    p.add_argument("--labels", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--jobs", type=int, default=1)
    _add_config_args(p)

    return parser


def _cmd_validate(args) -> int:
    manifest = load_manifest(args.bundle)
    print(
        f"ok: {manifest.video_id} ({manifest.frame_count} frames @ {manifest.fps} fps, "
        f"{manifest.width}x{manifest.height}, {len(manifest.phases)} phases)"
    )
    return EXIT_OK


def _cmd_synth(args) -> int:
    spec = PhantomSpec.from_json(args.spec)
    manifest = synth_bundle(spec, args.out, fps=args.fps)
    print(f"wrote {manifest.video_id}: {manifest.frame_count} frames under {args.out}")
    return EXIT_OK


def _cmd_score(args) -> int:
    config = load_config(args.config, args.overrides)
    manifest = load_manifest(args.bundle)
    kinds = args.kind or list(ALL_KINDS)
    traces_dir = args.out / manifest.video_id / "traces"
    traces_dir.mkdir(parents=True, exist_ok=True)
    for kind in kinds:
        scope = scope_frames(manifest, kind)
        if scope is None:
            log.info("%s: %s not applicable (no cortical wash phase)", manifest.video_id, kind)
            continue
        trace = make_trace(kind, scope, risk_trace(manifest, kind, scope, config))
        (traces_dir / f"{kind}.csv").write_text(trace_to_csv(trace))
        print(f"{kind}: scored frames [{scope[0]}, {scope[1]}) -> {traces_dir / f'{kind}.csv'}")
    return EXIT_OK


def _cmd_segments(args) -> int:
    from .segments import trace_from_csv

    config = load_config(args.config, args.overrides)
    manifest = load_manifest(args.bundle)
    out = args.out / manifest.video_id
    segment_records = {}
    scope_records = {}
    for kind in ALL_KINDS:
        scope = scope_frames(manifest, kind)
        scope_records[str(kind)] = list(scope) if scope else None
        trace_path = out / "traces" / f"{kind}.csv"
        if scope is None or not trace_path.is_file():
            segment_records[str(kind)] = []
            continue
        trace = trace_from_csv(trace_path.read_text(), kind)
        merged = pipeline.segments_for_trace(trace, config)
        selected = {(s.start_frame, s.end_frame) for s in select_top_k(merged, config.top_k)} \
            if merged else set()
        segment_records[str(kind)] = [
            {**seg.to_record(), "selected": (seg.start_frame, seg.end_frame) in selected}
            for seg in merged
        ]
        print(f"{kind}: {len(merged)} segments ({len(selected)} selected)")
    pipeline._write_json(out / "segments.json", {
        "video_id": manifest.video_id, "scopes": scope_records, "segments": segment_records,
    })
    return EXIT_OK


def _cmd_adjudicate(args) -> int:
    config = load_config(args.config, args.overrides)
    config.validate()
    manifest = load_manifest(args.bundle)
    out = args.out / manifest.video_id
    doc = json.loads((out / "segments.json").read_text())
    client = make_client(config.vlm, manifest.root)
    verdict_records = {}
    for kind in ALL_KINDS:
        records = [r for r in doc["segments"].get(str(kind), []) if r.get("selected")]
        selected = [segment_from_record(r) for r in records]
        requests = pipeline.build_requests(manifest, kind, selected, config)
        verdicts = adjudicate_all(requests, client, config.vlm.max_concurrent)
        verdict_records[str(kind)] = [v.to_record() for v in verdicts]
        print(f"{kind}: adjudicated {len(verdicts)} segments")
    pipeline._write_json(out / "verdicts.json", {
        "video_id": manifest.video_id, "verdicts": verdict_records,
    })
    return EXIT_OK


def _cmd_decide(args) -> int:
    config = load_config(args.config, args.overrides)
    manifest = load_manifest(args.bundle)
    out = args.out / manifest.video_id
    doc = json.loads((out / "verdicts.json").read_text())
    decisions = {}
    for kind in ALL_KINDS:
        scope = scope_frames(manifest, kind)
        if scope is None:
            from .decision import scoped_out_decision

            decisions[str(kind)] = scoped_out_decision(manifest.video_id, kind).to_record()
            continue
        verdicts = [
            SegmentVerdict(
                kind=kind,
                segment_index=r["segment_index"],
                label=r["label"],
                confidence=r["confidence"],
                observations=r.get("observations", {}),
                raw_response=r.get("raw_response", ""),
            )
            for r in doc["verdicts"].get(str(kind), [])
        ]
        decision = aggregate_video(kind, verdicts, manifest.video_id)
        decisions[str(kind)] = decision.to_record()
        print(f"{kind}: {'POSITIVE' if decision.label else 'negative'} ({decision.stage_reached})")
    pipeline._write_json(out / "decision.json", {
        "video_id": manifest.video_id, "decisions": decisions,
    })
    return EXIT_OK


def _cmd_run(args) -> int:
    config = load_config(args.config, args.overrides)
    decisions = pipeline.run_video(args.bundle, config, args.out)
    for kind, decision in decisions.items():
        print(f"{kind}: {'POSITIVE' if decision.label else 'negative'} ({decision.stage_reached})")
    return EXIT_OK


def _cmd_eval(args) -> int:
    config = load_config(args.config, args.overrides)
    report = pipeline.run_eval(args.corpus, args.labels, config, args.out, jobs=args.jobs)
    print((Path(args.out) / "report.txt").read_text(), end="")
    print(f"report: {Path(args.out) / 'report.json'} ({report['videos']} videos)")
    return EXIT_OK


_COMMANDS = {
    "validate": _cmd_validate,
    "synth": _cmd_synth,
    "score": _cmd_score,
    "segments": _cmd_segments,
    "adjudicate": _cmd_adjudicate,
    "decide": _cmd_decide,
    "run": _cmd_run,
    "eval": _cmd_eval,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return _COMMANDS[args.command](args)
    except Misconfigured as exc:
        log.error("configuration: %s", exc)
        return EXIT_USAGE
    except EndpointUnreachable as exc:
        log.error("endpoint: %s", exc)
        return EXIT_ENDPOINT
    except CcdError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_DATA
    except FileNotFoundError as exc:
        log.error("missing file: %s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
