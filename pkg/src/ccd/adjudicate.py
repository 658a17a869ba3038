"""Segment adjudication through a vision-language endpoint or a mock.

Each top-k segment becomes one request: a crop around the iris/pupil
union from the representative frame plus the complication's prompt from
the catalog.  Responses are parsed into SegmentVerdicts; a response
that stays unparseable after one re-ask degrades to (unsure, low) with
a parse_failed flag rather than aborting the run.  Only transport and
configuration problems raise.

The prompt catalog is data (prompts/*.txt), never built in code, so
its bytes can be pinned by fixtures.
"""

from __future__ import annotations

import base64
import io
import json
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from PIL import Image

from .config import VlmConfig
from .core import ComplicationKind
from .errors import (
    BothMasksEmpty,
    EndpointUnreachable,
    Misconfigured,
    ParseError,
)
from .segments import HighRiskSegment

LABELS = ("yes", "no", "unsure")
CONFIDENCES = ("high", "medium", "low")

# Observation keys accepted per kind; anything else stays only in raw_response.
OBSERVATION_SCHEMAS: dict[ComplicationKind, tuple[str, ...]] = {
    ComplicationKind.IRIS_PROLAPSE: ("description",),
    ComplicationKind.PCR: (
        "posterior_capsule_continuity",
        "radial_tears_or_folds",
        "lens_fragment_drop",
        "chamber_depth_change",
        "red_reflex_abnormality",
        "instrument_or_fluid_action",
        "view_obstruction",
    ),
    ComplicationKind.VITREOUS_LOSS: (
        "pupil_shape",
        "pupil_apex_sharp",
        "instrument_or_fluid_action",
        "ovd_jet_visible",
        "iris_prolapse_signs",
        "pcr_signs",
        "vitreous_strands_visible",
        "wound_attachment_of_strands",
        "frame_quality_issues",
    ),
}


@dataclass(frozen=True)
class AdjudicationRequest:
    kind: ComplicationKind
    video_id: str
    segment: HighRiskSegment
    segment_index: int
    crop: np.ndarray          # HxWx3 uint8, native resolution
    prompt_text: str


@dataclass(frozen=True)
class SegmentVerdict:
    kind: ComplicationKind
    segment_index: int
    label: str                # yes | no | unsure
    confidence: str           # high | medium | low
    observations: dict = field(default_factory=dict)
    raw_response: str = ""
    segment: HighRiskSegment | None = None

    def to_record(self) -> dict:
        rec = {
            "kind": str(self.kind),
            "segment_index": self.segment_index,
            "label": self.label,
            "confidence": self.confidence,
            "observations": self.observations,
            "raw_response": self.raw_response,
        }
        if self.segment is not None:
            rec["segment"] = self.segment.to_record()
        return rec


# ---------------------------------------------------------------------------
# prompt catalog

def build_prompt(kind: ComplicationKind) -> str:
    """Verbatim catalog text for one complication, response format included."""
    name = f"{kind.value}.txt"
    return resources.files("ccd.prompts").joinpath(name).read_text(encoding="utf-8")


# ---------------------------------------------------------------------------
# crop

def crop_roi(
    frame_pixels: np.ndarray,
    iris_mask: np.ndarray,
    pupil_mask: np.ndarray,
    margin_fraction: float = 0.10,
) -> np.ndarray:
    """Sub-image around the iris/pupil union, each side dilated by the margin."""
    union = np.asarray(iris_mask, dtype=bool) | np.asarray(pupil_mask, dtype=bool)
    ys, xs = np.nonzero(union)
    if xs.size == 0:
        raise BothMasksEmpty("crop_roi: iris and pupil masks are both empty")
    height, width = union.shape
    # half-open box [x0,x1) x [y0,y1)
    x0, x1 = int(xs.min()), int(xs.max()) + 1
    y0, y1 = int(ys.min()), int(ys.max()) + 1
    dx = int(round(margin_fraction * (x1 - x0)))
    dy = int(round(margin_fraction * (y1 - y0)))
    x0, x1 = max(0, x0 - dx), min(width, x1 + dx)
    y0, y1 = max(0, y0 - dy), min(height, y1 + dy)
    return np.asarray(frame_pixels)[y0:y1, x0:x1]


# ---------------------------------------------------------------------------
# response parsing / rendering

def _norm_enum(value, allowed: tuple[str, ...]) -> str | None:
    if not isinstance(value, str):
        return None
    cleaned = value.strip().strip("[]*.").strip().lower()
    return cleaned if cleaned in allowed else None


def parse_iris_response(raw: str, segment_index: int = 0,
                        segment: HighRiskSegment | None = None) -> SegmentVerdict:
    """Line-oriented PROLAPSE_DETECTED / CONFIDENCE / DESCRIPTION format."""
    label = None
    confidence = "low"
    description = None
    for line in raw.splitlines():
        key, sep, value = line.partition(":")
        if not sep:
            continue
        key = key.strip().strip("*").lower()
        if key == "prolapse_detected":
            label = _norm_enum(value, ("yes", "no"))
            if label is None:
                raise ParseError(f"PROLAPSE_DETECTED value not YES/NO: {value.strip()!r}")
        elif key == "confidence":
            confidence = _norm_enum(value, CONFIDENCES) or "low"
        elif key == "description":
            description = value.strip()
    if label is None:
        raise ParseError("response has no PROLAPSE_DETECTED line")
    observations = {"description": description} if description else {}
    return SegmentVerdict(
        kind=ComplicationKind.IRIS_PROLAPSE,
        segment_index=segment_index,
        label=label,
        confidence=confidence,
        observations=observations,
        raw_response=raw,
        segment=segment,
    )


def _first_json_object(raw: str) -> dict | None:
    decoder = json.JSONDecoder()
    pos = raw.find("{")
    while pos != -1:
        try:
            obj, _ = decoder.raw_decode(raw, pos)
        except json.JSONDecodeError:
            pos = raw.find("{", pos + 1)
            continue
        if isinstance(obj, dict):
            return obj
        pos = raw.find("{", pos + 1)
    return None


def parse_structured_response(kind: ComplicationKind, raw: str, segment_index: int = 0,
                              segment: HighRiskSegment | None = None) -> SegmentVerdict:
    """JSON verdict format used by the PCR and vitreous-loss prompts.

    Tolerates code fences and surrounding prose: the first parseable
    JSON object wins.  Unknown observation keys are dropped (the raw
    text is retained); missing ones are fine.
    """
    if kind not in (ComplicationKind.PCR, ComplicationKind.VITREOUS_LOSS):
        raise ValueError(f"parse_structured_response does not handle kind '{kind}'")
    obj = _first_json_object(raw)
    if obj is None:
        raise ParseError("response contains no JSON object")
    label = _norm_enum(obj.get("label"), LABELS)
    if label is None:
        raise ParseError(f"label must be Yes/Unsure/No, got {obj.get('label')!r}")
    confidence = _norm_enum(obj.get("confidence"), CONFIDENCES) or "low"
    schema = OBSERVATION_SCHEMAS[kind]
    raw_obs = obj.get("observations")
    observations = (
        {k: v for k, v in raw_obs.items() if k in schema}
        if isinstance(raw_obs, dict)
        else {}
    )
    return SegmentVerdict(
        kind=kind,
        segment_index=segment_index,
        label=label,
        confidence=confidence,
        observations=observations,
        raw_response=raw,
        segment=segment,
    )


def parse_response(kind: ComplicationKind, raw: str, segment_index: int = 0,
                   segment: HighRiskSegment | None = None) -> SegmentVerdict:
    if kind is ComplicationKind.IRIS_PROLAPSE:
        return parse_iris_response(raw, segment_index, segment)
    return parse_structured_response(kind, raw, segment_index, segment)


def render_response(verdict: SegmentVerdict) -> str:
    """Inverse of parse_response for valid verdicts (used by mocks and tests)."""
    if verdict.kind is ComplicationKind.IRIS_PROLAPSE:
        lines = [
            f"PROLAPSE_DETECTED: {verdict.label.upper()}",
            f"CONFIDENCE: {verdict.confidence.capitalize()}",
        ]
        description = verdict.observations.get("description")
        if description:
            lines.append(f"DESCRIPTION: {description}")
        return "\n".join(lines)
    return json.dumps(
        {
            "label": verdict.label.capitalize(),
            "confidence": verdict.confidence.capitalize(),
            "observations": verdict.observations,
        },
        indent=2,
    )


# ---------------------------------------------------------------------------
# clients

class HttpVlmClient:
    """Chat-completion style endpoint: one image plus one text prompt.

    Endpoint and key come from CCD_VLM_ENDPOINT / CCD_VLM_API_KEY (or
    vlm.endpoint in the config file).  Transient transport failures are
    retried with exponential backoff; HTTP 4xx is a configuration
    problem and is not retried.
    """

    def __init__(self, cfg: VlmConfig):
        self.cfg = cfg
        self.endpoint = cfg.resolved_endpoint()
        if not self.endpoint:
            raise Misconfigured(
                "no VLM endpoint configured (set CCD_VLM_ENDPOINT) and mock disabled"
            )

    def ask(self, request: AdjudicationRequest) -> str:
        payload = {
            "model": self.cfg.model_for(str(request.kind)),
            "messages": [
                {
                    "role": "user",
                    "content": [
                        {"type": "text", "text": request.prompt_text},
                        {
                            "type": "image_url",
                            "image_url": {"url": _png_data_url(request.crop)},
                        },
                    ],
                }
            ],
        }
        if self.cfg.reasoning:
            payload["reasoning"] = self.cfg.reasoning  # opaque passthrough
        body = json.dumps(payload).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.cfg.api_key():
            headers["Authorization"] = f"Bearer {self.cfg.api_key()}"

        delay = self.cfg.backoff
        last_error: Exception | None = None
        for attempt in range(self.cfg.max_retries + 1):
            try:
                req = urllib.request.Request(self.endpoint, data=body, headers=headers)
                with urllib.request.urlopen(req, timeout=self.cfg.timeout) as resp:
                    doc = json.loads(resp.read().decode("utf-8"))
                return doc["choices"][0]["message"]["content"]
            except urllib.error.HTTPError as exc:
                if 400 <= exc.code < 500:
                    raise Misconfigured(f"endpoint rejected request: HTTP {exc.code}") from exc
                last_error = exc
            except (urllib.error.URLError, TimeoutError, OSError, KeyError,
                    json.JSONDecodeError) as exc:
                last_error = exc
            if attempt < self.cfg.max_retries:
                time.sleep(delay)
                delay *= 2
        raise EndpointUnreachable(
            f"{self.endpoint}: gave up after {self.cfg.max_retries + 1} attempts ({last_error})"
        )


def _png_data_url(image: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(image, dtype=np.uint8)).save(buf, format="PNG")
    return "data:image/png;base64," + base64.b64encode(buf.getvalue()).decode("ascii")


class ScriptedMockClient:
    """Replays raw responses from a fixture file.

    Fixture: JSON list of {video_id, kind, segment_index, raw_response}.
    A missing entry is a Misconfigured error; replays must be complete
    to be trustworthy.
    """

    def __init__(self, fixture_path: str | Path):
        path = Path(fixture_path)
        if not path.is_file():
            raise Misconfigured(f"scripted mock fixture not found: {path}")
        entries = json.loads(path.read_text())
        if not isinstance(entries, list):
            raise Misconfigured(f"{path}: fixture must be a JSON list")
        self.responses: dict[tuple[str, str, int], str] = {}
        for entry in entries:
            key = (entry["video_id"], entry["kind"], int(entry["segment_index"]))
            self.responses[key] = entry["raw_response"]

    def ask(self, request: AdjudicationRequest) -> str:
        key = (request.video_id, str(request.kind), request.segment_index)
        try:
            return self.responses[key]
        except KeyError:
            raise Misconfigured(f"scripted mock has no response for {key}") from None


class OracleMockClient:
    """Answers from phantom ground truth: positive iff the segment
    overlaps a truth interval of its kind."""

    def __init__(self, truth_entries: list[dict]):
        self.truth = [
            (e["kind"], int(e["start_frame"]), int(e["end_frame"])) for e in truth_entries
        ]

    @classmethod
    def for_bundle(cls, bundle_root: str | Path) -> "OracleMockClient":
        path = Path(bundle_root) / "truth.json"
        if not path.is_file():
            raise Misconfigured(f"oracle mock needs ground truth: {path} not found")
        return cls(json.loads(path.read_text()))

    def _hit(self, request: AdjudicationRequest) -> bool:
        seg = request.segment
        return any(
            kind == str(request.kind) and seg.start_frame < end and start < seg.end_frame
            for kind, start, end in self.truth
        )

    def ask(self, request: AdjudicationRequest) -> str:
        positive = self._hit(request)
        if request.kind is ComplicationKind.IRIS_PROLAPSE:
            label, description = ("YES", "dark tissue beyond the boundary") if positive \
                else ("NO", "periphery clear")
            return (
                f"PROLAPSE_DETECTED: {label}\nCONFIDENCE: High\nDESCRIPTION: {description}"
            )
        return json.dumps(
            {"label": "Yes" if positive else "No", "confidence": "High",
             "reasons": ["phantom ground truth"], "observations": {}}
        )


def make_client(cfg: VlmConfig, bundle_root: str | Path | None = None):
    cfg_mock = cfg.mock
    if cfg_mock == "scripted":
        return ScriptedMockClient(cfg.fixture)
    if cfg_mock == "oracle":
        if bundle_root is None:
            raise Misconfigured("oracle mock requires a bundle root")
        return OracleMockClient.for_bundle(bundle_root)
    return HttpVlmClient(cfg)


# ---------------------------------------------------------------------------
# adjudication

def adjudicate_segment(request: AdjudicationRequest, client) -> SegmentVerdict:
    """One verdict per request; parse failures degrade, never raise."""
    raw = client.ask(request)
    try:
        return parse_response(request.kind, raw, request.segment_index, request.segment)
    except ParseError:
        raw = client.ask(request)  # one re-ask, then degrade
    try:
        return parse_response(request.kind, raw, request.segment_index, request.segment)
    except ParseError:
        pass
    return SegmentVerdict(
        kind=request.kind,
        segment_index=request.segment_index,
        label="unsure",
        confidence="low",
        observations={"parse_failed": True},
        raw_response=raw,
        segment=request.segment,
    )


def adjudicate_all(requests: list[AdjudicationRequest], client,
                   max_concurrent: int = 4) -> list[SegmentVerdict]:
    """Adjudicate requests concurrently, joining verdicts in request order."""
    if not requests:
        return []
    if max_concurrent <= 1 or len(requests) == 1:
        return [adjudicate_segment(r, client) for r in requests]
    with ThreadPoolExecutor(max_workers=max_concurrent) as pool:
        return list(pool.map(lambda r: adjudicate_segment(r, client), requests))
