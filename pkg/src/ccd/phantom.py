"""Deterministic synthetic eye-surgery bundles for desk-scale testing.

Each phantom renders a centered eye: sclera background, brown iris disk
(the iris mask covers the full disk, pupil included), dark pupil disk.
Anomalies are injected over frame intervals:

  iris_prolapse   brown blob of `magnitude` px area sitting in the iris
                  periphery (painted on the frame only)
  pcr             bright line of `magnitude` px length across the pupil
                  (painted on the frame only)
  vitreous_loss   pupil boundary wedge extended by factor `magnitude`
                  over one 30-degree sector (mask and frame both change)

Masks come straight from the renderer's geometry, so mask and frame
always agree.  Identical specs produce byte-identical bundles;
ground truth goes to truth.json for the oracle mock and the acceptance
suite.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .core import FRAME_NAME, ComplicationKind, VideoManifest, load_manifest
from .errors import InvalidSpec

COLOR_SCLERA = (230, 225, 220)
COLOR_IRIS = (105, 70, 45)
COLOR_PUPIL = (25, 20, 20)
COLOR_PCR_LINE = (200, 200, 210)

# Blob center sits mid-band for the default periphery fraction.
_BAND_FRACTION = 0.15
_WEDGE_START_DEG = 0.0
_WEDGE_SPAN_DEG = 30.0


@dataclass(frozen=True)
class AnomalySpec:
    kind: ComplicationKind
    start_frame: int
    end_frame: int  # exclusive
    magnitude: float  # blob area px | line length px | wedge radius factor

    def to_record(self) -> dict:
        return {
            "kind": str(self.kind),
            "start_frame": self.start_frame,
            "end_frame": self.end_frame,
            "magnitude": self.magnitude,
        }


@dataclass(frozen=True)
class PhantomSpec:
    seed: int = 0
    frame_count: int = 100
    width: int = 960
    height: int = 540
    iris_radius: int = 160
    pupil_radius: int = 70
    phases: tuple = ()            # (phase_name, start, end) triples
    anomalies: tuple[AnomalySpec, ...] = ()
    noise_sigma: float = 0.0

    def validate(self) -> None:
        if self.frame_count <= 0:
            raise InvalidSpec("frame_count must be > 0")
        if not 0 < self.pupil_radius < self.iris_radius:
            raise InvalidSpec("need 0 < pupil_radius < iris_radius")
        if self.iris_radius >= min(self.width, self.height) / 2:
            raise InvalidSpec("iris_radius must fit inside the frame")
        for anomaly in self.anomalies:
            if anomaly.magnitude <= 0:
                raise InvalidSpec(f"{anomaly.kind}: magnitude must be > 0")
            if not 0 <= anomaly.start_frame < anomaly.end_frame <= self.frame_count:
                raise InvalidSpec(f"{anomaly.kind}: interval outside [0, {self.frame_count})")

    @classmethod
    def from_json(cls, path: str | Path) -> "PhantomSpec":
        doc = json.loads(Path(path).read_text())
        anomalies = tuple(
            AnomalySpec(
                kind=ComplicationKind(a["kind"]),
                start_frame=int(a["start_frame"]),
                end_frame=int(a["end_frame"]),
                magnitude=float(a["magnitude"]),
            )
            for a in doc.get("anomalies", [])
        )
        phases = tuple(
            (p["phase_name"], int(p["start_frame"]), int(p["end_frame"]))
            for p in doc.get("phases", [])
        )
        return cls(
            seed=int(doc.get("seed", 0)),
            frame_count=int(doc["frame_count"]),
            width=int(doc.get("width", 960)),
            height=int(doc.get("height", 540)),
            iris_radius=int(doc.get("iris_radius", 160)),
            pupil_radius=int(doc.get("pupil_radius", 70)),
            phases=phases,
            anomalies=anomalies,
            noise_sigma=float(doc.get("noise_sigma", 0.0)),
        )


class _Renderer:
    def __init__(self, spec: PhantomSpec):
        self.spec = spec
        cx, cy = spec.width / 2.0, spec.height / 2.0
        ys, xs = np.mgrid[0:spec.height, 0:spec.width]
        self.dist = np.hypot(xs - cx, ys - cy)
        self.angle = np.degrees(np.arctan2(ys - cy, xs - cx)) % 360.0
        self.iris_disk = self.dist <= spec.iris_radius
        self.pupil_disk = self.dist <= spec.pupil_radius
        self.cx, self.cy = cx, cy
        self.xs, self.ys = xs, ys

    def blob_mask(self, area_px: float) -> np.ndarray:
        radius = math.sqrt(area_px / math.pi)
        offset = self.spec.iris_radius * (1.0 + _BAND_FRACTION / 2.0)
        bx, by = self.cx + offset, self.cy  # due east, mid-band
        blob = np.hypot(self.xs - bx, self.ys - by) <= radius
        return blob & ~self.iris_disk

    def line_mask(self, length_px: float, half_width: float = 1.5) -> np.ndarray:
        half = length_px / 2.0
        return (
            (np.abs(self.ys - self.cy) <= half_width)
            & (np.abs(self.xs - self.cx) <= half)
        )

    def wedge_mask(self, factor: float) -> np.ndarray:
        in_sector = (self.angle >= _WEDGE_START_DEG) & (
            self.angle < _WEDGE_START_DEG + _WEDGE_SPAN_DEG
        )
        return in_sector & (self.dist <= factor * self.spec.pupil_radius)

    def anomalies_at(self, frame: int) -> list[AnomalySpec]:
        return [
            a for a in self.spec.anomalies if a.start_frame <= frame < a.end_frame
        ]

    def masks_at(self, frame: int) -> tuple[np.ndarray, np.ndarray]:
        """(iris_mask, pupil_mask) for one frame, exact renderer geometry."""
        pupil = self.pupil_disk
        for anomaly in self.anomalies_at(frame):
            if anomaly.kind is ComplicationKind.VITREOUS_LOSS:
                pupil = pupil | self.wedge_mask(anomaly.magnitude)
        return self.iris_disk, pupil

    def frame_at(self, frame: int, rng: np.random.Generator | None) -> np.ndarray:
        img = np.empty((self.spec.height, self.spec.width, 3), dtype=np.uint8)
        img[:] = COLOR_SCLERA
        img[self.iris_disk] = COLOR_IRIS
        _, pupil = self.masks_at(frame)
        img[pupil] = COLOR_PUPIL
        for anomaly in self.anomalies_at(frame):
            if anomaly.kind is ComplicationKind.IRIS_PROLAPSE:
                img[self.blob_mask(anomaly.magnitude)] = COLOR_IRIS
            elif anomaly.kind is ComplicationKind.PCR:
                line = self.line_mask(anomaly.magnitude) & self.pupil_disk
                img[line] = COLOR_PCR_LINE
        if rng is not None and self.spec.noise_sigma > 0:
            noise = rng.normal(0.0, self.spec.noise_sigma, img.shape)
            img = np.clip(img.astype(np.float64) + noise, 0, 255).astype(np.uint8)
        return img


def _save_png(array: np.ndarray, path: Path) -> None:
    Image.fromarray(array).save(path, format="PNG")


def synth_bundle(spec: PhantomSpec, out_dir: str | Path, fps: float = 5.0) -> VideoManifest:
    """Render a complete bundle (frames, masks, manifest, truth) to out_dir."""
    spec.validate()
    out = Path(out_dir)
    frames_dir = out / "frames"
    pupil_dir = out / "masks" / "pupil"
    iris_dir = out / "masks" / "iris"
    for d in (frames_dir, pupil_dir, iris_dir):
        d.mkdir(parents=True, exist_ok=True)

    renderer = _Renderer(spec)
    rng = np.random.default_rng(spec.seed) if spec.noise_sigma > 0 else None
    for frame in range(spec.frame_count):
        name = FRAME_NAME % frame
        iris_mask, pupil_mask = renderer.masks_at(frame)
        _save_png(renderer.frame_at(frame, rng), frames_dir / name)
        _save_png(iris_mask.astype(np.uint8) * 255, iris_dir / name)
        _save_png(pupil_mask.astype(np.uint8) * 255, pupil_dir / name)

    manifest_doc = {
        "video_id": out.name,
        "fps": fps,
        "width": spec.width,
        "height": spec.height,
        "frame_count": spec.frame_count,
        "frame_dir": "frames",
        "mask_dirs": {"pupil": "masks/pupil", "iris": "masks/iris"},
        "phases": [
            {"phase_name": name, "start_frame": start, "end_frame": end}
            for name, start, end in spec.phases
        ],
        "has_frames": True,
    }
    (out / "manifest.json").write_text(json.dumps(manifest_doc, indent=2, sort_keys=True) + "\n")
    (out / "truth.json").write_text(
        json.dumps([a.to_record() for a in spec.anomalies], indent=2) + "\n"
    )
    return load_manifest(out)
