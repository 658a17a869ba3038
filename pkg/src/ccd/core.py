"""Domain types and on-disk bundle loading.

A video bundle is a directory with:

    manifest.json
    frames/frame_%06d.png          24-bit color, optional (has_frames)
    masks/<structure>/frame_%06d.png   8-bit single channel, 0/255

``manifest.json`` keys: video_id, fps, width, height, frame_count,
frame_dir, mask_dirs, phases[{phase_name,start_frame,end_frame}],
has_frames.  Masks binarize at threshold 128.  All structures in
mask_dirs must be complete over [0, frame_count); a missing file is a
hard error at load time because silent gaps would corrupt the sliding
windows downstream.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DimensionMismatch, MissingFile, PhaseOverlap, SchemaError

FRAME_NAME = "frame_%06d.png"

# Canonical phase names; anything else is carried through as "other".
PHASE_CORTICAL_WASH = "cortical_wash"
PHASE_LENS_REMOVAL = "lens_nucleus_removal"
PHASE_LENS_INSERTION = "artificial_lens_insertion"


class ComplicationKind(str, enum.Enum):
    IRIS_PROLAPSE = "iris_prolapse"
    PCR = "pcr"
    VITREOUS_LOSS = "vitreous_loss"

    def __str__(self) -> str:  # keep CLI/JSON output plain
        return self.value


ALL_KINDS = (
    ComplicationKind.IRIS_PROLAPSE,
    ComplicationKind.PCR,
    ComplicationKind.VITREOUS_LOSS,
)


@dataclass(frozen=True)
class PhaseAnnotation:
    phase_name: str
    start_frame: int
    end_frame: int  # exclusive

    def overlaps(self, other: "PhaseAnnotation") -> bool:
        return self.start_frame < other.end_frame and other.start_frame < self.end_frame


@dataclass(frozen=True)
class VideoManifest:
    video_id: str
    fps: float
    width: int
    height: int
    frame_count: int
    frame_dir: str | None
    mask_dirs: dict[str, str]
    phases: tuple[PhaseAnnotation, ...]
    has_frames: bool
    root: Path = field(default_factory=Path)

    def frame_path(self, frame: int) -> Path:
        if self.frame_dir is None:
            raise SchemaError(f"{self.video_id}: bundle has no frame_dir")
        return self.root / self.frame_dir / (FRAME_NAME % frame)

    def mask_path(self, structure: str, frame: int) -> Path:
        try:
            mask_dir = self.mask_dirs[structure]
        except KeyError:
            raise SchemaError(f"{self.video_id}: no mask dir for structure '{structure}'") from None
        return self.root / mask_dir / (FRAME_NAME % frame)

    def phases_named(self, name: str) -> list[PhaseAnnotation]:
        return [p for p in self.phases if p.phase_name == name]


def _require(doc: dict, key: str, kind: type, where: str):
    if key not in doc:
        raise SchemaError(f"{where}: missing key '{key}'")
    value = doc[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise SchemaError(f"{where}: key '{key}' must be {kind.__name__}, got {type(value).__name__}")
    return value


def _parse_phases(raw, frame_count: int, where: str) -> tuple[PhaseAnnotation, ...]:
    if not isinstance(raw, list):
        raise SchemaError(f"{where}: 'phases' must be a list")
    phases = []
    for i, entry in enumerate(raw):
        ctx = f"{where}: phases[{i}]"
        if not isinstance(entry, dict):
            raise SchemaError(f"{ctx}: must be an object")
        name = _require(entry, "phase_name", str, ctx)
        start = _require(entry, "start_frame", int, ctx)
        end = _require(entry, "end_frame", int, ctx)
        if not (0 <= start < end <= frame_count):
            raise SchemaError(
                f"{ctx}: interval [{start},{end}) must satisfy 0 <= start < end <= {frame_count}"
            )
        phases.append(PhaseAnnotation(name, start, end))

    ordered = sorted(phases, key=lambda p: (p.start_frame, p.end_frame))
    for a, b in zip(ordered, ordered[1:]):
        if a.overlaps(b):
            raise PhaseOverlap(
                f"{where}: phase '{a.phase_name}' [{a.start_frame},{a.end_frame}) overlaps "
                f"'{b.phase_name}' [{b.start_frame},{b.end_frame})"
            )

    # Annotation error guard: a lens-insertion phase that starts before the
    # first cortical wash makes the vitreous scope ill-defined downstream.
    washes = [p for p in ordered if p.phase_name == PHASE_CORTICAL_WASH]
    inserts = [p for p in ordered if p.phase_name == PHASE_LENS_INSERTION]
    if washes and inserts and inserts[0].start_frame < washes[0].start_frame:
        raise SchemaError(
            f"{where}: '{PHASE_LENS_INSERTION}' at frame {inserts[0].start_frame} precedes "
            f"'{PHASE_CORTICAL_WASH}' at frame {washes[0].start_frame}"
        )
    return tuple(ordered)


def load_manifest(path: str | Path) -> VideoManifest:
    """Load and fully validate a bundle manifest.

    ``path`` may point at the bundle directory or at manifest.json itself.
    Every referenced frame/mask file is verified to exist; the first
    missing path is reported.  Raises SchemaError / PhaseOverlap /
    MissingFile.
    """
    path = Path(path)
    manifest_path = path / "manifest.json" if path.is_dir() else path
    if not manifest_path.is_file():
        raise MissingFile(str(manifest_path))
    root = manifest_path.parent
    where = str(manifest_path)

    try:
        doc = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{where}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise SchemaError(f"{where}: top level must be an object")

    video_id = _require(doc, "video_id", str, where)
    fps = _require(doc, "fps", float, where)
    width = _require(doc, "width", int, where)
    height = _require(doc, "height", int, where)
    frame_count = _require(doc, "frame_count", int, where)
    has_frames = _require(doc, "has_frames", bool, where)
    mask_dirs = _require(doc, "mask_dirs", dict, where)
    if fps <= 0:
        raise SchemaError(f"{where}: fps must be > 0")
    if frame_count <= 0:
        raise SchemaError(f"{where}: frame_count must be > 0")
    if width <= 0 or height <= 0:
        raise SchemaError(f"{where}: width/height must be > 0")
    for structure in ("pupil", "iris"):
        if structure not in mask_dirs:
            raise SchemaError(f"{where}: mask_dirs must contain '{structure}'")
    for structure, rel in mask_dirs.items():
        if not isinstance(rel, str):
            raise SchemaError(f"{where}: mask_dirs['{structure}'] must be a string path")

    frame_dir = doc.get("frame_dir")
    if has_frames and not isinstance(frame_dir, str):
        raise SchemaError(f"{where}: has_frames is true but 'frame_dir' is missing")

    phases = _parse_phases(doc.get("phases", []), frame_count, where)

    manifest = VideoManifest(
        video_id=video_id,
        fps=fps,
        width=width,
        height=height,
        frame_count=frame_count,
        frame_dir=frame_dir if isinstance(frame_dir, str) else None,
        mask_dirs=dict(mask_dirs),
        phases=phases,
        has_frames=has_frames,
        root=root,
    )

    for frame in range(frame_count):
        if has_frames:
            fp = manifest.frame_path(frame)
            if not fp.is_file():
                raise MissingFile(str(fp))
        for structure in mask_dirs:
            mp = manifest.mask_path(structure, frame)
            if not mp.is_file():
                raise MissingFile(str(mp))

    return manifest


def binarize(image: np.ndarray, threshold: int = 128) -> np.ndarray:
    """Threshold an 8-bit image to a boolean mask; idempotent on booleans."""
    arr = np.asarray(image)
    if arr.dtype == bool:
        return arr
    return arr >= threshold


def load_mask(manifest: VideoManifest, structure: str, frame: int) -> np.ndarray:
    """Load one binary mask as a bool array of shape (height, width)."""
    if not 0 <= frame < manifest.frame_count:
        raise IndexError(f"frame {frame} outside [0, {manifest.frame_count})")
    path = manifest.mask_path(structure, frame)
    if not path.is_file():
        raise MissingFile(str(path))
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"))
    if arr.shape != (manifest.height, manifest.width):
        raise DimensionMismatch(
            f"{path}: mask is {arr.shape[1]}x{arr.shape[0]}, "
            f"manifest says {manifest.width}x{manifest.height}"
        )
    return binarize(arr)


def load_frame(manifest: VideoManifest, frame: int) -> np.ndarray:
    """Load one color frame as a uint8 array of shape (height, width, 3)."""
    if not 0 <= frame < manifest.frame_count:
        raise IndexError(f"frame {frame} outside [0, {manifest.frame_count})")
    path = manifest.frame_path(frame)
    if not path.is_file():
        raise MissingFile(str(path))
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"))
    if arr.shape[:2] != (manifest.height, manifest.width):
        raise DimensionMismatch(
            f"{path}: frame is {arr.shape[1]}x{arr.shape[0]}, "
            f"manifest says {manifest.width}x{manifest.height}"
        )
    return arr


class MaskSequence:
    """Per-frame masks for one structure, loaded lazily.

    Empty masks are legal; ``empty_frames`` reports them so callers can
    flag rather than fail.
    """

    def __init__(self, manifest: VideoManifest, structure: str):
        if structure not in manifest.mask_dirs:
            raise SchemaError(f"manifest has no masks for structure '{structure}'")
        self.manifest = manifest
        self.structure = structure

    def __len__(self) -> int:
        return self.manifest.frame_count

    def __getitem__(self, frame: int) -> np.ndarray:
        return load_mask(self.manifest, self.structure, frame)

    def empty_frames(self, start: int = 0, end: int | None = None) -> list[int]:
        end = self.manifest.frame_count if end is None else end
        return [i for i in range(start, end) if not self[i].any()]
