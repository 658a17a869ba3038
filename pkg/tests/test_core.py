import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from ccd.core import (
    FRAME_NAME,
    ComplicationKind,
    MaskSequence,
    binarize,
    load_frame,
    load_manifest,
    load_mask,
)
from ccd.errors import DimensionMismatch, MissingFile, PhaseOverlap, SchemaError


def write_bundle(root: Path, frame_count=5, width=32, height=24, phases=None,
                 has_frames=True, skip=()):
    """Minimal hand-rolled bundle (independent of the phantom renderer)."""
    phases = phases if phases is not None else [
        {"phase_name": "cortical_wash", "start_frame": 0, "end_frame": frame_count}
    ]
    (root / "frames").mkdir(parents=True)
    (root / "masks" / "pupil").mkdir(parents=True)
    (root / "masks" / "iris").mkdir(parents=True)
    frame = Image.new("RGB", (width, height), (200, 180, 160))
    mask = Image.new("L", (width, height), 255)
    for i in range(frame_count):
        name = FRAME_NAME % i
        if has_frames and ("frames", i) not in skip:
            frame.save(root / "frames" / name)
        if ("pupil", i) not in skip:
            mask.save(root / "masks" / "pupil" / name)
        if ("iris", i) not in skip:
            mask.save(root / "masks" / "iris" / name)
    doc = {
        "video_id": root.name,
        "fps": 5.0,
        "width": width,
        "height": height,
        "frame_count": frame_count,
        "frame_dir": "frames",
        "mask_dirs": {"pupil": "masks/pupil", "iris": "masks/iris"},
        "phases": phases,
        "has_frames": has_frames,
    }
    (root / "manifest.json").write_text(json.dumps(doc))
    return root


class TestLoadManifest:
    def test_well_formed_round_trips(self, tmp_path):
        root = write_bundle(tmp_path / "v1", frame_count=100,
                            phases=[{"phase_name": "cortical_wash",
                                     "start_frame": 0, "end_frame": 100}])
        manifest = load_manifest(root)
        assert manifest.frame_count == 100
        assert manifest.video_id == "v1"
        assert len(manifest.phases) == 1
        assert set(manifest.mask_dirs) == {"pupil", "iris"}

    def test_missing_mask_names_the_path(self, tmp_path):
        root = write_bundle(tmp_path / "v2", frame_count=50, skip={("pupil", 42)})
        with pytest.raises(MissingFile) as err:
            load_manifest(root)
        assert "pupil" in str(err.value) and FRAME_NAME % 42 in str(err.value)

    def test_overlapping_phases_rejected(self, tmp_path):
        phases = [
            {"phase_name": "cortical_wash", "start_frame": 10, "end_frame": 50},
            {"phase_name": "lens_nucleus_removal", "start_frame": 40, "end_frame": 80},
        ]
        root = write_bundle(tmp_path / "v3", frame_count=100, phases=phases)
        with pytest.raises(PhaseOverlap):
            load_manifest(root)

    def test_lens_insertion_before_wash_rejected(self, tmp_path):
        phases = [
            {"phase_name": "artificial_lens_insertion", "start_frame": 0, "end_frame": 10},
            {"phase_name": "cortical_wash", "start_frame": 20, "end_frame": 40},
        ]
        root = write_bundle(tmp_path / "v4", frame_count=50, phases=phases)
        with pytest.raises(SchemaError):
            load_manifest(root)

    @pytest.mark.parametrize("patch,needle", [
        ({"fps": 0}, "fps"),
        ({"frame_count": 0}, "frame_count"),
        ({"video_id": 7}, "video_id"),
        ({"mask_dirs": {"pupil": "masks/pupil"}}, "iris"),
    ])
    def test_schema_errors_name_the_field(self, tmp_path, patch, needle):
        root = write_bundle(tmp_path / "v5")
        doc = json.loads((root / "manifest.json").read_text())
        doc.update(patch)
        (root / "manifest.json").write_text(json.dumps(doc))
        with pytest.raises(SchemaError) as err:
            load_manifest(root)
        assert needle in str(err.value)

    def test_phase_out_of_range_rejected(self, tmp_path):
        phases = [{"phase_name": "cortical_wash", "start_frame": 0, "end_frame": 99}]
        root = write_bundle(tmp_path / "v6", frame_count=50, phases=phases)
        with pytest.raises(SchemaError):
            load_manifest(root)

    def test_frameless_bundle_skips_frame_checks(self, tmp_path):
        root = write_bundle(tmp_path / "v7", has_frames=False)
        manifest = load_manifest(root)
        assert manifest.has_frames is False

    def test_deterministic(self, tmp_path):
        root = write_bundle(tmp_path / "v8")
        assert load_manifest(root) == load_manifest(root)

    def test_validation_implies_loadability(self, tmp_path):
        root = write_bundle(tmp_path / "v9", frame_count=4)
        manifest = load_manifest(root)
        for frame in range(manifest.frame_count):
            for structure in manifest.mask_dirs:
                assert load_mask(manifest, structure, frame).shape == (24, 32)
            assert load_frame(manifest, frame).shape == (24, 32, 3)


class TestLoadMask:
    def test_all_255_is_all_ones(self, tmp_path):
        root = write_bundle(tmp_path / "m1", frame_count=1)
        manifest = load_manifest(root)
        assert load_mask(manifest, "pupil", 0).all()

    def test_all_zero_is_legal_empty(self, tmp_path):
        root = write_bundle(tmp_path / "m2", frame_count=1)
        Image.new("L", (32, 24), 0).save(root / "masks" / "pupil" / (FRAME_NAME % 0))
        manifest = load_manifest(root)
        mask = load_mask(manifest, "pupil", 0)
        assert not mask.any()
        assert MaskSequence(manifest, "pupil").empty_frames() == [0]

    def test_wrong_dimensions_rejected(self, tmp_path):
        root = write_bundle(tmp_path / "m3", frame_count=1)
        Image.new("L", (16, 16), 255).save(root / "masks" / "iris" / (FRAME_NAME % 0))
        manifest = load_manifest(root)
        with pytest.raises(DimensionMismatch):
            load_mask(manifest, "iris", 0)

    def test_threshold_128(self, tmp_path):
        root = write_bundle(tmp_path / "m4", frame_count=1)
        arr = np.zeros((24, 32), dtype=np.uint8)
        arr[:, :16] = 127
        arr[:, 16:] = 128
        Image.fromarray(arr).save(root / "masks" / "pupil" / (FRAME_NAME % 0))
        manifest = load_manifest(root)
        mask = load_mask(manifest, "pupil", 0)
        assert not mask[:, :16].any() and mask[:, 16:].all()


def test_binarize_idempotent():
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, size=(20, 30), dtype=np.uint8)
    once = binarize(img)
    assert once.dtype == bool
    assert np.array_equal(binarize(once), once)


def test_complication_kinds_exhaustive():
    assert {k.value for k in ComplicationKind} == {"iris_prolapse", "pcr", "vitreous_loss"}
