import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from ccd.core import ComplicationKind
from ccd.phantom import AnomalySpec, PhantomSpec, synth_bundle


def disk_mask(width: int, height: int, radius: float,
              cx: float | None = None, cy: float | None = None) -> np.ndarray:
    cx = width / 2.0 if cx is None else cx
    cy = height / 2.0 if cy is None else cy
    ys, xs = np.mgrid[0:height, 0:width]
    return np.hypot(xs - cx, ys - cy) <= radius


def wedge_disk_mask(width: int, height: int, radius: float, wedge_radius: float,
                    angle_start: float = 0.0, angle_span: float = 30.0,
                    cx: float | None = None, cy: float | None = None) -> np.ndarray:
    cx = width / 2.0 if cx is None else cx
    cy = height / 2.0 if cy is None else cy
    ys, xs = np.mgrid[0:height, 0:width]
    dist = np.hypot(xs - cx, ys - cy)
    angle = (np.degrees(np.arctan2(ys - cy, xs - cx)) - angle_start) % 360.0
    return (dist <= radius) | ((angle < angle_span) & (dist <= wedge_radius))


def random_blob_mask(rng: np.random.Generator, width: int = 80, height: int = 60) -> np.ndarray:
    """Union of a few random disks; always non-empty."""
    mask = np.zeros((height, width), dtype=bool)
    for _ in range(rng.integers(1, 4)):
        r = float(rng.uniform(4, 14))
        cx = float(rng.uniform(r + 1, width - r - 1))
        cy = float(rng.uniform(r + 1, height - r - 1))
        mask |= disk_mask(width, height, r, cx, cy)
    return mask


@pytest.fixture(scope="session")
def anomaly_bundle(tmp_path_factory):
    """One small phantom with all three anomalies in separate intervals."""
    spec = PhantomSpec(
        seed=7,
        frame_count=120,
        width=480,
        height=360,
        iris_radius=160,
        pupil_radius=60,
        phases=(
            ("cortical_wash", 0, 80),
            ("artificial_lens_insertion", 95, 120),
        ),
        anomalies=(
            AnomalySpec(ComplicationKind.IRIS_PROLAPSE, 10, 40, 400.0),
            AnomalySpec(ComplicationKind.PCR, 45, 75, 80.0),
            AnomalySpec(ComplicationKind.VITREOUS_LOSS, 78, 95, 1.3),
        ),
    )
    out = tmp_path_factory.mktemp("bundles") / "phantom_anomalies"
    manifest = synth_bundle(spec, out)
    return manifest, spec


@pytest.fixture(scope="session")
def clean_bundle(tmp_path_factory):
    spec = PhantomSpec(
        seed=3,
        frame_count=40,
        width=480,
        height=360,
        iris_radius=160,
        pupil_radius=60,
        phases=(("cortical_wash", 0, 30), ("artificial_lens_insertion", 32, 40)),
    )
    out = tmp_path_factory.mktemp("bundles") / "phantom_clean"
    manifest = synth_bundle(spec, out)
    return manifest, spec
