"""Phase-derived frame scopes per complication.

Iris prolapse can happen at any point, so it is scored over the whole
video.  Capsule tears become visible during cortical wash, so PCR is
scored there only.  Vitreous loss follows the rupture, so it is scored
from the start of cortical wash until lens insertion begins.  A video
with no cortical wash phase is not scoreable for PCR or vitreous loss:
``scope_frames`` returns None (not-applicable) and the video is
excluded from those evaluations.
"""

from __future__ import annotations

from .core import (
    PHASE_CORTICAL_WASH,
    PHASE_LENS_INSERTION,
    ComplicationKind,
    VideoManifest,
)

Scope = tuple[int, int]


def scope_frames(manifest: VideoManifest, kind: ComplicationKind) -> Scope | None:
    """Frame range [start, end) to analyze for one complication, or None."""
    if kind is ComplicationKind.IRIS_PROLAPSE:
        return (0, manifest.frame_count)

    washes = manifest.phases_named(PHASE_CORTICAL_WASH)
    if not washes:
        return None

    if kind is ComplicationKind.PCR:
        # Convex hull of the wash annotations keeps the windows contiguous
        # even when the annotation was split.
        return (
            min(p.start_frame for p in washes),
            max(p.end_frame for p in washes),
        )

    # vitreous loss
    start = min(p.start_frame for p in washes)
    inserts = manifest.phases_named(PHASE_LENS_INSERTION)
    end = min(p.start_frame for p in inserts) if inserts else manifest.frame_count
    return (start, end)
