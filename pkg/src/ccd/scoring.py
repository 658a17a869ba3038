"""Per-frame risk scorers, one per complication.

All three scorers share the contract: a non-negative score per frame,
zero exactly when no qualifying evidence was found, and a ``detail``
dict naming the evidence (candidate area, edge diagonal, bulging
sector).  Frames without a usable mask score zero with a
``mask_missing`` flag instead of failing, so a tracking dropout cannot
abort a run.

Scorers are pure per frame; ``risk_trace`` is the only function here
that touches the bundle on disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .config import IrisScoring, PcrScoring, PipelineConfig, VitreousScoring
from .core import ComplicationKind, VideoManifest, load_frame, load_mask
from .errors import EmptyMask, FramesUnavailable
from .geometry import bounding_box, box_diagonal, centroid_area, radius_profile

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class FrameRisk:
    frame: int
    score: float
    detail: dict = field(default_factory=dict)


@dataclass(frozen=True)
class CandidateMask:
    pixels: np.ndarray         # bool, frame-shaped, subset of the periphery band
    area: int
    mean_color: tuple[float, float, float]   # RGB, 0..255


# ---------------------------------------------------------------------------
# color helpers

def rgb_to_hsv(rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized RGB (uint8 or 0..255 float) to hue degrees [0,360), sat, val in [0,1]."""
    arr = np.asarray(rgb, dtype=np.float64) / 255.0
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    maxc = np.maximum(np.maximum(r, g), b)
    minc = np.minimum(np.minimum(r, g), b)
    delta = maxc - minc
    hue = np.zeros_like(maxc)
    nz = delta > 0
    rmax = nz & (maxc == r)
    gmax = nz & ~rmax & (maxc == g)
    bmax = nz & ~rmax & ~gmax
    hue[rmax] = ((g - b)[rmax] / delta[rmax]) % 6.0
    hue[gmax] = (b - r)[gmax] / delta[gmax] + 2.0
    hue[bmax] = (r - g)[bmax] / delta[bmax] + 4.0
    hue *= 60.0
    sat = np.where(maxc > 0, delta / np.where(maxc > 0, maxc, 1.0), 0.0)
    return hue, sat, maxc


def _color_gate(frame: np.ndarray, cfg: IrisScoring) -> np.ndarray:
    hue, sat, val = rgb_to_hsv(frame)
    return (
        (hue >= cfg.hue_min) & (hue <= cfg.hue_max)
        & (sat >= cfg.sat_min)
        & (val >= cfg.val_min) & (val <= cfg.val_max)
    )


# ---------------------------------------------------------------------------
# iris prolapse

def _mask_window(mask: np.ndarray, margin: int) -> tuple[slice, slice]:
    """Slices of the mask bounding box dilated by margin, clipped to the image."""
    ys, xs = np.nonzero(mask)
    h, w = mask.shape
    return (
        slice(max(0, int(ys.min()) - margin), min(h, int(ys.max()) + 1 + margin)),
        slice(max(0, int(xs.min()) - margin), min(w, int(xs.max()) + 1 + margin)),
    )


def iris_periphery_band(iris_mask: np.ndarray, band_fraction: float) -> np.ndarray:
    """Annulus of pixels just outside the iris, width band_fraction * R_eq.

    R_eq is the equivalent radius sqrt(area/pi) of the iris mask, so the
    band scales with the tracked iris rather than the frame.
    """
    if not 0 < band_fraction < 1:
        raise ValueError(f"band_fraction must be in (0,1), got {band_fraction}")
    mask = np.asarray(iris_mask, dtype=bool)
    area = int(mask.sum())
    if area == 0:
        raise EmptyMask("iris_periphery_band: empty iris mask")
    r_eq = math.sqrt(area / math.pi)
    width_px = band_fraction * r_eq
    # distance transform only over a window wide enough to hold the band
    win = _mask_window(mask, int(math.ceil(width_px)) + 2)
    sub = mask[win]
    dist = ndimage.distance_transform_edt(~sub)
    band = np.zeros_like(mask)
    band[win] = ~sub & (dist <= width_px)
    return band


def propose_candidates(
    frame_pixels: np.ndarray, band: np.ndarray, cfg: IrisScoring | None = None
) -> list[CandidateMask]:
    """Connected iris-tissue-colored regions inside the periphery band.

    This is the built-in color-region provider; risk_trace accepts any
    callable with the CandidateProvider signature instead.
    """
    cfg = cfg or IrisScoring()
    band = np.asarray(band, dtype=bool)
    if not band.any():
        return []
    frame_pixels = np.asarray(frame_pixels)
    win = _mask_window(band, 1)
    sub_band = band[win]
    sub_frame = frame_pixels[win]
    hits = np.zeros_like(sub_band)
    hits[sub_band] = _color_gate(sub_frame[sub_band], cfg)  # gate band pixels only
    if not hits.any():
        return []
    labels, count = ndimage.label(hits, structure=_EIGHT)
    out = []
    for i in range(1, count + 1):
        local = labels == i
        pixels = np.zeros_like(band)
        pixels[win] = local
        mean_color = tuple(float(c) for c in sub_frame[local].reshape(-1, 3).mean(axis=0))
        out.append(CandidateMask(pixels=pixels, area=int(local.sum()), mean_color=mean_color))
    return out


def filter_candidates(candidates: Sequence[CandidateMask], cfg: IrisScoring) -> list[CandidateMask]:
    """Drop instruments, glare and off-color blobs by size and mean color."""
    kept = []
    for cand in candidates:
        max_area = cfg.max_area_fraction * cand.pixels.size
        if cand.area < cfg.min_area or cand.area > max_area:
            continue
        hue, sat, val = rgb_to_hsv(np.array(cand.mean_color))
        if float(val) > cfg.specular_value:
            continue
        if not (cfg.hue_min <= float(hue) <= cfg.hue_max):
            continue
        kept.append(cand)
    return kept


CandidateProvider = Callable[[np.ndarray, np.ndarray], list[CandidateMask]]


def score_iris_prolapse(
    frame_pixels: np.ndarray,
    iris_mask: np.ndarray,
    cfg: IrisScoring | None = None,
    frame_index: int = 0,
    provider: CandidateProvider | None = None,
) -> FrameRisk:
    """Risk = area of the largest surviving tissue candidate in the periphery."""
    cfg = cfg or IrisScoring()
    mask = np.asarray(iris_mask, dtype=bool)
    if not mask.any():
        return FrameRisk(frame_index, 0.0, {"mask_missing": True})
    band = iris_periphery_band(mask, cfg.band_fraction)
    if provider is None:
        candidates = propose_candidates(frame_pixels, band, cfg)
    else:
        candidates = provider(frame_pixels, band)
    survivors = filter_candidates(candidates, cfg)
    if not survivors:
        return FrameRisk(frame_index, 0.0, {"candidates": len(candidates)})
    best = max(survivors, key=lambda c: c.area)
    centroid, _ = centroid_area(best.pixels)
    return FrameRisk(
        frame_index,
        float(best.area),
        {
            "candidate_area": best.area,
            "candidate_centroid": centroid,
            "mean_color": best.mean_color,
            "survivors": len(survivors),
        },
    )


# ---------------------------------------------------------------------------
# PCR

def luminance(frame: np.ndarray) -> np.ndarray:
    arr = np.asarray(frame, dtype=np.float64)
    y = 0.299 * arr[..., 0] + 0.587 * arr[..., 1] + 0.114 * arr[..., 2]
    return np.clip(np.rint(y), 0, 255).astype(np.uint8)


def equalize_within(lum: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Histogram-equalize intensities over masked pixels only.

    Pixels outside the mask are zeroed; a constant region maps to a
    constant so a featureless pupil produces no gradients.
    """
    out = np.zeros_like(lum)
    values = lum[mask]
    if values.size == 0:
        return out
    hist = np.bincount(values, minlength=256)
    cdf = hist.cumsum()
    cdf_min = cdf[np.nonzero(hist)[0][0]]
    denom = values.size - cdf_min
    if denom <= 0:  # single intensity level
        return out
    lut = np.clip(np.rint(255.0 * (cdf - cdf_min) / denom), 0, 255).astype(np.uint8)
    out[mask] = lut[values]
    return out


def sobel_magnitude(img: np.ndarray) -> np.ndarray:
    p = np.pad(np.asarray(img, dtype=np.float64), 1, mode="edge")
    gx = (
        p[:-2, 2:] + 2.0 * p[1:-1, 2:] + p[2:, 2:]
        - p[:-2, :-2] - 2.0 * p[1:-1, :-2] - p[2:, :-2]
    )
    gy = (
        p[2:, :-2] + 2.0 * p[2:, 1:-1] + p[2:, 2:]
        - p[:-2, :-2] - 2.0 * p[:-2, 1:-1] - p[:-2, 2:]
    )
    return np.hypot(gx, gy)


def hysteresis_edges(mag: np.ndarray, high: float, low: float) -> np.ndarray:
    """Double-threshold hysteresis: weak pixels survive only when their
    8-connected component contains a strong pixel."""
    strong = mag >= high
    if not strong.any():
        return np.zeros_like(strong)
    weak = mag >= low
    labels, _ = ndimage.label(weak, structure=_EIGHT)
    keep = np.unique(labels[strong])
    return np.isin(labels, keep[keep > 0])


def edge_chains(edges: np.ndarray, min_pixels: int) -> list[dict]:
    """8-connected edge components with their inclusive bounding boxes."""
    labels, count = ndimage.label(edges, structure=_EIGHT)
    if count == 0:
        return []
    sizes = np.bincount(labels.ravel())
    chains = []
    for i, slc in enumerate(ndimage.find_objects(labels), start=1):
        if slc is None or sizes[i] < min_pixels:
            continue
        box = (slc[1].start, slc[0].start, slc[1].stop - 1, slc[0].stop - 1)
        chains.append({"pixels": int(sizes[i]), "bbox": box, "diagonal": box_diagonal(box)})
    return chains


def score_pcr(
    frame_pixels: np.ndarray,
    pupil_mask: np.ndarray,
    cfg: PcrScoring | None = None,
    frame_index: int = 0,
) -> FrameRisk:
    """Risk = longest equalized-edge bounding-box diagonal / sqrt(pupil area).

    The pupil rim is excluded by eroding the valid region, otherwise the
    mask boundary itself would register as a giant circular edge.
    """
    cfg = cfg or PcrScoring()
    pupil = np.asarray(pupil_mask, dtype=bool)
    area = int(pupil.sum())
    if area == 0:
        return FrameRisk(frame_index, 0.0, {"mask_missing": True})

    # everything outside the pupil is zeroed, so a window around the
    # pupil bounding box computes identical gradients at valid pixels
    win = _mask_window(pupil, cfg.rim_margin + 2)
    sub_pupil = pupil[win]
    eq = equalize_within(luminance(np.asarray(frame_pixels)[win]), sub_pupil)
    mag = sobel_magnitude(eq / 255.0)
    valid = ndimage.binary_erosion(sub_pupil, structure=_EIGHT, iterations=cfg.rim_margin)
    mag[~valid] = 0.0

    edges = hysteresis_edges(mag, cfg.edge_high, cfg.edge_low_ratio * cfg.edge_high)
    chains = edge_chains(edges, cfg.min_edge_pixels)
    if not chains:
        return FrameRisk(frame_index, 0.0, {"chains": 0})
    best = max(chains, key=lambda c: c["diagonal"])
    x0, y0 = win[1].start, win[0].start
    bx0, by0, bx1, by1 = best["bbox"]
    return FrameRisk(
        frame_index,
        float(best["diagonal"] / math.sqrt(area)),
        {"diagonal": best["diagonal"], "chain_pixels": best["pixels"],
         "bbox": (bx0 + x0, by0 + y0, bx1 + x0, by1 + y0),
         "chains": len(chains), "pupil_area": area},
    )


# ---------------------------------------------------------------------------
# vitreous loss

def score_vitreous(
    pupil_mask: np.ndarray,
    cfg: VitreousScoring | None = None,
    frame_index: int = 0,
) -> FrameRisk:
    """Risk = max sector-mean radius / global mean boundary radius.

    A round pupil scores ~1; a wedge-shaped bulge pushes one sector's
    mean up.  The global mean averages raw boundary samples, bulge
    included.  Too few present sectors means occlusion: score 0 rather
    than a ratio over a sliver.
    """
    cfg = cfg or VitreousScoring()
    pupil = np.asarray(pupil_mask, dtype=bool)
    if not pupil.any():
        return FrameRisk(frame_index, 0.0, {"mask_missing": True})
    profile = radius_profile(pupil, cfg.sectors)
    if profile.present_count < cfg.min_present_sectors:
        return FrameRisk(
            frame_index, 0.0,
            {"occluded": True, "present_sectors": profile.present_count},
        )
    sector, sector_mean = profile.max_sector()
    global_mean = profile.global_mean_radius()
    if global_mean <= 0:
        return FrameRisk(frame_index, 0.0, {"degenerate": True})
    return FrameRisk(
        frame_index,
        float(sector_mean / global_mean),
        {"max_sector": sector, "max_sector_mean": sector_mean,
         "global_mean_radius": global_mean, "present_sectors": profile.present_count},
    )


# ---------------------------------------------------------------------------
# trace orchestration

def external_mask_provider(manifest: VideoManifest, structure: str) -> Callable[[int], CandidateProvider]:
    """Candidate port fed by pre-generated masks shipped in the bundle.

    The structure's mask sequence (one file per frame under mask_dirs)
    is intersected with the periphery band and split into components.
    """

    def for_frame(frame: int) -> CandidateProvider:
        def provide(frame_pixels: np.ndarray, band: np.ndarray) -> list[CandidateMask]:
            ext = load_mask(manifest, structure, frame)
            hits = np.asarray(band, dtype=bool) & ext
            if not hits.any():
                return []
            labels, count = ndimage.label(hits, structure=_EIGHT)
            out = []
            for i in range(1, count + 1):
                pixels = labels == i
                mean_color = tuple(
                    float(c) for c in frame_pixels[pixels].reshape(-1, 3).mean(axis=0)
                )
                out.append(CandidateMask(pixels=pixels, area=int(pixels.sum()), mean_color=mean_color))
            return out

        return provide

    return for_frame


def risk_trace(
    manifest: VideoManifest,
    kind: ComplicationKind,
    scope: tuple[int, int],
    config: PipelineConfig | None = None,
    provider_for_frame: Callable[[int], CandidateProvider] | None = None,
) -> list[FrameRisk]:
    """Score every frame in [scope.start, scope.end) for one complication."""
    config = config or PipelineConfig()
    start, end = scope
    needs_frames = kind in (ComplicationKind.IRIS_PROLAPSE, ComplicationKind.PCR)
    if needs_frames and not manifest.has_frames:
        raise FramesUnavailable(
            f"{manifest.video_id}: scoring '{kind}' needs frame pixels but has_frames is false"
        )

    out: list[FrameRisk] = []
    for frame in range(start, end):
        if kind is ComplicationKind.IRIS_PROLAPSE:
            risk = score_iris_prolapse(
                load_frame(manifest, frame),
                load_mask(manifest, "iris", frame),
                config.iris,
                frame_index=frame,
                provider=provider_for_frame(frame) if provider_for_frame else None,
            )
        elif kind is ComplicationKind.PCR:
            risk = score_pcr(
                load_frame(manifest, frame),
                load_mask(manifest, "pupil", frame),
                config.pcr,
                frame_index=frame,
            )
        else:
            risk = score_vitreous(
                load_mask(manifest, "pupil", frame), config.vitreous, frame_index=frame
            )
        out.append(risk)
    return out
