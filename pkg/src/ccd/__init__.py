"""Complication detection for cataract-surgery video bundles."""

from .config import PipelineConfig, load_config
from .core import (
    ComplicationKind,
    MaskSequence,
    PhaseAnnotation,
    VideoManifest,
    load_frame,
    load_manifest,
    load_mask,
)
from .decision import MetricsReport, VideoDecision, aggregate_video, compute_metrics, funnel_counts
from .phantom import AnomalySpec, PhantomSpec, synth_bundle
from .phases import scope_frames
from .scoring import FrameRisk, score_iris_prolapse, score_pcr, score_vitreous
from .segments import HighRiskSegment, RiskTrace, flag_segments, merge_segments, select_top_k

__version__ = "0.1.0"

__all__ = [
    "AnomalySpec",
    "ComplicationKind",
    "FrameRisk",
    "HighRiskSegment",
    "MaskSequence",
    "MetricsReport",
    "PhantomSpec",
    "PhaseAnnotation",
    "PipelineConfig",
    "RiskTrace",
    "VideoDecision",
    "VideoManifest",
    "aggregate_video",
    "compute_metrics",
    "flag_segments",
    "funnel_counts",
    "load_config",
    "load_frame",
    "load_manifest",
    "load_mask",
    "merge_segments",
    "scope_frames",
    "score_iris_prolapse",
    "score_pcr",
    "score_vitreous",
    "select_top_k",
    "synth_bundle",
]
