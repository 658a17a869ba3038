"""Pipeline configuration.

The config file is a flat key-value text file:

    # comment
    window = 10
    scoring.iris.min_area = 50
    vlm.mock = oracle

Every key can also be overridden on the command line with
``--set key=value``.  Values are parsed as JSON where possible
(numbers, booleans), otherwise taken as strings.  Unknown keys are a
hard Misconfigured error so typos cannot silently fall back to
defaults.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import Misconfigured

ENV_ENDPOINT = "CCD_VLM_ENDPOINT"
ENV_API_KEY = "CCD_VLM_API_KEY"


@dataclass
class IrisScoring:
    band_fraction: float = 0.15        # periphery width as a fraction of R_eq
    min_area: int = 50                 # px
    max_area_fraction: float = 0.05    # of the frame
    specular_value: float = 0.9        # mean-color HSV value above this is glare
    hue_min: float = 5.0               # brown/red hue window, degrees
    hue_max: float = 35.0
    sat_min: float = 0.25
    val_min: float = 0.15
    val_max: float = 0.85
    threshold: float = 200.0           # window-mean flag threshold, px


@dataclass
class PcrScoring:
    edge_high: float = 1.0             # hysteresis high threshold on Sobel magnitude
    edge_low_ratio: float = 0.4        # low = ratio * high
    min_edge_pixels: int = 15
    rim_margin: int = 2                # erosion depth that removes pupil-rim response
    threshold: float = 0.35            # window-mean flag threshold


@dataclass
class VitreousScoring:
    sectors: int = 12
    min_present_sectors: int = 6       # fewer means occlusion, score 0
    threshold: float = 1.12            # window-mean flag threshold


@dataclass
class VlmConfig:
    mock: str = "none"                 # none | scripted | oracle
    fixture: str = ""                  # scripted-mock fixture file
    endpoint: str = ""                 # overridden by CCD_VLM_ENDPOINT
    model_iris_prolapse: str = "gpt-5"
    model_pcr: str = "gpt-5-mini"
    model_vitreous_loss: str = "gpt-5-mini"
    reasoning: str = ""                # opaque passthrough, not interpreted
    max_retries: int = 3
    backoff: float = 0.5               # seconds, doubled per retry
    timeout: float = 60.0
    max_concurrent: int = 4
    margin_fraction: float = 0.10      # crop dilation per side

    def model_for(self, kind: str) -> str:
        return getattr(self, f"model_{kind}")

    def resolved_endpoint(self) -> str:
        return os.environ.get(ENV_ENDPOINT, "") or self.endpoint

    def api_key(self) -> str:
        return os.environ.get(ENV_API_KEY, "")


@dataclass
class PipelineConfig:
    window: int = 10                   # sliding window length, frames
    merge_gap: int = 10                # segments closer than this are fused
    top_k: int = 5
    iris: IrisScoring = field(default_factory=IrisScoring)
    pcr: PcrScoring = field(default_factory=PcrScoring)
    vitreous: VitreousScoring = field(default_factory=VitreousScoring)
    vlm: VlmConfig = field(default_factory=VlmConfig)

    def threshold_for(self, kind: str) -> float:
        return {
            "iris_prolapse": self.iris.threshold,
            "pcr": self.pcr.threshold,
            "vitreous_loss": self.vitreous.threshold,
        }[kind]

    def validate(self) -> None:
        if self.window < 1:
            raise Misconfigured("window must be >= 1")
        if self.top_k < 1:
            raise Misconfigured("top_k must be >= 1")
        if self.merge_gap < 0:
            raise Misconfigured("merge_gap must be >= 0")
        if self.vlm.mock not in ("none", "scripted", "oracle"):
            raise Misconfigured(f"vlm.mock must be none|scripted|oracle, got '{self.vlm.mock}'")
        if self.vlm.mock != "none" and self.vlm.resolved_endpoint():
            raise Misconfigured("mock mode and a live endpoint are mutually exclusive")


# dotted config key -> (attribute path into PipelineConfig)
_SECTIONS = {
    "scoring.iris": "iris",
    "scoring.pcr": "pcr",
    "scoring.vitreous": "vitreous",
    "vlm": "vlm",
}
_VLM_MODEL_KEYS = {
    "vlm.model_for.iris_prolapse": "model_iris_prolapse",
    "vlm.model_for.pcr": "model_pcr",
    "vlm.model_for.vitreous_loss": "model_vitreous_loss",
}


def _coerce(target_type: type, raw, key: str):
    if isinstance(raw, str):
        try:
            raw = json.loads(raw)
        except (json.JSONDecodeError, ValueError):
            pass
    if target_type is float and isinstance(raw, int) and not isinstance(raw, bool):
        return float(raw)
    if target_type is int and isinstance(raw, float) and raw.is_integer():
        return int(raw)
    if not isinstance(raw, target_type) or (isinstance(raw, bool) and target_type is not bool):
        raise Misconfigured(f"config key '{key}' expects {target_type.__name__}, got {raw!r}")
    return raw


def set_key(config: PipelineConfig, key: str, value) -> None:
    """Assign one dotted config key, with type checking."""
    if key in _VLM_MODEL_KEYS:
        obj, attr = config.vlm, _VLM_MODEL_KEYS[key]
    else:
        obj, attr = config, key
        for prefix, section in _SECTIONS.items():
            if key.startswith(prefix + "."):
                obj = getattr(config, section)
                attr = key[len(prefix) + 1:]
                break
    valid = {f.name: f.type for f in fields(obj)}
    if attr not in valid:
        raise Misconfigured(f"unknown config key '{key}'")
    current = getattr(obj, attr)
    setattr(obj, attr, _coerce(type(current), value, key))


def load_config(path: str | Path | None = None, overrides: list[str] | None = None) -> PipelineConfig:
    """Build a config from defaults, an optional file, and --set overrides."""
    config = PipelineConfig()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise Misconfigured(f"config file not found: {path}")
        for lineno, line in enumerate(path.read_text().splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise Misconfigured(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = stripped.partition("=")
            set_key(config, key.strip(), value.strip())
    for item in overrides or []:
        if "=" not in item:
            raise Misconfigured(f"--set expects key=value, got '{item}'")
        key, _, value = item.partition("=")
        set_key(config, key.strip(), value.strip())
    return config
