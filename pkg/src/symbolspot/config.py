"""Run configuration: one dataclass, loadable from a JSON file.

Every tunable the pipeline consumes lives here with its default, so a
config file only needs the keys it wants to change. Unknown keys are
rejected loudly rather than silently ignored.
"""

import json
from dataclasses import dataclass, field, fields

from . import legend_parse, raster
from .detect import DetectorConfig
from .match import DEFAULT_RATIO, DEFAULT_TAU, SCORE_MODES, MatchConfig


class ConfigError(ValueError):
    """A config document had unknown keys or out-of-range values."""


@dataclass(frozen=True)
class PipelineConfig:
    threshold: int = raster.DEFAULT_THRESHOLD
    kernel_divisor: int = raster.KERNEL_DIVISOR
    white_mean_min: int = legend_parse.WHITE_MEAN_MIN
    stray_fraction: float = legend_parse.STRAY_FRACTION
    ratio: float = DEFAULT_RATIO
    outlier_tau: float = DEFAULT_TAU
    score_mode: str = "piecewise"
    eval_iou: float = 0.5
    anchor_words: tuple = ("LEGEND",)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    use_classical_table: bool = True
    use_classical_detector: bool = True
    # optional artifact paths, normally supplied per run on the CLI
    images: tuple = ()
    detection_sidecar: str = None
    embedding_sidecar: str = None
    ground_truth: str = None
    output_dir: str = None

    def __post_init__(self):
        if not 0 < self.threshold < 255:
            raise ConfigError("threshold must be in (0, 255)")
        if self.kernel_divisor < 1:
            raise ConfigError("kernel_divisor must be >= 1")
        if not 0 <= self.white_mean_min <= 255:
            raise ConfigError("white_mean_min must be in [0, 255]")
        if not 0 < self.stray_fraction < 1:
            raise ConfigError("stray_fraction must be in (0, 1)")
        if not 0 < self.ratio < 1:
            raise ConfigError("ratio must be in (0, 1)")
        if not 0 <= self.outlier_tau <= 1:
            raise ConfigError("outlier_tau must be in [0, 1]")
        if self.score_mode not in SCORE_MODES:
            raise ConfigError(f"score_mode must be one of {SCORE_MODES}")
        if not 0 < self.eval_iou <= 1:
            raise ConfigError("eval_iou must be in (0, 1]")
        object.__setattr__(self, "anchor_words", tuple(self.anchor_words))
        object.__setattr__(self, "images", tuple(self.images))
        if not self.anchor_words or not all(isinstance(w, str) and w for w in self.anchor_words):
            raise ConfigError("anchor_words must be non-empty strings")
        if not isinstance(self.detector, DetectorConfig):
            raise ConfigError("detector must be a DetectorConfig")

    def match_config(self) -> MatchConfig:
        return MatchConfig(ratio=self.ratio, outlier_tau=self.outlier_tau, score_mode=self.score_mode)

    def to_dict(self):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        out["detector"] = {f.name: getattr(self.detector, f.name) for f in fields(DetectorConfig)}
        return out


def config_from_dict(doc) -> PipelineConfig:
    """Build a PipelineConfig from a parsed JSON object."""
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = dict(doc)
    det = kwargs.get("detector")
    if det is not None:
        if not isinstance(det, dict):
            raise ConfigError("'detector' must be an object")
        det_known = {f.name for f in fields(DetectorConfig)}
        det_unknown = set(det) - det_known
        if det_unknown:
            raise ConfigError(f"unknown detector keys: {sorted(det_unknown)}")
        try:
            kwargs["detector"] = DetectorConfig(**det)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad detector config: {exc}") from exc
    try:
        return PipelineConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config: {exc}") from exc


def load_config(path) -> PipelineConfig:
    """Read a JSON config file; missing keys fall back to defaults."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(doc)
