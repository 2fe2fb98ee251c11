"""Symbol spotting for raster engineering drawings.

Extracts the legend table from a drawing, parses it into symbol/name
templates, localizes candidate symbols across the sheet and classifies
each detection against the templates with keypoint similarity scoring.
"""

__version__ = "0.1.0"

from .raster import BBox, LineKernel
from .detect import Detection, DetectorConfig
from .match import OUTLIER, MatchConfig
from .config import ConfigError, PipelineConfig, load_config
from .pipeline import EvalRow, Report, TableNotFound, evaluate, run_batch, run_pipeline

__all__ = [
    "BBox",
    "LineKernel",
    "Detection",
    "DetectorConfig",
    "MatchConfig",
    "OUTLIER",
    "ConfigError",
    "PipelineConfig",
    "load_config",
    "EvalRow",
    "Report",
    "TableNotFound",
    "evaluate",
    "run_batch",
    "run_pipeline",
    "__version__",
]
