"""Low-compute price tag recognition: locate, rectify and read the retail price."""

from .config import ConfigError, PipelineConfig
from .imgcore import Quad, Rect
from .ocr import Price
from .pipeline import Metrics, RecognitionResult, compute_metrics, run_dataset, run_single
from .zonefind import PriceFormat, TagModel

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Metrics",
    "PipelineConfig",
    "Price",
    "PriceFormat",
    "Quad",
    "RecognitionResult",
    "Rect",
    "TagModel",
    "compute_metrics",
    "run_dataset",
    "run_single",
]
