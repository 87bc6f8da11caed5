"""Evaluation engine for embodied world-model videos.

Computes 16 perception metrics across six dimensions from standardized
artifact bundles, normalizes them against empirical bounds, aggregates a
composite EWMScore per model, and emits leaderboard/correlation reports.
"""

from .bundle import EvaluationBundle, ValidationReport, VideoManifest, load_bundle, validate_bundle
from .metrics import DIMENSIONS, METRIC_IDS, METRIC_INFO, DynamicPenaltyConfig, RawMetricValue
from .scoring import (
    BoundsTable,
    MetricVector,
    NormalizationBounds,
    ewm_score,
    load_bounds,
    normalize_human_score,
    normalize_metric,
    win_rate,
)
from .tensorio import read_tensor, write_tensor

__version__ = "0.1.0"

__all__ = [
    "DIMENSIONS",
    "METRIC_IDS",
    "METRIC_INFO",
    "BoundsTable",
    "DynamicPenaltyConfig",
    "EvaluationBundle",
    "MetricVector",
    "NormalizationBounds",
    "RawMetricValue",
    "ValidationReport",
    "VideoManifest",
    "ewm_score",
    "load_bounds",
    "load_bundle",
    "normalize_human_score",
    "normalize_metric",
    "read_tensor",
    "validate_bundle",
    "win_rate",
    "write_tensor",
]
