"""Score normalization, per-model metric vectors, and composite scoring.

Five metrics live on open scales and are mapped to [0, 1] by empirical
min-max bounds (shipped as versioned data in data/bounds_v1.json so
recomputed percentiles can be swapped in without a rebuild). The other
eleven are constructed in [0, 1] and pass through. The composite score is
100x the arithmetic mean of the 16 normalized values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

from .errors import BoundsVersionError, IncompleteVectorError
from .metrics import METRIC_IDS, METRIC_INFO, PER_MODEL, RAW, RawMetricValue

HIGHER_BETTER = "higher_better"
LOWER_BETTER = "lower_better"

# the only metrics allowed to carry bounds, and the one inverted direction
BOUNDED_METRICS = (
    "photometric_consistency",
    "motion_smoothness",
    "trajectory_accuracy",
    "flow_score",
    "depth_accuracy",
)

DEFAULT_BOUNDS_VERSION = "v1"


@dataclass(frozen=True)
class NormalizationBounds:
    metric_id: str
    empirical_max: float
    empirical_min: float
    direction: str = HIGHER_BETTER

    def __post_init__(self):
        if self.empirical_max <= self.empirical_min:
            raise ValueError(f"{self.metric_id}: max must exceed min")
        if self.direction not in (HIGHER_BETTER, LOWER_BETTER):
            raise ValueError(f"{self.metric_id}: bad direction {self.direction!r}")


@dataclass(frozen=True)
class BoundsTable:
    version: str
    bounds: dict  # metric_id -> NormalizationBounds

    def __post_init__(self):
        if set(self.bounds) != set(BOUNDED_METRICS):
            raise ValueError(
                f"bounds must cover exactly {sorted(BOUNDED_METRICS)}, got {sorted(self.bounds)}"
            )
        if self.bounds["depth_accuracy"].direction != LOWER_BETTER:
            raise ValueError("depth_accuracy bounds must be lower_better")


def load_bounds(path=None) -> BoundsTable:
    """Load a bounds file; defaults to the packaged v1 table."""
    if path is None:
        text = resources.files("ewmeval.data").joinpath("bounds_v1.json").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    entries = json.loads(text)
    versions = {e["version"] for e in entries}
    if len(versions) != 1:
        raise BoundsVersionError(f"bounds file mixes versions {sorted(versions)}")
    table = {
        e["metric_id"]: NormalizationBounds(
            metric_id=e["metric_id"],
            empirical_max=float(e["max"]),
            empirical_min=float(e["min"]),
            direction=e["direction"],
        )
        for e in entries
    }
    return BoundsTable(version=versions.pop(), bounds=table)


def normalize_metric(raw: float, bounds: NormalizationBounds) -> float:
    """Clamped min-max mapping; lower_better metrics invert the direction."""
    span = bounds.empirical_max - bounds.empirical_min
    scaled = (raw - bounds.empirical_min) / span
    clamped = max(0.0, min(1.0, scaled))
    return 1.0 - clamped if bounds.direction == LOWER_BETTER else clamped


@dataclass(frozen=True)
class MetricVector:
    """The 16 normalized metric values for one model."""

    model_id: str
    values: dict  # metric_id -> float in [0, 1]
    config: dict = field(default_factory=dict)  # gamma, alpha_dyn, w, bounds_version
    provenance: dict = field(default_factory=dict)  # metric_id -> {granularity, n_videos}

    def __post_init__(self):
        missing = [m for m in METRIC_IDS if m not in self.values]
        if missing:
            raise IncompleteVectorError(missing)
        extra = [m for m in self.values if m not in METRIC_IDS]
        if extra:
            raise ValueError(f"unknown metric ids in vector: {extra}")
        for mid, v in self.values.items():
            if not -1e-12 <= v <= 1.0 + 1e-12:
                raise ValueError(f"{mid}: normalized value {v} outside [0,1]")

    @property
    def bounds_version(self) -> str:
        return self.config.get("bounds_version", DEFAULT_BOUNDS_VERSION)

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "values": {m: self.values[m] for m in METRIC_IDS},
            "config": self.config,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "MetricVector":
        return cls(
            model_id=obj["model_id"],
            values=obj["values"],
            config=obj.get("config", {}),
            provenance=obj.get("provenance", {}),
        )


def normalize_raw(value: RawMetricValue, bounds_table: BoundsTable) -> float:
    """Single raw metric record -> normalized [0, 1] value."""
    if value.scale == RAW:
        return normalize_metric(value.value, bounds_table.bounds[value.metric_id])
    return value.value


def assemble_metric_vector(
    model_id: str,
    per_video: dict,
    corpus: dict,
    bounds_table: BoundsTable,
    config: dict | None = None,
) -> MetricVector:
    """Combine per-video and corpus-level raw records into one vector.

    ``per_video`` maps video_id -> {metric_id -> RawMetricValue}; raw-scale
    values normalize per video before the arithmetic mean (videos iterate
    in sorted order so reductions are deterministic). ``corpus`` maps
    metric_id -> RawMetricValue for the per-model metrics. Raises
    IncompleteVectorError naming every metric with no value at all.
    """
    values: dict[str, float] = {}
    provenance: dict[str, dict] = {}
    missing = []
    for mid in METRIC_IDS:
        info = METRIC_INFO[mid]
        if info.granularity == PER_MODEL:
            record = corpus.get(mid)
            if record is None:
                missing.append(mid)
                continue
            values[mid] = record.value
            provenance[mid] = {"granularity": PER_MODEL, "n_videos": len(per_video)}
            continue
        normalized = [
            normalize_raw(per_video[vid][mid], bounds_table)
            for vid in sorted(per_video)
            if mid in per_video[vid]
        ]
        if not normalized:
            missing.append(mid)
            continue
        values[mid] = float(sum(normalized) / len(normalized))
        provenance[mid] = {"granularity": "per_video", "n_videos": len(normalized)}
    if missing:
        raise IncompleteVectorError(missing)
    cfg = dict(config or {})
    cfg.setdefault("bounds_version", bounds_table.version)
    return MetricVector(model_id=model_id, values=values, config=cfg, provenance=provenance)


def ewm_score(vector: MetricVector) -> float:
    """Composite score: 100x the mean of the 16 normalized metrics."""
    return 100.0 * sum(vector.values[m] for m in METRIC_IDS) / len(METRIC_IDS)


def ewm_score_from_values(values: dict) -> float:
    """Composite score straight from a {metric_id: value} mapping."""
    missing = [m for m in METRIC_IDS if m not in values]
    if missing:
        raise IncompleteVectorError(missing)
    return 100.0 * sum(float(values[m]) for m in METRIC_IDS) / len(METRIC_IDS)


def normalize_human_score(likert: int) -> float:
    """Map a 1-5 human rating onto 0-100."""
    if isinstance(likert, bool) or not isinstance(likert, int) or not 1 <= likert <= 5:
        raise ValueError(f"human rating must be an integer in [1,5], got {likert!r}")
    return (likert - 1) / 4.0 * 100.0


@dataclass(frozen=True)
class PairwiseComparison:
    model_a: str
    model_b: str
    video_id: str
    winner: str  # "a" | "b" | "tie"

    def __post_init__(self):
        if self.winner not in ("a", "b", "tie"):
            raise ValueError(f"winner must be a|b|tie, got {self.winner!r}")
        if self.model_a == self.model_b:
            raise ValueError("a comparison needs two distinct models")


def win_rate(model_id: str, comparisons) -> float:
    """Fraction of head-to-head comparisons won; ties count half."""
    wins = 0.0
    appearances = 0
    for comp in comparisons:
        if model_id == comp.model_a:
            appearances += 1
            wins += {"a": 1.0, "tie": 0.5, "b": 0.0}[comp.winner]
        elif model_id == comp.model_b:
            appearances += 1
            wins += {"b": 1.0, "tie": 0.5, "a": 0.0}[comp.winner]
    if appearances == 0:
        raise ValueError(f"{model_id}: appears in no comparison")
    return wins / appearances
