"""The 16 video-quality metrics, computed from bundle artifacts.

Each function returns a RawMetricValue. Metrics constructed on [0, 1]
carry scale "unit_interval"; the five open-scale metrics carry scale
"raw" and are mapped to [0, 1] later by empirical min-max normalization
(see scoring). All functions are pure and deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateInputError, SampleSizeError, ShapeMismatchError

UNIT_INTERVAL = "unit_interval"
RAW = "raw_needs_normalization"
PER_VIDEO = "per_video"
PER_MODEL = "per_model_corpus"

# guard for 1/x inversions so exact-match inputs land on the top of the scale
_INV_EPS = 1e-8
# mask / division guards for depth comparison
_DEPTH_MIN_VALID = 1e-3
_DEPTH_EPS = 1e-6
# frames uniformly sampled per video for depth comparison
_DEPTH_TARGET_FRAMES = 40

JEPA_ALPHA = 40.0


@dataclass(frozen=True)
class RawMetricValue:
    """One metric outcome before per-model aggregation."""

    metric_id: str
    value: float
    scale: str = UNIT_INTERVAL
    granularity: str = PER_VIDEO

    def __post_init__(self):
        if self.scale == UNIT_INTERVAL and not -1e-12 <= self.value <= 1.0 + 1e-12:
            raise ValueError(f"{self.metric_id}: unit-interval value {self.value} out of range")


@dataclass(frozen=True)
class DynamicPenaltyConfig:
    """Sigmoid steepness and static-clip penalty threshold."""

    gamma: float = 0.3
    alpha_dyn: float = 10.0

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0,1], got {self.gamma}")
        if self.alpha_dyn <= 0.0:
            raise ValueError(f"alpha_dyn must be > 0, got {self.alpha_dyn}")


@dataclass(frozen=True)
class MetricInfo:
    scale: str
    granularity: str
    dimension: str
    requires: tuple[str, ...]
    needs_ref: bool = False


# Canonical metric ids in report/column order.
METRIC_IDS = (
    "image_quality",
    "aesthetic_quality",
    "jepa_similarity",
    "dynamic_degree",
    "flow_score",
    "motion_smoothness",
    "subject_consistency",
    "background_consistency",
    "photometric_consistency",
    "interaction_quality",
    "trajectory_accuracy",
    "depth_accuracy",
    "perspectivity",
    "instruction_following",
    "semantic_alignment",
    "action_following",
)

METRIC_INFO = {
    "image_quality": MetricInfo(UNIT_INTERVAL, PER_VIDEO, "visual_quality", ("frame_scores",)),
    "aesthetic_quality": MetricInfo(UNIT_INTERVAL, PER_VIDEO, "visual_quality", ("frame_scores",)),
    "jepa_similarity": MetricInfo(
        UNIT_INTERVAL, PER_MODEL, "visual_quality", ("st_embedding",), needs_ref=True
    ),
    "dynamic_degree": MetricInfo(UNIT_INTERVAL, PER_VIDEO, "motion_quality", ("flow_fwd",)),
    "flow_score": MetricInfo(RAW, PER_VIDEO, "motion_quality", ("flow_fwd",)),
    "motion_smoothness": MetricInfo(RAW, PER_VIDEO, "motion_quality", ("frames", "interp")),
    "subject_consistency": MetricInfo(
        UNIT_INTERVAL, PER_VIDEO, "content_consistency", ("appearance_track", "flow_fwd")
    ),
    "background_consistency": MetricInfo(
        UNIT_INTERVAL, PER_VIDEO, "content_consistency", ("scene_track", "flow_fwd")
    ),
    "photometric_consistency": MetricInfo(
        RAW, PER_VIDEO, "content_consistency", ("frames", "flow_fwd", "flow_bwd")
    ),
    "interaction_quality": MetricInfo(UNIT_INTERVAL, PER_VIDEO, "physics_adherence", ("judge",)),
    "trajectory_accuracy": MetricInfo(
        RAW, PER_VIDEO, "physics_adherence", ("detections",), needs_ref=True
    ),
    "depth_accuracy": MetricInfo(RAW, PER_VIDEO, "three_d_accuracy", ("depth",), needs_ref=True),
    "perspectivity": MetricInfo(UNIT_INTERVAL, PER_VIDEO, "three_d_accuracy", ("judge",)),
    "instruction_following": MetricInfo(UNIT_INTERVAL, PER_VIDEO, "controllability", ("judge",)),
    "semantic_alignment": MetricInfo(
        UNIT_INTERVAL, PER_VIDEO, "controllability", ("desc_embedding",), needs_ref=True
    ),
    "action_following": MetricInfo(UNIT_INTERVAL, PER_MODEL, "controllability", ("scene_track",)),
}

# Radar axes: dimension -> member metrics, in canonical order.
DIMENSIONS = {
    "visual_quality": ("image_quality", "aesthetic_quality", "jepa_similarity"),
    "motion_quality": ("dynamic_degree", "flow_score", "motion_smoothness"),
    "content_consistency": (
        "subject_consistency",
        "background_consistency",
        "photometric_consistency",
    ),
    "physics_adherence": ("interaction_quality", "trajectory_accuracy"),
    "three_d_accuracy": ("depth_accuracy", "perspectivity"),
    "controllability": ("instruction_following", "semantic_alignment", "action_following"),
}


def _unit(metric_id: str, value: float, granularity: str = PER_VIDEO) -> RawMetricValue:
    return RawMetricValue(metric_id, float(np.clip(value, 0.0, 1.0)), UNIT_INTERVAL, granularity)


def _to_gray01(frame: np.ndarray) -> np.ndarray:
    """Luma conversion of an HxWx3 frame on the 0-255 scale to [0, 1]."""
    f = np.asarray(frame, dtype=np.float64)
    if f.ndim == 3:
        f = 0.299 * f[..., 0] + 0.587 * f[..., 1] + 0.114 * f[..., 2]
    return f / 255.0


# ---------------------------------------------------------------------------
# visual quality


def image_quality(frame_scores: np.ndarray) -> RawMetricValue:
    """Mean per-frame quality-predictor score, mapped from 0-100 to [0, 1]."""
    scores = np.asarray(frame_scores, dtype=np.float64).ravel()
    if scores.size == 0:
        raise DegenerateInputError("image_quality: empty score vector")
    return _unit("image_quality", scores.mean() / 100.0)


def aesthetic_quality(frame_scores: np.ndarray) -> RawMetricValue:
    """Mean per-frame aesthetic-predictor score, mapped from 0-10 to [0, 1]."""
    scores = np.asarray(frame_scores, dtype=np.float64).ravel()
    if scores.size == 0:
        raise DegenerateInputError("aesthetic_quality: empty score vector")
    return _unit("aesthetic_quality", scores.mean() / 10.0)


def jepa_similarity(gen_embeddings: np.ndarray, ref_embeddings: np.ndarray) -> RawMetricValue:
    """exp(-40 * MMD^2) between generated and reference embedding sets.

    The unbiased estimator can be negative; it is clamped at 0 before the
    exponential so the score stays in (0, 1].
    """
    mmd2 = kernels.mmd2_poly_unbiased(gen_embeddings, ref_embeddings)
    value = math.exp(-JEPA_ALPHA * max(0.0, mmd2))
    return RawMetricValue("jepa_similarity", value, UNIT_INTERVAL, PER_MODEL)


# ---------------------------------------------------------------------------
# motion quality


def _top_fraction_mean(magnitudes: np.ndarray, fraction: float = 0.05) -> float:
    flat = magnitudes.ravel()
    k = max(1, int(math.ceil(fraction * flat.size)))
    top = np.partition(flat, flat.size - k)[flat.size - k :]
    return float(top.mean())


def motion_threshold(height: int, width: int) -> float:
    """Resolution-adaptive motion threshold tau = 6/256 * min(H, W)."""
    return 6.0 / 256.0 * min(height, width)


def dynamic_degree(
    flow_fwd: np.ndarray, height: int, width: int, cfg: DynamicPenaltyConfig = DynamicPenaltyConfig()
) -> RawMetricValue:
    """Sigmoid-mapped mean magnitude of the top-5% flow pixels.

    Pixels pool per frame; the per-frame top-5% means average over time
    before the logistic mapping against tau = 6/256 * min(H, W).
    """
    flow = np.asarray(flow_fwd, dtype=np.float64)
    if flow.size == 0:
        raise DegenerateInputError("dynamic_degree: empty flow")
    mags = np.linalg.norm(flow, axis=-1)  # (T-1, H, W)
    per_frame = [_top_fraction_mean(m) for m in mags]
    v_bar = float(np.mean(per_frame))
    tau = motion_threshold(height, width)
    return _unit("dynamic_degree", kernels.logistic(v_bar, cfg.alpha_dyn, tau))


def flow_score(flow_fwd: np.ndarray) -> RawMetricValue:
    """Mean optical-flow magnitude over all pixels and frames (raw scale)."""
    flow = np.asarray(flow_fwd, dtype=np.float64)
    if flow.size == 0:
        raise DegenerateInputError("flow_score: empty flow")
    mags = np.linalg.norm(flow, axis=-1)
    per_frame = mags.reshape(mags.shape[0], -1).mean(axis=1)
    return RawMetricValue("flow_score", float(per_frame.mean()), RAW, PER_VIDEO)


def motion_smoothness(frames: np.ndarray, interpolated: np.ndarray) -> RawMetricValue:
    """Interpolation-reconstruction score weighted by motion magnitude.

    Frames at even indices (0-based) anchor each triplet; the extractor's
    predicted mid-frames are compared to the real odd-index frames with
    SSIM, weighted by ln(1 + mean |I_prev - I_next|) on the 0-255 scale so
    static clips earn nothing and fast faithful motion earns most.
    """
    frames = np.asarray(frames)
    interpolated = np.asarray(interpolated)
    t = frames.shape[0]
    n_mid = (t - 1) // 2
    if n_mid < 1:
        raise DegenerateInputError("motion_smoothness: need at least 3 frames")
    if interpolated.shape[0] != n_mid:
        raise ShapeMismatchError(
            f"motion_smoothness: {interpolated.shape[0]} predicted frames for {n_mid} mid-frames"
        )
    total = 0.0
    for k in range(n_mid):
        prev = np.asarray(frames[2 * k], dtype=np.float64)
        mid = frames[2 * k + 1]
        nxt = np.asarray(frames[2 * k + 2], dtype=np.float64)
        sim = kernels.ssim(_to_gray01(interpolated[k]), _to_gray01(mid))
        diff = float(np.abs(prev - nxt).mean())
        total += sim * math.log1p(diff)
    return RawMetricValue("motion_smoothness", total / n_mid, RAW, PER_VIDEO)


# ---------------------------------------------------------------------------
# content consistency


def _track_consistency(metric_id: str, track: np.ndarray, s_dyn: float, gamma: float) -> RawMetricValue:
    track = np.asarray(track, dtype=np.float64)
    t = track.shape[0]
    if t < 2:
        raise DegenerateInputError(f"{metric_id}: need >= 2 frames, got {t}")
    first = track[0]
    sims = []
    for i in range(1, t):
        to_first = max(0.0, kernels.cosine(track[i], first))
        to_prev = max(0.0, kernels.cosine(track[i], track[i - 1]))
        sims.append(0.5 * (to_first + to_prev))
    raw = float(np.mean(sims))
    return _unit(metric_id, raw * min(1.0, s_dyn / gamma))


def subject_consistency(
    track: np.ndarray, s_dyn: float, cfg: DynamicPenaltyConfig = DynamicPenaltyConfig()
) -> RawMetricValue:
    """Frame-feature similarity to the first and previous frame, averaged.

    Negative cosines clamp to 0; near-static clips are penalized by
    min(1, s_dyn / gamma).
    """
    return _track_consistency("subject_consistency", track, s_dyn, cfg.gamma)


def background_consistency(
    track: np.ndarray, s_dyn: float, cfg: DynamicPenaltyConfig = DynamicPenaltyConfig()
) -> RawMetricValue:
    """Scene-feature analogue of subject_consistency."""
    return _track_consistency("background_consistency", track, s_dyn, cfg.gamma)


def photometric_consistency(
    frames: np.ndarray,
    flow_fwd: np.ndarray,
    flow_bwd: np.ndarray,
    s_dyn: float,
    cfg: DynamicPenaltyConfig = DynamicPenaltyConfig(),
) -> RawMetricValue:
    """Inverse round-trip warp residual, gated by the dynamic penalty.

    Each frame warps forward with u_t then back with u'_{t+1}; the residual
    is the mean per-pixel Euclidean RGB distance on [0, 1] frames.
    """
    frames = np.asarray(frames, dtype=np.float64) / 255.0
    flow_fwd = np.asarray(flow_fwd, dtype=np.float64)
    flow_bwd = np.asarray(flow_bwd, dtype=np.float64)
    t = frames.shape[0]
    if t < 2:
        raise DegenerateInputError("photometric_consistency: need >= 2 frames")
    if flow_fwd.shape[0] != t - 1 or flow_bwd.shape[0] != t - 1:
        raise ShapeMismatchError("photometric_consistency: flow length must be T-1")
    errors = []
    for i in range(t - 1):
        rt = kernels.warp(kernels.warp(frames[i], flow_fwd[i]), flow_bwd[i])
        residual = np.linalg.norm(rt - frames[i], axis=-1)
        errors.append(residual.mean())
    e_photo = float(np.mean(errors))
    raw = (1.0 / max(e_photo, _INV_EPS)) * min(1.0, s_dyn / cfg.gamma)
    return RawMetricValue("photometric_consistency", raw, RAW, PER_VIDEO)


# ---------------------------------------------------------------------------
# physics adherence


def track_centers(detections: list[list[dict]]) -> np.ndarray:
    """Per-frame center of the highest-confidence box, gaps interpolated.

    ``detections`` is one list per frame of {"box": [x0, y0, x1, y1],
    "conf": float}. Interior gaps are linearly interpolated; leading and
    trailing gaps copy the nearest valid center. Raises if no frame has a
    detection.
    """
    t = len(detections)
    centers = np.full((t, 2), np.nan)
    for i, boxes in enumerate(detections):
        if not boxes:
            continue
        best = max(boxes, key=lambda b: b["conf"])
        x0, y0, x1, y1 = best["box"]
        centers[i] = (0.5 * (x0 + x1), 0.5 * (y0 + y1))
    valid = np.where(~np.isnan(centers[:, 0]))[0]
    if valid.size == 0:
        raise DegenerateInputError("trajectory: no valid detections in track")
    for axis in range(2):
        centers[:, axis] = np.interp(np.arange(t), valid, centers[valid, axis])
    return centers


def trajectory_accuracy(gt_track: list[list[dict]], gen_track: list[list[dict]]) -> RawMetricValue:
    """Inverse length-normalized DTW distance between arm-center tracks."""
    gt = track_centers(gt_track)
    gen = track_centers(gen_track)
    cost, _ = kernels.dtw_min_cost(gt, gen)
    ndtw = cost / len(gt)
    raw = 1.0 / max(ndtw, _INV_EPS)
    return RawMetricValue("trajectory_accuracy", raw, RAW, PER_VIDEO)


def depth_accuracy(gen_depth: np.ndarray, gt_depth: np.ndarray) -> RawMetricValue:
    """Median-scaled absolute relative depth error (raw, lower is better).

    Up to 40 frames are uniformly sampled from each stack and paired in
    order; per pair the generated depth is rescaled by the ratio of
    medians, and the error averages |scaled - gt| / (gt + eps) over pixels
    with gt depth >= 1e-3.
    """
    gen_depth = np.asarray(gen_depth, dtype=np.float64)
    gt_depth = np.asarray(gt_depth, dtype=np.float64)
    if gen_depth.ndim == 2:
        gen_depth = gen_depth[None]
    if gt_depth.ndim == 2:
        gt_depth = gt_depth[None]
    if gen_depth.shape[0] == 0 or gt_depth.shape[0] == 0:
        raise DegenerateInputError("depth_accuracy: empty depth stack")

    n = min(gen_depth.shape[0], gt_depth.shape[0], _DEPTH_TARGET_FRAMES)
    gen_idx = np.linspace(0, gen_depth.shape[0] - 1, n).round().astype(int)
    gt_idx = np.linspace(0, gt_depth.shape[0] - 1, n).round().astype(int)

    frame_errors = []
    for gi, ti in zip(gen_idx, gt_idx):
        gen_f = gen_depth[gi]
        gt_f = gt_depth[ti]
        mask = gt_f >= _DEPTH_MIN_VALID
        if not mask.any():
            continue
        m_gen = np.median(gen_f)
        if m_gen == 0.0:
            continue
        alpha = np.median(gt_f) / m_gen
        err = np.abs(alpha * gen_f[mask] - gt_f[mask]) / (gt_f[mask] + _DEPTH_EPS)
        frame_errors.append(float(err.mean()))
    if not frame_errors:
        raise DegenerateInputError("depth_accuracy: no frame with a valid depth mask")
    return RawMetricValue("depth_accuracy", float(np.mean(frame_errors)), RAW, PER_VIDEO)


# ---------------------------------------------------------------------------
# controllability


def semantic_alignment(f_gen: np.ndarray, f_gt: np.ndarray, w: float = 1.0) -> RawMetricValue:
    """w * max(cos(f_gen, f_gt), 0) between description embeddings."""
    value = w * max(0.0, kernels.cosine(f_gen, f_gt))
    return _unit("semantic_alignment", value)


def action_following(variant_embeddings: np.ndarray) -> RawMetricValue:
    """Mean pairwise feature dissimilarity across instruction variants.

    Cosines clamp at 0 before the (1 - cos) dissimilarity so the score
    stays in [0, 1]; identical videos score 0, orthogonal ones 1.
    """
    emb = np.atleast_2d(np.asarray(variant_embeddings, dtype=np.float64))
    n = emb.shape[0]
    if n < 2:
        raise SampleSizeError(f"action_following: need >= 2 variants, got {n}")
    dissims = []
    for i in range(n):
        for j in range(i + 1, n):
            dissims.append(1.0 - max(0.0, kernels.cosine(emb[i], emb[j])))
    return _unit("action_following", float(np.mean(dissims)), PER_MODEL)


def likert_to_unit(metric_id: str, score: int) -> RawMetricValue:
    """Map an integer 1-5 judge score to [0, 1] via (s - 1) / 4."""
    if not isinstance(score, int) or isinstance(score, bool) or not 1 <= score <= 5:
        raise ValueError(f"{metric_id}: judge score must be an integer in [1,5], got {score!r}")
    return _unit(metric_id, (score - 1) / 4.0)


def interaction_quality(score: int) -> RawMetricValue:
    return likert_to_unit("interaction_quality", score)


def perspectivity(score: int) -> RawMetricValue:
    return likert_to_unit("perspectivity", score)


def instruction_following(score: int) -> RawMetricValue:
    return likert_to_unit("instruction_following", score)
