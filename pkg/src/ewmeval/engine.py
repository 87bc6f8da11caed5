"""End-to-end evaluation runs: per-video metrics, judging, aggregation.

Videos evaluate independently (optionally in parallel); reductions iterate
in sorted video_id order so the parallelism level never changes results.
Per-video results persist before aggregation, keyed by a config digest, so
partial runs resume without recomputation.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import judge as judge_mod
from . import metrics as m
from .bundle import EvaluationBundle, ValidationReport, VideoRecord, validate_bundle
from .errors import EvalError, IncompleteVectorError, ProtocolError, TransportError
from .metrics import METRIC_IDS, METRIC_INFO, PER_MODEL, DynamicPenaltyConfig
from .scoring import BoundsTable, MetricVector, assemble_metric_vector, ewm_score, normalize_raw

JUDGE_LIVE = "live"
JUDGE_REPLAY = "replay"
JUDGE_SKIP = "skip"

_JUDGE_METRICS = ("interaction_quality", "perspectivity", "instruction_following")


@dataclass
class RunConfig:
    """Everything that can influence an evaluation run's numbers."""

    bundle_root: str
    output_dir: str
    models: tuple[str, ...] = ()  # empty = all
    metric_subset: tuple[str, ...] = ()  # empty = all 16
    gamma: float = 0.3
    alpha_dyn: float = 10.0
    semantic_w: float = 1.0
    bounds_path: str | None = None
    judge_mode: str = JUDGE_REPLAY
    judge_endpoint: str | None = None
    judge_model: str | None = None
    parallelism: int = 1
    seed: int = 0
    strict_judge_parse: bool = False

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0,1], got {self.gamma}")
        if self.alpha_dyn <= 0:
            raise ValueError(f"alpha_dyn must be > 0, got {self.alpha_dyn}")
        if self.parallelism < 1:
            raise ValueError(f"parallelism must be >= 1, got {self.parallelism}")
        if self.judge_mode not in (JUDGE_LIVE, JUDGE_REPLAY, JUDGE_SKIP):
            raise ValueError(f"judge mode must be live|replay|skip, got {self.judge_mode!r}")
        bad = [mid for mid in self.metric_subset if mid not in METRIC_IDS]
        if bad:
            raise ValueError(f"unknown metric ids: {bad}")

    @property
    def metrics(self) -> tuple[str, ...]:
        return self.metric_subset or METRIC_IDS

    def penalty(self) -> DynamicPenaltyConfig:
        return DynamicPenaltyConfig(gamma=self.gamma, alpha_dyn=self.alpha_dyn)

    def snapshot(self, bounds_version: str) -> dict:
        """The value-affecting part of the config, embedded in outputs."""
        return {
            "gamma": self.gamma,
            "alpha_dyn": self.alpha_dyn,
            "w": self.semantic_w,
            "bounds_version": bounds_version,
            "metrics": sorted(self.metrics),
            "judge_mode": self.judge_mode,
            "seed": self.seed,
        }

    def digest(self, bounds_version: str) -> str:
        payload = json.dumps(self.snapshot(bounds_version), sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def dump_json(obj, path: Path) -> None:
    """Byte-stable JSON writing used for every persisted document."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _raw_record(value: m.RawMetricValue, normalized: float) -> dict:
    return {
        "raw": value.value,
        "normalized": normalized,
        "scale": value.scale,
        "granularity": value.granularity,
    }


def _quality_verdict_for(
    rec: VideoRecord, config: RunConfig
) -> tuple[judge_mod.JudgeVerdict | None, str | None]:
    """Obtain a quality verdict per the judge mode; (verdict, gap reason)."""
    if config.judge_mode == JUDGE_SKIP:
        return None, "judge skipped by configuration"
    if config.judge_mode == JUDGE_REPLAY:
        if not rec.has("judge"):
            return None, "no persisted judge verdict for replay"
        try:
            verdict = judge_mod.verdict_from_record(rec.judge_record())
        except EvalError as exc:
            return None, f"persisted verdict invalid: {exc}"
        if verdict.kind != judge_mod.QUALITY:
            return None, f"persisted verdict is {verdict.kind}, quality needed"
        return verdict, None
    # live
    endpoint = config.judge_endpoint or os.environ.get("JUDGE_ENDPOINT")
    model_name = config.judge_model or os.environ.get("JUDGE_MODEL", "judge")
    if not endpoint:
        return None, "live judging requested but no endpoint configured"
    if not rec.has("frames"):
        return None, "live judging needs frames"
    req = judge_mod.build_quality_request(
        endpoint, model_name, rec.tensor("frames"), rec.manifest.instruction
    )
    try:
        raw = judge_mod.invoke_judge(req)
        verdict = judge_mod.parse_quality_verdict(raw, strict=config.strict_judge_parse)
    except (TransportError, ProtocolError) as exc:
        return None, f"judge transport failed: {exc}"
    except EvalError as exc:
        return None, f"judge response unusable: {exc}"
    record = judge_mod.verdict_to_record(verdict, req.digest())
    dump_json(record, rec.judge_path())
    return verdict, None


def evaluate_video(
    rec: VideoRecord,
    bundle: EvaluationBundle,
    report: ValidationReport,
    config: RunConfig,
    bounds: BoundsTable,
) -> dict:
    """All requested per-video metrics for one generated video.

    Returns {"video_id", "model_id", "metrics": {id: record}, "gaps":
    {id: reason}}. Artifact gaps and judge failures are soft: the video
    still contributes every metric it can.
    """
    manifest = rec.manifest
    penalty = config.penalty()
    out: dict[str, dict] = {}
    gaps: dict[str, str] = {}

    requested = [
        mid
        for mid in config.metrics
        if METRIC_INFO[mid].granularity != PER_MODEL
    ]

    def ready(mid: str) -> bool:
        entry = report.per_video[manifest.video_id][mid]
        if not entry["ready"]:
            gaps[mid] = "missing: " + ", ".join(entry["missing"])
            return False
        return True

    s_dyn_value: float | None = None

    def s_dyn() -> float:
        nonlocal s_dyn_value
        if s_dyn_value is None:
            s_dyn_value = m.dynamic_degree(
                rec.tensor("flow_fwd"), manifest.height, manifest.width, penalty
            ).value
        return s_dyn_value

    gt = bundle.gt_for(rec)

    verdict: judge_mod.JudgeVerdict | None = None
    verdict_gap: str | None = None
    if any(mid in requested for mid in _JUDGE_METRICS):
        verdict, verdict_gap = _quality_verdict_for(rec, config)

    for mid in requested:
        if mid in _JUDGE_METRICS:
            if verdict is None:
                gaps[mid] = verdict_gap or "no judge verdict"
                continue
            dim = {
                "interaction_quality": "Interaction_Quality",
                "perspectivity": "Perspectivity",
                "instruction_following": "Instruction_Following",
            }[mid]
            value = m.likert_to_unit(mid, verdict.scores[dim]["score"])
            out[mid] = _raw_record(value, value.value)
            continue
        if not ready(mid):
            continue
        try:
            if mid == "image_quality":
                value = m.image_quality(rec.tensor("frame_scores")[:, 0])
            elif mid == "aesthetic_quality":
                value = m.aesthetic_quality(rec.tensor("frame_scores")[:, 1])
            elif mid == "dynamic_degree":
                value = m.dynamic_degree(
                    rec.tensor("flow_fwd"), manifest.height, manifest.width, penalty
                )
                s_dyn_value = value.value
            elif mid == "flow_score":
                value = m.flow_score(rec.tensor("flow_fwd"))
            elif mid == "motion_smoothness":
                value = m.motion_smoothness(rec.tensor("frames"), rec.tensor("interp"))
            elif mid == "subject_consistency":
                value = m.subject_consistency(rec.tensor("appearance_track"), s_dyn(), penalty)
            elif mid == "background_consistency":
                value = m.background_consistency(rec.tensor("scene_track"), s_dyn(), penalty)
            elif mid == "photometric_consistency":
                value = m.photometric_consistency(
                    rec.tensor("frames"),
                    rec.tensor("flow_fwd"),
                    rec.tensor("flow_bwd"),
                    s_dyn(),
                    penalty,
                )
            elif mid == "trajectory_accuracy":
                value = m.trajectory_accuracy(gt.detections(), rec.detections())
            elif mid == "depth_accuracy":
                value = m.depth_accuracy(rec.tensor("depth"), gt.tensor("depth"))
            elif mid == "semantic_alignment":
                value = m.semantic_alignment(
                    rec.tensor("desc_embedding")[0],
                    gt.tensor("desc_embedding")[0],
                    config.semantic_w,
                )
            else:  # pragma: no cover - registry and dispatch kept in sync
                raise AssertionError(mid)
        except EvalError as exc:
            gaps[mid] = str(exc)
            continue
        out[mid] = _raw_record(value, normalize_raw(value, bounds))

    return {
        "video_id": manifest.video_id,
        "model_id": manifest.model_id,
        "metrics": out,
        "gaps": gaps,
    }


def _scene_mean(rec: VideoRecord) -> np.ndarray:
    return np.asarray(rec.tensor("scene_track"), dtype=np.float64).mean(axis=0)


def corpus_metrics(
    bundle: EvaluationBundle, model_id: str, config: RunConfig, report: ValidationReport
) -> tuple[dict, dict]:
    """Per-model-corpus metrics; returns (records, gaps)."""
    out: dict[str, m.RawMetricValue] = {}
    gaps: dict[str, str] = {}
    notes = report.per_model.get(model_id, {})

    if "jepa_similarity" in config.metrics:
        reason = notes.get("jepa_similarity")
        if reason:
            gaps["jepa_similarity"] = reason
        else:
            gen = [
                rec.tensor("st_embedding")[0]
                for rec in bundle.model_videos(model_id)
                if rec.has("st_embedding")
            ]
            ref = [
                rec.tensor("st_embedding")[0]
                for rec in bundle.by_role("ground_truth")
                if rec.has("st_embedding")
            ]
            try:
                out["jepa_similarity"] = m.jepa_similarity(np.stack(gen), np.stack(ref))
            except EvalError as exc:
                gaps["jepa_similarity"] = str(exc)

    if "action_following" in config.metrics:
        reason = notes.get("action_following")
        if reason:
            gaps["action_following"] = reason
        else:
            group_scores = []
            for group in bundle.variant_groups(model_id):
                if not all(r.has("scene_track") for r in group):
                    continue
                embeddings = np.stack([_scene_mean(r) for r in group])
                try:
                    group_scores.append(m.action_following(embeddings).value)
                except EvalError as exc:
                    gaps["action_following"] = str(exc)
                    group_scores = []
                    break
            if group_scores:
                out["action_following"] = m.RawMetricValue(
                    "action_following",
                    float(np.mean(group_scores)),
                    m.UNIT_INTERVAL,
                    PER_MODEL,
                )
            elif "action_following" not in gaps:
                gaps["action_following"] = "no usable instruction-variant group"
    return out, gaps


@dataclass
class RunResult:
    per_video: dict  # model -> video_id -> result dict
    vectors: dict  # model -> MetricVector (only complete ones)
    gaps: list = field(default_factory=list)  # (scope, metric, reason)

    @property
    def has_gaps(self) -> bool:
        return bool(self.gaps)


def run_evaluation(config: RunConfig, bundle: EvaluationBundle, bounds: BoundsTable) -> RunResult:
    """Evaluate every requested model; persist per-video and vector files."""
    report = validate_bundle(bundle)
    out_dir = Path(config.output_dir)
    digest = config.digest(bounds.version)
    snapshot = config.snapshot(bounds.version)
    dump_json({"config": snapshot, "digest": digest}, out_dir / "config.json")

    models = list(config.models) or bundle.models()
    targets = []
    for model in models:
        targets.extend(bundle.model_videos(model))
    targets.sort(key=lambda r: r.manifest.video_id)

    def eval_one(rec: VideoRecord) -> dict:
        cache_path = out_dir / "per_video" / rec.manifest.model_id / f"{rec.manifest.video_id}.json"
        if cache_path.exists():
            with open(cache_path, encoding="utf-8") as fh:
                cached = json.load(fh)
            if cached.get("config_digest") == digest:
                return cached
        result = evaluate_video(rec, bundle, report, config, bounds)
        result["config_digest"] = digest
        dump_json(result, cache_path)
        return result

    if config.parallelism > 1 and len(targets) > 1:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            results = list(pool.map(eval_one, targets))
    else:
        results = [eval_one(rec) for rec in targets]

    per_video: dict[str, dict] = {}
    gaps: list[tuple[str, str, str]] = []
    for res in results:
        per_video.setdefault(res["model_id"], {})[res["video_id"]] = res
        for mid, reason in sorted(res["gaps"].items()):
            gaps.append((res["video_id"], mid, reason))

    vectors: dict[str, MetricVector] = {}
    for model in models:
        videos = per_video.get(model, {})
        raw_by_video = {
            vid: {
                mid: m.RawMetricValue(mid, rec["raw"], rec["scale"], rec["granularity"])
                for mid, rec in res["metrics"].items()
            }
            for vid, res in sorted(videos.items())
        }
        corpus, corpus_gaps = corpus_metrics(bundle, model, config, report)
        for mid, reason in sorted(corpus_gaps.items()):
            gaps.append((model, mid, reason))

        if set(config.metrics) == set(METRIC_IDS):
            try:
                vector = assemble_metric_vector(
                    model,
                    raw_by_video,
                    corpus,
                    bounds,
                    config={
                        "gamma": config.gamma,
                        "alpha_dyn": config.alpha_dyn,
                        "w": config.semantic_w,
                        "judge_mode": config.judge_mode,
                        "seed": config.seed,
                    },
                )
            except IncompleteVectorError as exc:
                gaps.append((model, "metric_vector", str(exc)))
            else:
                vectors[model] = vector
                doc = vector.to_dict()
                doc["ewm_score"] = ewm_score(vector)
                doc["config_digest"] = digest
                dump_json(doc, out_dir / "vectors" / f"{model}.json")
        else:
            # subset runs persist aggregates without claiming a full vector
            agg = {}
            for mid in config.metrics:
                if METRIC_INFO[mid].granularity == PER_MODEL:
                    if mid in corpus:
                        agg[mid] = corpus[mid].value
                    continue
                vals = [
                    normalize_raw(raw_by_video[vid][mid], bounds)
                    for vid in sorted(raw_by_video)
                    if mid in raw_by_video[vid]
                ]
                if vals:
                    agg[mid] = float(np.mean(vals))
            dump_json(
                {"model_id": model, "metrics": agg, "config_digest": digest},
                out_dir / "aggregates" / f"{model}.json",
            )
    return RunResult(per_video=per_video, vectors=vectors, gaps=gaps)
