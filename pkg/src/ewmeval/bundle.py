"""On-disk evaluation bundles: manifests, artifact loading, validation.

A bundle root holds ``index.json`` ({"videos": [manifest paths]}) plus one
JSON manifest per video. Manifests reference tensor files (relative to the
root) for dense artifacts and JSON files for detections and judge
verdicts. Partial bundles are legal: metrics degrade independently instead
of failing the whole run.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ManifestError, ShapeMismatchError
from .metrics import METRIC_IDS, METRIC_INFO
from .tensorio import read_tensor, read_tensor_header

GENERATED = "generated"
GROUND_TRUTH = "ground_truth"

# artifact kind -> manifest key (all tensor-backed kinds)
TENSOR_KINDS = (
    "flow_fwd",
    "flow_bwd",
    "depth",
    "appearance_track",
    "scene_track",
    "st_embedding",
    "frame_scores",
    "desc_embedding",
    "interp",
)
JSON_KINDS = ("detections", "judge")
ALL_KINDS = ("frames",) + TENSOR_KINDS + JSON_KINDS

_MIN_SIDE = 16


@dataclass
class VideoManifest:
    video_id: str
    model_id: str
    task_id: str
    instruction: str
    role: str
    frame_count: int
    height: int
    width: int
    frames_path: str | None
    artifact_paths: dict = field(default_factory=dict)  # kind -> relative path
    gt_ref: str | None = None

    @classmethod
    def from_dict(cls, obj: dict, source: str = "<manifest>") -> "VideoManifest":
        try:
            frames = obj["frames"]
            manifest = cls(
                video_id=obj["video_id"],
                model_id=obj["model_id"],
                task_id=obj["task_id"],
                instruction=obj["instruction"],
                role=obj["role"],
                frame_count=int(frames["T"]),
                height=int(frames["H"]),
                width=int(frames["W"]),
                frames_path=frames.get("path"),
                artifact_paths={k: obj[k] for k in TENSOR_KINDS + JSON_KINDS if obj.get(k)},
                gt_ref=obj.get("gt_ref"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"{source}: {exc}") from exc
        manifest.validate(source)
        return manifest

    def validate(self, source: str = "<manifest>") -> None:
        if self.role not in (GENERATED, GROUND_TRUTH):
            raise ManifestError(f"{source}: role must be generated|ground_truth, got {self.role!r}")
        if self.frame_count < 2:
            raise ManifestError(f"{source}: frame count T must be >= 2, got {self.frame_count}")
        if self.height < _MIN_SIDE or self.width < _MIN_SIDE:
            raise ManifestError(
                f"{source}: H,W must be >= {_MIN_SIDE}, got {self.height}x{self.width}"
            )

    def to_dict(self) -> dict:
        obj = {
            "video_id": self.video_id,
            "model_id": self.model_id,
            "task_id": self.task_id,
            "instruction": self.instruction,
            "role": self.role,
            "frames": {
                "path": self.frames_path,
                "T": self.frame_count,
                "H": self.height,
                "W": self.width,
            },
            "gt_ref": self.gt_ref,
        }
        for kind in TENSOR_KINDS + JSON_KINDS:
            obj[kind] = self.artifact_paths.get(kind)
        return obj


def _expected_shape(kind: str, m: VideoManifest) -> tuple | None:
    """Shape template for a tensor artifact; None entries are free dims."""
    t, h, w = m.frame_count, m.height, m.width
    return {
        "frames": (t, h, w, 3),
        "flow_fwd": (t - 1, h, w, 2),
        "flow_bwd": (t - 1, h, w, 2),
        "depth": (None, h, w),
        "appearance_track": (t, None),
        "scene_track": (t, None),
        "st_embedding": (1, None),
        "frame_scores": (t, 2),
        "desc_embedding": (1, None),
        "interp": ((t - 1) // 2, h, w, 3),
    }.get(kind)


def _check_shape(kind: str, shape: tuple, m: VideoManifest) -> None:
    expected = _expected_shape(kind, m)
    if expected is None:
        return
    ok = len(shape) == len(expected) and all(
        e is None or e == s for e, s in zip(expected, shape)
    )
    if not ok:
        raise ShapeMismatchError(
            f"{m.video_id}/{kind}: shape {shape} does not match expected {expected}"
        )


class VideoRecord:
    """One video's manifest plus lazily loaded artifacts.

    Tensor headers are verified against the manifest at load_bundle time;
    payloads load on first access and are cached. Read-only after load.
    """

    def __init__(self, root: Path, manifest: VideoManifest):
        self.root = Path(root)
        self.manifest = manifest
        self._cache: dict[str, object] = {}

    def _path(self, kind: str) -> Path | None:
        rel = self.manifest.frames_path if kind == "frames" else self.manifest.artifact_paths.get(kind)
        return self.root / rel if rel else None

    def has(self, kind: str) -> bool:
        path = self._path(kind)
        return path is not None and path.exists()

    def check_shapes(self) -> None:
        """Header-only verification of every referenced tensor artifact."""
        for kind in ("frames",) + TENSOR_KINDS:
            path = self._path(kind)
            if path is None:
                continue
            if not path.exists():
                raise ManifestError(f"{self.manifest.video_id}: missing file {path}")
            _, dims = read_tensor_header(path)
            _check_shape(kind, tuple(dims), self.manifest)

    def tensor(self, kind: str) -> np.ndarray:
        if kind not in self._cache:
            path = self._path(kind)
            if path is None or not path.exists():
                raise ManifestError(f"{self.manifest.video_id}: no {kind} artifact")
            arr = read_tensor(path)
            _check_shape(kind, arr.shape, self.manifest)
            self._cache[kind] = arr
        return self._cache[kind]  # type: ignore[return-value]

    def detections(self) -> list:
        if "detections" not in self._cache:
            path = self._path("detections")
            if path is None or not path.exists():
                raise ManifestError(f"{self.manifest.video_id}: no detections artifact")
            with open(path, encoding="utf-8") as fh:
                dets = json.load(fh)
            if len(dets) != self.manifest.frame_count:
                raise ShapeMismatchError(
                    f"{self.manifest.video_id}/detections: {len(dets)} frames, expected "
                    f"{self.manifest.frame_count}"
                )
            self._cache["detections"] = dets
        return self._cache["detections"]  # type: ignore[return-value]

    def judge_record(self) -> dict:
        path = self._path("judge")
        if path is None or not path.exists():
            raise ManifestError(f"{self.manifest.video_id}: no judge artifact")
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)

    def judge_path(self) -> Path:
        """Where this video's verdict is (or will be) persisted."""
        path = self._path("judge")
        if path is not None:
            return path
        return self.root / "judge" / f"{self.manifest.video_id}.json"


@dataclass
class EvaluationBundle:
    root: Path
    videos: dict[str, VideoRecord]  # video_id -> record, insertion-sorted by id

    def by_role(self, role: str) -> list[VideoRecord]:
        return [v for v in self.videos.values() if v.manifest.role == role]

    def models(self) -> list[str]:
        return sorted({v.manifest.model_id for v in self.by_role(GENERATED)})

    def model_videos(self, model_id: str) -> list[VideoRecord]:
        return [
            v
            for v in self.videos.values()
            if v.manifest.role == GENERATED and v.manifest.model_id == model_id
        ]

    def gt_for(self, record: VideoRecord) -> VideoRecord | None:
        ref = record.manifest.gt_ref
        if ref is None:
            return None
        return self.videos.get(ref)

    def variant_groups(self, model_id: str) -> list[list[VideoRecord]]:
        """Same-task groups of generated videos with distinct instructions."""
        by_task: dict[str, list[VideoRecord]] = {}
        for rec in self.model_videos(model_id):
            by_task.setdefault(rec.manifest.task_id, []).append(rec)
        groups = []
        for task_id in sorted(by_task):
            recs = sorted(by_task[task_id], key=lambda r: r.manifest.video_id)
            if len({r.manifest.instruction for r in recs}) >= 2:
                groups.append(recs)
        return groups


def load_bundle(root: str | os.PathLike) -> EvaluationBundle:
    """Parse all manifests under ``root`` and header-check every tensor.

    Shape mismatches are hard errors; missing optional artifacts are not
    (they surface per metric in validate_bundle).
    """
    root = Path(root)
    index_path = root / "index.json"
    if not index_path.exists():
        raise ManifestError(f"{root}: no index.json")
    with open(index_path, encoding="utf-8") as fh:
        index = json.load(fh)
    videos: dict[str, VideoRecord] = {}
    for rel in index.get("videos", []):
        mpath = root / rel
        with open(mpath, encoding="utf-8") as fh:
            manifest = VideoManifest.from_dict(json.load(fh), source=str(mpath))
        if manifest.video_id in videos:
            raise ManifestError(f"duplicate video_id {manifest.video_id}")
        record = VideoRecord(root, manifest)
        record.check_shapes()
        videos[manifest.video_id] = record
    ordered = {vid: videos[vid] for vid in sorted(videos)}
    return EvaluationBundle(root=root, videos=ordered)


@dataclass
class ValidationReport:
    """Per-video, per-metric readiness; pure function of the bundle."""

    per_video: dict  # video_id -> metric_id -> {"ready": bool, "missing": [...]}
    per_model: dict  # model_id -> corpus-level notes

    def ready(self, video_id: str, metric_id: str) -> bool:
        return self.per_video.get(video_id, {}).get(metric_id, {}).get("ready", False)

    def all_ready(self, metric_ids=METRIC_IDS) -> bool:
        for entry in self.per_video.values():
            for mid in metric_ids:
                if not entry[mid]["ready"]:
                    return False
        for notes in self.per_model.values():
            for mid in metric_ids:
                if mid in notes and notes[mid] is not None:
                    return False
        return True

    def gaps(self, metric_ids=METRIC_IDS) -> list[tuple[str, str, str]]:
        """(video_id|model_id, metric_id, reason) triples for every gap."""
        out = []
        for vid in sorted(self.per_video):
            for mid in metric_ids:
                entry = self.per_video[vid][mid]
                if not entry["ready"]:
                    out.append((vid, mid, "missing: " + ", ".join(entry["missing"])))
        for model in sorted(self.per_model):
            for mid in metric_ids:
                reason = self.per_model[model].get(mid)
                if reason:
                    out.append((model, mid, reason))
        return out

    def to_dict(self) -> dict:
        return {"per_video": self.per_video, "per_model": self.per_model}


def validate_bundle(bundle: EvaluationBundle) -> ValidationReport:
    """Check, per generated video and metric, whether prerequisites hold."""
    per_video: dict[str, dict] = {}
    for vid, rec in bundle.videos.items():
        if rec.manifest.role != GENERATED:
            continue
        gt = bundle.gt_for(rec)
        entry: dict[str, dict] = {}
        for mid in METRIC_IDS:
            info = METRIC_INFO[mid]
            missing = [kind for kind in info.requires if not rec.has(kind)]
            if info.needs_ref:
                if gt is None:
                    missing.append("gt_ref")
                else:
                    missing.extend(
                        f"gt:{kind}" for kind in info.requires if not gt.has(kind)
                    )
            entry[mid] = {"ready": not missing, "missing": missing}
        per_video[vid] = entry

    per_model: dict[str, dict] = {}
    gt_embeddings = sum(1 for r in bundle.by_role(GROUND_TRUTH) if r.has("st_embedding"))
    for model in bundle.models():
        recs = bundle.model_videos(model)
        notes: dict[str, str | None] = {}
        n_emb = sum(1 for r in recs if r.has("st_embedding"))
        if n_emb < 2 or gt_embeddings < 2:
            notes["jepa_similarity"] = (
                f"needs >=2 embeddings per side (model has {n_emb}, reference has {gt_embeddings})"
            )
        groups = [g for g in bundle.variant_groups(model) if all(r.has("scene_track") for r in g)]
        if not groups:
            notes["action_following"] = "no instruction-variant group with scene features"
        per_model[model] = notes
    return ValidationReport(per_video=per_video, per_model=per_model)
