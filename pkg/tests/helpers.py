"""Shared test utilities: synthetic bundle builders and slow oracles."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from ewmeval.tensorio import write_tensor

# boundary-bundle geometry: small enough to keep runs fast, big enough for
# the 11x11 SSIM window and the 16-pixel manifest minimum
FRAME_COUNT = 9
SIDE = 32


def dtw_brute_force(r, p) -> float:
    """Exhaustive enumeration of every monotone alignment path."""
    r = np.asarray(r, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    n, m = len(r), len(p)
    d2 = [[float(np.sum((r[i] - p[j]) ** 2)) for j in range(m)] for i in range(n)]
    best = math.inf

    stack = [(0, 0, d2[0][0])]
    while stack:
        i, j, acc = stack.pop()
        if i == n - 1 and j == m - 1:
            if acc < best:
                best = acc
            continue
        if i + 1 < n and j + 1 < m:
            stack.append((i + 1, j + 1, acc + d2[i + 1][j + 1]))
        if i + 1 < n:
            stack.append((i + 1, j, acc + d2[i + 1][j]))
        if j + 1 < m:
            stack.append((i, j + 1, acc + d2[i][j + 1]))
    return math.sqrt(best)


def write_json(obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def quality_verdict_record(interaction=5, perspectivity=5, instruction=5) -> dict:
    scores = {
        "Interaction_Quality": {"score": interaction, "reason": "test fixture"},
        "Perspectivity": {"score": perspectivity, "reason": "test fixture"},
        "Instruction_Following": {"score": instruction, "reason": "test fixture"},
    }
    raw = json.dumps(scores)
    return {
        "kind": "quality",
        "request_digest": "fixture",
        "raw_response": raw,
        "parsed": {"kind": "quality", "scores": scores},
    }


class BundleBuilder:
    """Programmatic bundle assembly for tests."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.manifest_paths: list[str] = []

    def add_video(
        self,
        video_id: str,
        model_id: str,
        task_id: str,
        instruction: str,
        role: str,
        arrays: dict,
        detections=None,
        judge_record=None,
        gt_ref=None,
        frame_count=FRAME_COUNT,
        side=SIDE,
        omit=(),
    ) -> None:
        """Write one video's artifacts plus manifest.

        ``arrays`` maps tensor kinds to ndarrays; ``omit`` names manifest
        keys to leave unset even if an array was supplied.
        """
        (self.root / "videos" / video_id).mkdir(parents=True, exist_ok=True)
        manifest = {
            "video_id": video_id,
            "model_id": model_id,
            "task_id": task_id,
            "instruction": instruction,
            "role": role,
            "frames": {"path": None, "T": frame_count, "H": side, "W": side},
            "gt_ref": gt_ref,
        }
        for kind in (
            "flow_fwd",
            "flow_bwd",
            "depth",
            "appearance_track",
            "scene_track",
            "st_embedding",
            "frame_scores",
            "desc_embedding",
            "interp",
        ):
            manifest[kind] = None
        manifest["detections"] = None
        manifest["judge"] = None

        for kind, arr in arrays.items():
            if kind in omit:
                continue
            rel = f"videos/{video_id}/{kind}.bin"
            write_tensor(arr, self.root / rel)
            if kind == "frames":
                manifest["frames"]["path"] = rel
            else:
                manifest[kind] = rel
        if detections is not None and "detections" not in omit:
            rel = f"videos/{video_id}/detections.json"
            write_json(detections, self.root / rel)
            manifest["detections"] = rel
        if judge_record is not None and "judge" not in omit:
            rel = f"videos/{video_id}/judge.json"
            write_json(judge_record, self.root / rel)
            manifest["judge"] = rel

        mpath = f"manifests/{video_id}.json"
        write_json(manifest, self.root / mpath)
        self.manifest_paths.append(mpath)

    def finish(self) -> Path:
        write_json({"videos": sorted(self.manifest_paths)}, self.root / "index.json")
        return self.root


def boundary_arrays(frame_count=FRAME_COUNT, side=SIDE, scene_vec=None, st_vec=None, desc_vec=None):
    """Artifact set that drives every metric to its best value.

    Frames are spatially constant with strictly increasing brightness so
    round-trip warping is exact (photometric error 0) while inter-frame
    differences keep the motion-smoothness weight well above its bound.
    Flow magnitude 10 saturates the dynamic-degree sigmoid at 1.0 and tops
    the flow-score bound.
    """
    t, s = frame_count, side
    frames = np.zeros((t, s, s, 3), dtype=np.uint8)
    for i in range(t):
        frames[i] = 10 * i
    n_mid = (t - 1) // 2
    interp = np.stack([frames[2 * k + 1] for k in range(n_mid)])

    flow = np.zeros((t - 1, s, s, 2), dtype=np.float32)
    flow[..., 0] = 10.0
    flow_bwd = -flow

    appearance = np.tile(np.array([1.0, 0.0, 0.0, 0.0], dtype=np.float32), (t, 1))
    if scene_vec is None:
        scene_vec = np.array([1.0, 0.0, 0.0, 0.0], dtype=np.float32)
    scene = np.tile(np.asarray(scene_vec, dtype=np.float32), (t, 1))

    if st_vec is None:
        st_vec = np.array([0.5, 0.5, 0.5, 0.5], dtype=np.float32)
    st = np.asarray(st_vec, dtype=np.float32)[None, :]

    frame_scores = np.zeros((t, 2), dtype=np.float32)
    frame_scores[:, 0] = 100.0
    frame_scores[:, 1] = 10.0

    if desc_vec is None:
        desc_vec = np.array([0.2, 0.4, 0.6], dtype=np.float32)
    desc = np.asarray(desc_vec, dtype=np.float32)[None, :]

    depth = np.full((t, s, s), 2.0, dtype=np.float32)

    return {
        "frames": frames,
        "interp": interp,
        "flow_fwd": flow,
        "flow_bwd": flow_bwd,
        "appearance_track": appearance,
        "scene_track": scene,
        "st_embedding": st,
        "frame_scores": frame_scores,
        "desc_embedding": desc,
        "depth": depth,
    }


def diagonal_detections(frame_count=FRAME_COUNT) -> list:
    out = []
    for i in range(frame_count):
        x = 2.0 + i
        out.append([{"box": [x, x, x + 4.0, x + 4.0], "conf": 0.9}])
    return out


def make_boundary_bundle(root: Path, model_id: str = "synthmodel") -> Path:
    """Ten generated videos (two 3-variant groups + four singles) plus GT.

    Crafted so every one of the 16 metrics lands exactly on its best
    value: the assembled vector is all ones and the composite score 100.
    """
    builder = BundleBuilder(root)
    st_shared = np.array([0.5, 0.5, 0.5, 0.5], dtype=np.float32)

    groups = {"taskA": 3, "taskB": 3, "taskC": 1, "taskD": 1, "taskE": 1, "taskF": 1}
    basis = np.eye(4, dtype=np.float32)

    idx = 0
    for task, count in groups.items():
        gt_id = f"gt-{task}"
        builder.add_video(
            gt_id,
            model_id="__reference__",
            task_id=task,
            instruction=f"reference for {task}",
            role="ground_truth",
            arrays={
                k: v
                for k, v in boundary_arrays(st_vec=st_shared).items()
                if k in ("st_embedding", "depth", "desc_embedding")
            },
            detections=diagonal_detections(),
        )
        for variant in range(count):
            vid = f"gen-{idx:02d}"
            scene_vec = basis[variant] if count > 1 else basis[0]
            arrays = boundary_arrays(scene_vec=scene_vec, st_vec=st_shared)
            builder.add_video(
                vid,
                model_id=model_id,
                task_id=task,
                instruction=f"{task} instruction {variant}",
                role="generated",
                arrays=arrays,
                detections=diagonal_detections(),
                judge_record=quality_verdict_record(),
                gt_ref=gt_id,
            )
            idx += 1
    return builder.finish()
