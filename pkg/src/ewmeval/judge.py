"""Vision-language judge gateway.

Builds the two judging prompts, speaks a minimal HTTP+JSON protocol to any
VLM endpoint, parses/validates verdicts, and persists request/response
pairs so later runs can replay them deterministically.

Wire protocol: POST {"model": str, "prompt": str, "images": [b64 PNG...]}
-> {"content": str}. Endpoint/model/timeout default from the environment
variables JUDGE_ENDPOINT, JUDGE_MODEL, JUDGE_TIMEOUT_S.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field

import numpy as np
import requests

from .errors import (
    JudgeParseError,
    JudgeRangeError,
    JudgeSchemaError,
    ProtocolError,
    TransportError,
)

QUALITY = "quality"
POLICY = "policy"

QUALITY_DIMENSIONS = ("Interaction_Quality", "Perspectivity", "Instruction_Following")

# frames sent to the quality judge; first and last always included
QUALITY_FRAME_COUNT = 8
POLICY_FRAME_COUNT = 5

_RETRIES = 3
_BACKOFF_S = 0.5

# bounded in-flight requests against the endpoint, shared process-wide
MAX_IN_FLIGHT = int(os.environ.get("JUDGE_MAX_IN_FLIGHT", "4"))
_in_flight = threading.Semaphore(MAX_IN_FLIGHT)

_INSTRUCTION_SLOT = "**VIDEO INSTRUCTION**"

QUALITY_PROMPT_TEMPLATE = """You are an expert evaluator for robot interaction videos. You are evaluating videos generated for **embodied AI manipulation scenarios**, specifically focusing on robotic arms interacting with objects in tabletop environments.

**EVALUATION CONTEXT:**
- Target scenario: Robotic manipulation (e.g., pick-place, push, grasp)
- Expected agent: **Robotic arm/end-effector**, NOT human hands
- Expected environment: Tabletop with objects, typical for robot manipulation tasks
- Expected physics: Realistic robot-object interactions following physical laws

**CRITICAL EVALUATION PRINCIPLES:**
1. Base ALL judgments ONLY on what is visually observable in the sampled frames
2. DO NOT infer information not shown (no assumptions about unseen parts)
3. Evaluate temporal coherence across the sampled frames
4. For instruction following: Compare STRICTLY against the provided text instruction

**EVALUATION DIMENSIONS & SCORING RUBRICS:**

1. Interaction_Quality (Quality of robot-object interactions)
   - Score 1: Objects pass through robot or other objects; no proper contact
   - Score 2: Contact exists but interaction is unrealistic (e.g., sliding without friction, incorrect force response)
   - Score 3: Mostly plausible interactions with minor issues (e.g., slight penetration, imperfect grasping)
   - Score 4: Realistic contact physics (proper friction, force transfer, object deformation)
   - Score 5: Perfect interaction physics; indistinguishable from real robot manipulation

2. PERSPECTIVITY (3D consistency and camera geometry)
   - Score 1: Scene has no coherent 3D structure; objects float inconsistently
   - Score 2: 3D structure is unstable (e.g., scale changes, incorrect occlusion)
   - Score 3: Reasonable 3D consistency with minor issues (e.g., slight perspective drift)
   - Score 4: Stable camera perspective with consistent depth relationships
   - Score 5: Perfect camera geometry and 3D consistency

3. INSTRUCTION FOLLOWING (Adherence to given instruction: **VIDEO INSTRUCTION**)
   - **HALLUCINATION CHECK**: If the video shows human hands instead of robotic arms, score <= 2 immediately
   - Score 1: Completely different from instruction (wrong action, wrong objects, wrong scene)
   - Score 2: Partially related but major errors (e.g., wrong target object, incorrect manipulation type)
   - Score 3: Follows general intent but with execution errors (e.g., correct action sequence but imprecise)
   - Score 4: Mostly correct with minor deviations (e.g., slight position error, extra unnecessary motion)
   - Score 5: Perfect execution of all specified elements (action, object, scene, outcome)

**SPECIFIC ROBOT-RELATED CHECKS:**
- Robotic arm should have mechanical appearance, NOT human limbs
- End-effector (gripper) should maintain consistent form throughout interaction
- Robot motion should show appropriate joint movement and kinematics
- Object manipulation should respect object mass and inertia
- Contact should be maintained appropriately during grasping/lifting

**OUTPUT FORMAT REQUIREMENTS:**
You MUST output a SINGLE, VALID JSON object with EXACTLY three keys:
- 'Interaction_Quality'
- 'Perspectivity'
- 'Instruction_Following'

Each value must be an object with exactly two keys:
- "score": integer 1-5
- "reason": concise explanation citing SPECIFIC visual evidence from frames

**EXAMPLE OUTPUT:**
{
  "Interaction_Quality": {
    "score": 2,
    "reason": "Object slides without friction during pushing; gripper penetrates object slightly"
  },
  "Perspectivity": {
    "score": 4,
    "reason": "Stable camera perspective with consistent depth ordering"
  },
  "Instruction_Following": {
    "score": 1,
    "reason": "Video shows human hand instead of robotic arm (hallucination)"
  }
}

**CRITICAL INSTRUCTIONS:**
1. Output ONLY the JSON object, no other text
2. Base scoring on observed visual evidence only
3. For instruction following: Strictly compare with the provided instruction
4. Consider temporal coherence across all sampled frames
5. Penalize hallucinations (e.g., human hands instead of robot) heavily

Now evaluate the provided video frames based on the above criteria."""

POLICY_PROMPT_TEMPLATE = """You are a robot task execution judge. Please determine if the policy model correctly executed the instruction.

**Task Instruction**: {instruction}

**INPUT DESCRIPTION:**
- First 5 images: GT (Ground Truth) video frames (uniformly sampled: first frame, 3 middle frames, last frame), showing the correct task execution
- Last 5 images: Policy model generated video frames, showing the policy model's execution

**EVALUATION CRITERIA** (by priority):

1. Arm Selection - If the instruction explicitly requires left/right arm, the correct arm must be used, otherwise fail
2. Task Completion - Compare GT's final state with Policy's final state:
   - GT's final frame shows the completed task state
   - Policy's final frame should show a similar completion state
   - If Policy's final frame differs significantly from GT's final frame, judge as failure
3. Action Intent - Is Policy's entire motion process consistent with the instruction's semantic meaning?

**TOLERABLE DIFFERENCES:**
- Visual hallucinations from world model rendering (object deformation, color shifts)
- Minor differences in action trajectory
- Video length differences

**JUDGE AS SUCCESS (1):**
- Correct arm used
- Final state similar to GT (task basically completed)
- Correct action intent

**JUDGE AS FAILURE (0):**
- Wrong arm used
- Final state significantly different from GT (task not completed or completed incorrectly)
- Completely wrong action direction
- Grabbed/operated wrong object

Please carefully compare the **final frames** of GT and Policy to judge if the task is basically completed.

**OUTPUT FORMAT REQUIREMENTS:**
Please respond in this format:
thinking: [Analysis: 1. Is arm correct? 2. Compare final frame task completion states 3. Is action intent consistent?]
answer: [0 or 1]"""


@dataclass(frozen=True)
class JudgeVerdict:
    """Parsed, schema-validated judge output."""

    kind: str  # quality | policy
    scores: dict = field(default_factory=dict)  # quality: dim -> {"score", "reason"}
    answer: int | None = None  # policy: 0 or 1
    thinking: str = ""
    provenance: str = "live"  # live | replay
    raw_response: str = ""


@dataclass(frozen=True)
class JudgeRequest:
    endpoint: str
    model_name: str
    prompt: str
    images: tuple[str, ...]  # base64-encoded PNG frames
    prompt_kind: str

    def digest(self) -> str:
        body = json.dumps(
            {"model": self.model_name, "prompt": self.prompt, "images": list(self.images)},
            sort_keys=True,
        )
        return hashlib.sha256(body.encode("utf-8")).hexdigest()


def build_quality_prompt(instruction: str) -> str:
    """Fill the quality-judge template; byte-stable across calls."""
    if not instruction or not instruction.strip():
        raise ValueError("instruction must be nonempty")
    return QUALITY_PROMPT_TEMPLATE.replace(_INSTRUCTION_SLOT, f"**{instruction}**")


def build_policy_prompt(instruction: str) -> str:
    """Fill the policy-judge template; byte-stable across calls."""
    if not instruction or not instruction.strip():
        raise ValueError("instruction must be nonempty")
    return POLICY_PROMPT_TEMPLATE.replace("{instruction}", instruction)


def sample_judge_frames(frame_count: int, mode: str, count: int | None = None) -> list[int]:
    """Indices of frames sent to the judge; first and last always included.

    Policy mode picks {0, floor(T*k/4) for k=1..3, T-1}; quality mode picks
    ``count`` (default 8) evenly spaced indices. Videos shorter than the
    target count degrade to all frames.
    """
    t = frame_count
    if t < 1:
        raise ValueError("no frames to sample")
    if count is None:
        count = POLICY_FRAME_COUNT if mode == POLICY else QUALITY_FRAME_COUNT
    if t <= count:
        return list(range(t))
    if mode == POLICY:
        return [0, t * 1 // 4, t * 2 // 4, t * 3 // 4, t - 1]
    idx = np.round(np.linspace(0, t - 1, count)).astype(int)
    return list(dict.fromkeys(int(i) for i in idx))


def encode_frame_png(frame: np.ndarray) -> str:
    """Base64 PNG encoding of an HxWx3 uint8 frame."""
    from PIL import Image

    img = Image.fromarray(np.asarray(frame, dtype=np.uint8))
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def build_quality_request(
    endpoint: str,
    model_name: str,
    frames: np.ndarray,
    instruction: str,
    frame_count: int | None = None,
) -> JudgeRequest:
    """Quality-judge request: sampled frames plus the rubric prompt."""
    idx = sample_judge_frames(len(frames), QUALITY, count=frame_count)
    images = tuple(encode_frame_png(frames[i]) for i in idx)
    return JudgeRequest(
        endpoint=endpoint,
        model_name=model_name,
        prompt=build_quality_prompt(instruction),
        images=images,
        prompt_kind=QUALITY,
    )


def build_policy_request(
    endpoint: str,
    model_name: str,
    gt_frames: np.ndarray,
    policy_frames: np.ndarray,
    instruction: str,
) -> JudgeRequest:
    """Policy-judge request: 5 GT frames then 5 policy frames."""
    gt_idx = sample_judge_frames(len(gt_frames), POLICY)
    pol_idx = sample_judge_frames(len(policy_frames), POLICY)
    images = tuple(encode_frame_png(gt_frames[i]) for i in gt_idx) + tuple(
        encode_frame_png(policy_frames[i]) for i in pol_idx
    )
    return JudgeRequest(
        endpoint=endpoint,
        model_name=model_name,
        prompt=build_policy_prompt(instruction),
        images=images,
        prompt_kind=POLICY,
    )


def _default_transport(url: str, body: dict, timeout: float) -> tuple[int, str]:
    resp = requests.post(url, json=body, timeout=timeout)
    return resp.status_code, resp.text


def invoke_judge(req: JudgeRequest, transport=None, timeout: float | None = None) -> str:
    """Single POST to the judge endpoint; returns the raw content string.

    Retries transport failures and HTTP 5xx up to 3 attempts with
    exponential backoff; HTTP 4xx raises ProtocolError immediately.
    """
    if transport is None:
        transport = _default_transport
    if timeout is None:
        timeout = float(os.environ.get("JUDGE_TIMEOUT_S", "120"))
    body = {"model": req.model_name, "prompt": req.prompt, "images": list(req.images)}
    last_err: Exception | None = None
    with _in_flight:
        for attempt in range(_RETRIES):
            try:
                status, text = transport(req.endpoint, body, timeout)
            except (requests.RequestException, OSError) as exc:
                last_err = exc
                if attempt < _RETRIES - 1:
                    time.sleep(_BACKOFF_S * 2**attempt)
                continue
            if 200 <= status < 300:
                try:
                    return json.loads(text)["content"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise ProtocolError(f"malformed judge response body: {exc}") from exc
            if 400 <= status < 500:
                raise ProtocolError(f"judge endpoint returned HTTP {status}")
            last_err = TransportError(f"judge endpoint returned HTTP {status}")
            if attempt < _RETRIES - 1:
                time.sleep(_BACKOFF_S * 2**attempt)
    raise TransportError(f"judge request failed after {_RETRIES} attempts: {last_err}")


def _extract_json_object(raw: str) -> dict:
    """First balanced JSON object in the text, tolerating fences and prose."""
    start = raw.find("{")
    while start != -1:
        depth = 0
        in_str = False
        escape = False
        for i in range(start, len(raw)):
            ch = raw[i]
            if in_str:
                if escape:
                    escape = False
                elif ch == "\\":
                    escape = True
                elif ch == '"':
                    in_str = False
            elif ch == '"':
                in_str = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    candidate = raw[start : i + 1]
                    try:
                        obj = json.loads(candidate)
                    except json.JSONDecodeError:
                        break
                    if isinstance(obj, dict):
                        return obj
                    break
        start = raw.find("{", start + 1)
    raise JudgeParseError("no JSON object found in judge response")


def parse_quality_verdict(raw: str, strict: bool = False) -> JudgeVerdict:
    """Parse a quality-judge response into a validated verdict.

    Raises JudgeParseError when no JSON object is present, JudgeSchemaError
    on wrong keys or value shapes, JudgeRangeError on scores outside 1-5.
    """
    if strict:
        try:
            obj = json.loads(raw.strip())
        except json.JSONDecodeError as exc:
            raise JudgeParseError(f"strict mode: response is not bare JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise JudgeParseError("strict mode: response is not a JSON object")
    else:
        obj = _extract_json_object(raw)

    if set(obj.keys()) != set(QUALITY_DIMENSIONS):
        missing = set(QUALITY_DIMENSIONS) - set(obj.keys())
        extra = set(obj.keys()) - set(QUALITY_DIMENSIONS)
        raise JudgeSchemaError(f"verdict keys wrong (missing={sorted(missing)}, extra={sorted(extra)})")
    scores = {}
    for dim in QUALITY_DIMENSIONS:
        entry = obj[dim]
        if not isinstance(entry, dict) or "score" not in entry:
            raise JudgeSchemaError(f"{dim}: expected an object with a 'score' key")
        score = entry["score"]
        if isinstance(score, bool) or not isinstance(score, int):
            raise JudgeRangeError(f"{dim}: score must be integral, got {score!r}")
        if not 1 <= score <= 5:
            raise JudgeRangeError(f"{dim}: score {score} outside [1, 5]")
        scores[dim] = {"score": score, "reason": str(entry.get("reason", ""))}
    return JudgeVerdict(kind=QUALITY, scores=scores, raw_response=raw)


_ANSWER_RE = re.compile(r"answer\s*:\s*\[?\s*([^\s\]]+)\s*\]?", re.IGNORECASE)


def parse_policy_verdict(raw: str) -> JudgeVerdict:
    """Parse a policy-judge response: final 'answer:' token plus thinking."""
    matches = list(_ANSWER_RE.finditer(raw))
    if not matches:
        raise JudgeParseError("no 'answer:' token in policy judge response")
    last = matches[-1]
    token = last.group(1)
    if token not in ("0", "1"):
        raise JudgeRangeError(f"policy answer must be 0 or 1, got {token!r}")
    thinking = ""
    think_match = re.search(r"thinking\s*:\s*(.*?)(?=\n\s*answer\s*:|$)", raw, re.IGNORECASE | re.DOTALL)
    if think_match:
        thinking = think_match.group(1).strip()
    return JudgeVerdict(kind=POLICY, answer=int(token), thinking=thinking, raw_response=raw)


def parse_verdict(kind: str, raw: str, strict: bool = False) -> JudgeVerdict:
    if kind == QUALITY:
        return parse_quality_verdict(raw, strict=strict)
    if kind == POLICY:
        return parse_policy_verdict(raw)
    raise ValueError(f"unknown verdict kind {kind!r}")


def verdict_to_record(verdict: JudgeVerdict, request_digest: str) -> dict:
    """Persistence form stored as judge.json next to a video's artifacts."""
    parsed: dict = {"kind": verdict.kind}
    if verdict.kind == QUALITY:
        parsed["scores"] = verdict.scores
    else:
        parsed["answer"] = verdict.answer
        parsed["thinking"] = verdict.thinking
    return {
        "kind": verdict.kind,
        "request_digest": request_digest,
        "raw_response": verdict.raw_response,
        "parsed": parsed,
    }


def verdict_from_record(record: dict) -> JudgeVerdict:
    """Rebuild a verdict from its persisted judge.json record."""
    kind = record.get("kind")
    parsed = record.get("parsed", {})
    raw = record.get("raw_response", "")
    if kind == QUALITY:
        scores = parsed.get("scores", {})
        if set(scores.keys()) != set(QUALITY_DIMENSIONS):
            raise JudgeSchemaError("persisted quality verdict has wrong dimensions")
        for dim, entry in scores.items():
            s = entry.get("score")
            if isinstance(s, bool) or not isinstance(s, int) or not 1 <= s <= 5:
                raise JudgeRangeError(f"persisted {dim} score {s!r} invalid")
        return JudgeVerdict(kind=QUALITY, scores=scores, provenance="replay", raw_response=raw)
    if kind == POLICY:
        answer = parsed.get("answer")
        if answer not in (0, 1):
            raise JudgeRangeError(f"persisted policy answer {answer!r} invalid")
        return JudgeVerdict(
            kind=POLICY,
            answer=answer,
            thinking=parsed.get("thinking", ""),
            provenance="replay",
            raw_response=raw,
        )
    raise JudgeSchemaError(f"persisted verdict has unknown kind {kind!r}")
