import json

import numpy as np
import pytest

from ewmeval import judge
from ewmeval.errors import (
    JudgeParseError,
    JudgeRangeError,
    JudgeSchemaError,
    ProtocolError,
    TransportError,
)

EXAMPLE_QUALITY_OUTPUT = """{
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
}"""


class TestPromptBuilding:
    def test_quality_prompt_contains_rubric_and_instruction(self):
        prompt = judge.build_quality_prompt("place the shoe")
        assert "expert evaluator for robot interaction videos" in prompt
        assert "place the shoe" in prompt
        assert "**VIDEO INSTRUCTION**" not in prompt

    def test_quality_prompt_deterministic(self):
        a = judge.build_quality_prompt("push the block")
        b = judge.build_quality_prompt("push the block")
        assert a == b

    def test_quality_prompt_rejects_empty(self):
        with pytest.raises(ValueError):
            judge.build_quality_prompt("")
        with pytest.raises(ValueError):
            judge.build_quality_prompt("   ")

    def test_policy_prompt_contains_instruction(self):
        prompt = judge.build_policy_prompt("use the left arm to lift the cup")
        assert "robot task execution judge" in prompt
        assert "use the left arm to lift the cup" in prompt
        assert "{instruction}" not in prompt

    def test_policy_prompt_deterministic_and_validated(self):
        assert judge.build_policy_prompt("x") == judge.build_policy_prompt("x")
        with pytest.raises(ValueError):
            judge.build_policy_prompt(" ")


class TestFrameSampling:
    def test_policy_exact_count_uses_all(self):
        assert judge.sample_judge_frames(5, judge.POLICY) == [0, 1, 2, 3, 4]

    def test_policy_nine_frames(self):
        assert judge.sample_judge_frames(9, judge.POLICY) == [0, 2, 4, 6, 8]

    def test_policy_hundred_frames(self):
        assert judge.sample_judge_frames(100, judge.POLICY) == [0, 25, 50, 75, 99]

    def test_quality_includes_endpoints(self):
        for t in (8, 9, 30, 100):
            idx = judge.sample_judge_frames(t, judge.QUALITY)
            assert idx[0] == 0
            assert idx[-1] == t - 1
            assert len(idx) == 8
            assert idx == sorted(idx)

    def test_short_video_degrades_to_all_frames(self):
        assert judge.sample_judge_frames(4, judge.QUALITY) == [0, 1, 2, 3]
        assert judge.sample_judge_frames(3, judge.POLICY) == [0, 1, 2]


class TestRequestBuilding:
    def test_quality_request_carries_eight_frames(self):
        frames = np.zeros((20, 16, 16, 3), dtype=np.uint8)
        req = judge.build_quality_request("http://judge", "m", frames, "pick up the bottle")
        assert len(req.images) == 8
        assert req.prompt_kind == judge.QUALITY

    def test_policy_request_is_gt_first_five_plus_five(self):
        gt = np.zeros((12, 16, 16, 3), dtype=np.uint8)
        pol = np.full((12, 16, 16, 3), 255, dtype=np.uint8)
        req = judge.build_policy_request("http://judge", "m", gt, pol, "click the bell")
        assert len(req.images) == 10
        gt_img = judge.encode_frame_png(gt[0])
        pol_img = judge.encode_frame_png(pol[0])
        assert req.images[0] == gt_img
        assert req.images[5] == pol_img

    def test_request_digest_stable(self):
        frames = np.zeros((8, 16, 16, 3), dtype=np.uint8)
        a = judge.build_quality_request("http://judge", "m", frames, "task")
        b = judge.build_quality_request("http://judge", "m", frames, "task")
        assert a.digest() == b.digest()


class TestQualityParsing:
    def test_example_output(self):
        verdict = judge.parse_quality_verdict(EXAMPLE_QUALITY_OUTPUT)
        assert verdict.scores["Interaction_Quality"]["score"] == 2
        assert verdict.scores["Perspectivity"]["score"] == 4
        assert verdict.scores["Instruction_Following"]["score"] == 1

    def test_code_fence_tolerated(self):
        wrapped = f"Sure, here is my judgement:\n```json\n{EXAMPLE_QUALITY_OUTPUT}\n```\nDone."
        verdict = judge.parse_quality_verdict(wrapped)
        assert verdict.scores["Perspectivity"]["score"] == 4

    def test_strict_mode_rejects_prose(self):
        wrapped = f"prefix {EXAMPLE_QUALITY_OUTPUT}"
        with pytest.raises(JudgeParseError):
            judge.parse_quality_verdict(wrapped, strict=True)
        assert judge.parse_quality_verdict(EXAMPLE_QUALITY_OUTPUT, strict=True).kind == "quality"

    def test_no_json_object(self):
        with pytest.raises(JudgeParseError):
            judge.parse_quality_verdict("I cannot evaluate this video.")

    def test_missing_key(self):
        obj = json.loads(EXAMPLE_QUALITY_OUTPUT)
        del obj["Perspectivity"]
        with pytest.raises(JudgeSchemaError):
            judge.parse_quality_verdict(json.dumps(obj))

    def test_extra_key(self):
        obj = json.loads(EXAMPLE_QUALITY_OUTPUT)
        obj["Bonus"] = {"score": 3, "reason": "x"}
        with pytest.raises(JudgeSchemaError):
            judge.parse_quality_verdict(json.dumps(obj))

    def test_out_of_range_score(self):
        obj = json.loads(EXAMPLE_QUALITY_OUTPUT)
        obj["Interaction_Quality"]["score"] = 7
        with pytest.raises(JudgeRangeError):
            judge.parse_quality_verdict(json.dumps(obj))
        obj["Interaction_Quality"]["score"] = 0
        with pytest.raises(JudgeRangeError):
            judge.parse_quality_verdict(json.dumps(obj))

    def test_non_integral_score(self):
        obj = json.loads(EXAMPLE_QUALITY_OUTPUT)
        obj["Interaction_Quality"]["score"] = 3.5
        with pytest.raises(JudgeRangeError):
            judge.parse_quality_verdict(json.dumps(obj))


class TestPolicyParsing:
    def test_success(self):
        raw = "thinking: arm correct, final states match\nanswer: 1"
        verdict = judge.parse_policy_verdict(raw)
        assert verdict.answer == 1
        assert "arm correct" in verdict.thinking

    def test_failure(self):
        assert judge.parse_policy_verdict("answer: 0").answer == 0

    def test_bracketed_answer(self):
        assert judge.parse_policy_verdict("answer: [1]").answer == 1

    def test_last_answer_token_wins(self):
        raw = "thinking: answer: 0 was my draft\nanswer: 1"
        assert judge.parse_policy_verdict(raw).answer == 1

    def test_non_binary_answer(self):
        with pytest.raises(JudgeRangeError):
            judge.parse_policy_verdict("answer: maybe")

    def test_missing_answer(self):
        with pytest.raises(JudgeParseError):
            judge.parse_policy_verdict("the robot did fine")


def _req():
    return judge.JudgeRequest(
        endpoint="http://judge.local/v1",
        model_name="judge-model",
        prompt="p",
        images=("aaa",),
        prompt_kind=judge.QUALITY,
    )


class TestInvoke:
    def test_stub_round_trip(self):
        def transport(url, body, timeout):
            assert url == "http://judge.local/v1"
            assert body["model"] == "judge-model"
            assert body["images"] == ["aaa"]
            return 200, json.dumps({"content": EXAMPLE_QUALITY_OUTPUT})

        raw = judge.invoke_judge(_req(), transport=transport)
        assert raw == EXAMPLE_QUALITY_OUTPUT

    def test_500_thrice_exhausts_retries(self, monkeypatch):
        monkeypatch.setattr(judge, "_BACKOFF_S", 0.0)
        calls = []

        def transport(url, body, timeout):
            calls.append(1)
            return 500, "boom"

        with pytest.raises(TransportError):
            judge.invoke_judge(_req(), transport=transport)
        assert len(calls) == 3

    def test_401_fails_immediately(self):
        calls = []

        def transport(url, body, timeout):
            calls.append(1)
            return 401, "no"

        with pytest.raises(ProtocolError):
            judge.invoke_judge(_req(), transport=transport)
        assert len(calls) == 1

    def test_transport_exception_retries_then_succeeds(self, monkeypatch):
        monkeypatch.setattr(judge, "_BACKOFF_S", 0.0)
        calls = []

        def transport(url, body, timeout):
            calls.append(1)
            if len(calls) < 3:
                raise OSError("connection refused")
            return 200, json.dumps({"content": "answer: 1"})

        assert judge.invoke_judge(_req(), transport=transport) == "answer: 1"
        assert len(calls) == 3

    def test_malformed_body_is_protocol_error(self):
        def transport(url, body, timeout):
            return 200, "not json"

        with pytest.raises(ProtocolError):
            judge.invoke_judge(_req(), transport=transport)


class TestPersistence:
    def test_quality_round_trip(self):
        verdict = judge.parse_quality_verdict(EXAMPLE_QUALITY_OUTPUT)
        record = judge.verdict_to_record(verdict, "digest123")
        back = judge.verdict_from_record(record)
        assert back.scores == verdict.scores
        assert back.provenance == "replay"
        assert back.raw_response == verdict.raw_response

    def test_policy_round_trip(self):
        verdict = judge.parse_policy_verdict("thinking: ok\nanswer: 1")
        record = judge.verdict_to_record(verdict, "digest456")
        back = judge.verdict_from_record(record)
        assert back.answer == 1
        assert back.thinking == "ok"

    def test_corrupt_record_rejected(self):
        with pytest.raises(JudgeSchemaError):
            judge.verdict_from_record({"kind": "quality", "parsed": {"scores": {}}})
        with pytest.raises(JudgeRangeError):
            judge.verdict_from_record({"kind": "policy", "parsed": {"answer": 2}})


def test_live_http_round_trip():
    """Full wire-protocol exercise against a local stub server."""
    import http.server
    import threading

    class Handler(http.server.BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers["Content-Length"])
            body = json.loads(self.rfile.read(length))
            assert "prompt" in body and "images" in body
            payload = json.dumps({"content": EXAMPLE_QUALITY_OUTPUT}).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def log_message(self, *args):
            pass

    server = http.server.HTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        req = judge.JudgeRequest(
            endpoint=f"http://127.0.0.1:{server.server_port}/",
            model_name="stub",
            prompt="p",
            images=("img",),
            prompt_kind=judge.QUALITY,
        )
        raw = judge.invoke_judge(req, timeout=10)
        verdict = judge.parse_quality_verdict(raw)
        assert verdict.scores["Interaction_Quality"]["score"] == 2
    finally:
        server.shutdown()
