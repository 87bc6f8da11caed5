import http.server
import json
import threading

import pytest

from ewmeval.cli import main
from ewmeval.engine import dump_json
from ewmeval.metrics import METRIC_IDS
from ewmeval.reference import REFERENCE_RESULTS
from ewmeval.scoring import MetricVector
from helpers import (
    BundleBuilder,
    boundary_arrays,
    diagonal_detections,
    make_boundary_bundle,
    quality_verdict_record,
)


def _tree_bytes(root):
    """Relative path -> content bytes for every file under root."""
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


class TestValidate:
    def test_complete_bundle_exits_zero(self, boundary_bundle, capsys):
        assert main(["validate", "--bundle", str(boundary_bundle)]) == 0
        assert "ready" in capsys.readouterr().out

    def test_missing_depth_exits_two_and_names_metric(self, tmp_path, capsys):
        builder = BundleBuilder(tmp_path / "b")
        arrays = boundary_arrays()
        del arrays["depth"]
        builder.add_video(
            "gt0", model_id="ref", task_id="t", instruction="r", role="ground_truth",
            arrays={"st_embedding": arrays["st_embedding"],
                    "desc_embedding": arrays["desc_embedding"]},
            detections=diagonal_detections(),
        )
        builder.add_video(
            "v0", model_id="m", task_id="t", instruction="go", role="generated",
            arrays=arrays, detections=diagonal_detections(),
            judge_record=quality_verdict_record(), gt_ref="gt0",
        )
        assert main(["validate", "--bundle", str(builder.finish())]) == 2
        assert "depth_accuracy" in capsys.readouterr().out

    def test_nonexistent_path_exits_one(self, tmp_path, capsys):
        assert main(["validate", "--bundle", str(tmp_path / "nope")]) == 1


class TestEvaluate:
    def test_boundary_bundle_all_ones(self, boundary_bundle, tmp_path, capsys):
        out = tmp_path / "run"
        code = main([
            "evaluate", "--bundle", str(boundary_bundle), "--output", str(out),
        ])
        assert code == 0
        with open(out / "vectors" / "synthmodel.json", encoding="utf-8") as fh:
            doc = json.load(fh)
        assert doc["ewm_score"] == 100.0
        assert all(doc["values"][mid] == 1.0 for mid in METRIC_IDS)
        assert "EWMScore 100.00" in capsys.readouterr().out

    def test_parallelism_does_not_change_bytes(self, boundary_bundle, tmp_path):
        out1 = tmp_path / "p1"
        out8 = tmp_path / "p8"
        assert main(["evaluate", "--bundle", str(boundary_bundle), "--output", str(out1),
                     "--parallelism", "1"]) == 0
        assert main(["evaluate", "--bundle", str(boundary_bundle), "--output", str(out8),
                     "--parallelism", "8"]) == 0
        assert _tree_bytes(out1) == _tree_bytes(out8)

    def test_replay_rerun_is_byte_identical(self, boundary_bundle, tmp_path):
        out1 = tmp_path / "r1"
        out2 = tmp_path / "r2"
        for out in (out1, out2):
            assert main(["evaluate", "--bundle", str(boundary_bundle),
                         "--output", str(out)]) == 0
        assert _tree_bytes(out1) == _tree_bytes(out2)

    def test_rerun_resumes_from_cache(self, boundary_bundle, tmp_path):
        out = tmp_path / "run"
        assert main(["evaluate", "--bundle", str(boundary_bundle), "--output", str(out)]) == 0
        before = _tree_bytes(out)
        marker = out / "per_video" / "synthmodel" / "gen-00.json"
        stamp = marker.stat().st_mtime_ns
        assert main(["evaluate", "--bundle", str(boundary_bundle), "--output", str(out)]) == 0
        assert _tree_bytes(out) == before
        assert marker.stat().st_mtime_ns == stamp  # cached file untouched

    def test_config_change_invalidates_cache(self, boundary_bundle, tmp_path):
        out = tmp_path / "run"
        assert main(["evaluate", "--bundle", str(boundary_bundle), "--output", str(out),
                     "--gamma", "0.3"]) == 0
        marker = out / "per_video" / "synthmodel" / "gen-00.json"
        first = json.loads(marker.read_text())
        assert main(["evaluate", "--bundle", str(boundary_bundle), "--output", str(out),
                     "--gamma", "0.5"]) == 0
        second = json.loads(marker.read_text())
        assert second["config_digest"] != first["config_digest"]
        config = json.loads((out / "config.json").read_text())
        assert config["config"]["gamma"] == 0.5

    def test_metric_subset_only_persists_that_metric(self, boundary_bundle, tmp_path):
        out = tmp_path / "subset"
        code = main([
            "evaluate", "--bundle", str(boundary_bundle), "--output", str(out),
            "--metrics", "trajectory_accuracy",
        ])
        assert code == 0
        with open(out / "aggregates" / "synthmodel.json", encoding="utf-8") as fh:
            agg = json.load(fh)
        assert set(agg["metrics"]) == {"trajectory_accuracy"}
        per_video = json.loads(
            (out / "per_video" / "synthmodel" / "gen-00.json").read_text()
        )
        assert set(per_video["metrics"]) == {"trajectory_accuracy"}
        assert not (out / "vectors").exists()

    def test_skip_judge_mode_reports_gaps(self, boundary_bundle, tmp_path, capsys):
        out = tmp_path / "skipped"
        code = main([
            "evaluate", "--bundle", str(boundary_bundle), "--output", str(out),
            "--judge-mode", "skip",
        ])
        assert code == 2
        assert "interaction_quality" in capsys.readouterr().out

    def test_live_judge_against_stub(self, tmp_path):
        verdict = json.dumps(quality_verdict_record(4, 3, 5)["parsed"]["scores"])

        class Handler(http.server.BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers["Content-Length"])
                self.rfile.read(length)
                payload = json.dumps({"content": verdict}).encode()
                self.send_response(200)
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        server = http.server.HTTPServer(("127.0.0.1", 0), Handler)
        threading.Thread(target=server.serve_forever, daemon=True).start()
        try:
            bundle_root = tmp_path / "bundle"
            builder = BundleBuilder(bundle_root)
            arrays = boundary_arrays()
            builder.add_video(
                "gt0", model_id="ref", task_id="t", instruction="r", role="ground_truth",
                arrays={k: arrays[k] for k in ("st_embedding", "depth", "desc_embedding")},
                detections=diagonal_detections(),
            )
            # no pre-stored verdict: live mode must fetch and persist one
            builder.add_video(
                "v0", model_id="m", task_id="t", instruction="press the button",
                role="generated", arrays=arrays,
                detections=diagonal_detections(), gt_ref="gt0",
            )
            root = builder.finish()
            out_live = tmp_path / "live"
            code = main([
                "evaluate", "--bundle", str(root), "--output", str(out_live),
                "--judge-mode", "live",
                "--judge-endpoint", f"http://127.0.0.1:{server.server_port}/",
            ])
            assert code == 2  # jepa/action_following need >1 video; judge itself worked
            per_video = json.loads((out_live / "per_video" / "m" / "v0.json").read_text())
            assert per_video["metrics"]["interaction_quality"]["raw"] == 0.75
            assert per_video["metrics"]["perspectivity"]["raw"] == 0.5
            assert per_video["metrics"]["instruction_following"]["raw"] == 1.0
            # verdict persisted into the bundle for replay
            persisted = root / "judge" / "v0.json"
            assert persisted.exists()
            record = json.loads(persisted.read_text())
            assert record["parsed"]["scores"]["Interaction_Quality"]["score"] == 4
        finally:
            server.shutdown()

    def test_replay_reproduces_live_metric_outputs(self, tmp_path):
        verdict = json.dumps(quality_verdict_record(3, 4, 2)["parsed"]["scores"])

        class Handler(http.server.BaseHTTPRequestHandler):
            def do_POST(self):
                self.rfile.read(int(self.headers["Content-Length"]))
                payload = json.dumps({"content": verdict}).encode()
                self.send_response(200)
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        server = http.server.HTTPServer(("127.0.0.1", 0), Handler)
        threading.Thread(target=server.serve_forever, daemon=True).start()
        try:
            root = make_boundary_bundle(tmp_path / "bundle")
            # drop the pre-stored verdicts so live mode has to fetch them
            for judge_file in (root / "videos").glob("*/judge.json"):
                judge_file.write_text("{}")
            out_live = tmp_path / "live"
            assert main([
                "evaluate", "--bundle", str(root), "--output", str(out_live),
                "--judge-mode", "live",
                "--judge-endpoint", f"http://127.0.0.1:{server.server_port}/",
            ]) == 0
            out_replay = tmp_path / "replay"
            assert main([
                "evaluate", "--bundle", str(root), "--output", str(out_replay),
                "--judge-mode", "replay",
            ]) == 0
            for vid_file in sorted((out_live / "per_video" / "synthmodel").glob("*.json")):
                live_doc = json.loads(vid_file.read_text())
                replay_doc = json.loads(
                    (out_replay / "per_video" / "synthmodel" / vid_file.name).read_text()
                )
                assert live_doc["metrics"] == replay_doc["metrics"]
            live_vec = json.loads((out_live / "vectors" / "synthmodel.json").read_text())
            replay_vec = json.loads((out_replay / "vectors" / "synthmodel.json").read_text())
            assert live_vec["values"] == replay_vec["values"]
            assert live_vec["ewm_score"] == replay_vec["ewm_score"]
        finally:
            server.shutdown()

    def test_unreachable_judge_records_gap_and_exit_two(self, tmp_path, capsys, monkeypatch):
        from ewmeval import judge as judge_mod

        monkeypatch.setattr(judge_mod, "_BACKOFF_S", 0.0)
        bundle_root = tmp_path / "bundle"
        builder = BundleBuilder(bundle_root)
        arrays = boundary_arrays()
        builder.add_video(
            "v0", model_id="m", task_id="t", instruction="go", role="generated",
            arrays={"frames": arrays["frames"], "frame_scores": arrays["frame_scores"]},
        )
        out = tmp_path / "out"
        code = main([
            "evaluate", "--bundle", str(builder.finish()), "--output", str(out),
            "--metrics", "interaction_quality,image_quality",
            "--judge-mode", "live",
            "--judge-endpoint", "http://127.0.0.1:9/",  # discard port: refuses connections
        ])
        assert code == 2
        per_video = json.loads((out / "per_video" / "m" / "v0.json").read_text())
        assert "interaction_quality" in per_video["gaps"]
        assert per_video["metrics"]["image_quality"]["raw"] == 1.0


def _write_reference_vectors(out_dir):
    for model, values in REFERENCE_RESULTS.items():
        vec = MetricVector(model, dict(values), config={"bounds_version": "v1"})
        doc = vec.to_dict()
        dump_json(doc, out_dir / "vectors" / f"{model}.json")


class TestReport:
    def test_reference_leaderboard(self, tmp_path, capsys):
        run_dir = tmp_path / "run"
        _write_reference_vectors(run_dir)
        assert main(["report", "--input", str(run_dir)]) == 0
        lb = (run_dir / "reports" / "leaderboard.csv").read_text()
        rows = [line.split(",")[0] for line in lb.strip().splitlines()[1:]]
        assert len(rows) == 14
        assert rows[0] == "Wan 2.6"  # highest composite score
        doc = json.loads((run_dir / "reports" / "leaderboard.json").read_text())
        scores = [m["ewm_score"] for m in doc["models"]]
        assert scores == sorted(scores, reverse=True)
        assert scores[0] == pytest.approx(61.86, abs=0.01)

    def test_report_embeds_config_digest_from_evaluation(self, boundary_bundle, tmp_path):
        out = tmp_path / "run"
        assert main(["evaluate", "--bundle", str(boundary_bundle), "--output", str(out)]) == 0
        assert main(["report", "--input", str(out)]) == 0
        report = json.loads((out / "reports" / "report.json").read_text())
        config = json.loads((out / "config.json").read_text())
        assert report["models"][0]["config_digest"] == config["digest"]
        assert report["bounds_version"] == "v1"

    def test_markdown_emitted(self, tmp_path):
        run_dir = tmp_path / "run"
        _write_reference_vectors(run_dir)
        assert main(["report", "--input", str(run_dir)]) == 0
        md = (run_dir / "reports" / "leaderboard.md").read_text()
        assert md.startswith("Bounds version: v1")
        assert "| Wan 2.6 |" in md

    def test_radar_output(self, tmp_path):
        run_dir = tmp_path / "run"
        _write_reference_vectors(run_dir)
        assert main(["report", "--input", str(run_dir)]) == 0
        radar = json.loads((run_dir / "reports" / "radar.json").read_text())
        assert set(radar["CtrlWorld"]) == {
            "visual_quality", "motion_quality", "content_consistency",
            "physics_adherence", "three_d_accuracy", "controllability",
        }

    def test_empty_input_exits_one(self, tmp_path):
        assert main(["report", "--input", str(tmp_path / "empty")]) == 1

    def test_mixed_bounds_versions_exit_two(self, tmp_path):
        run_dir = tmp_path / "run"
        _write_reference_vectors(run_dir)
        rogue = MetricVector("rogue", {mid: 1.0 for mid in METRIC_IDS},
                             config={"bounds_version": "v2"})
        dump_json(rogue.to_dict(), run_dir / "vectors" / "rogue.json")
        assert main(["report", "--input", str(run_dir)]) == 2

    def test_report_idempotent_bytes(self, tmp_path):
        run_dir = tmp_path / "run"
        _write_reference_vectors(run_dir)
        assert main(["report", "--input", str(run_dir), "--output", str(tmp_path / "r1")]) == 0
        assert main(["report", "--input", str(run_dir), "--output", str(tmp_path / "r2")]) == 0
        assert _tree_bytes(tmp_path / "r1") == _tree_bytes(tmp_path / "r2")


class TestImportsAndCorrelate:
    def _human_csv(self, path):
        rows = ["video_id,model_id,dimension,likert"]
        ratings = {"alpha": 5, "beta": 3, "gamma": 1}
        for model, likert in ratings.items():
            for dim in ("overall_quality", "instruction_following", "physical_adherence"):
                rows.append(f"v0,{model},{dim},{likert}")
                rows.append(f"v1,{model},{dim},{likert}")
        path.write_text("\n".join(rows) + "\n")

    def _pairwise_csv(self, path):
        rows = ["model_a,model_b,video_id,winner"]
        rows += ["alpha,beta,v0,a", "alpha,gamma,v0,a", "beta,gamma,v0,tie"]
        path.write_text("\n".join(rows) + "\n")

    def _tasks_csv(self, path):
        rows = ["model_id,task_id,trials,successes,role"]
        for model, wm, sim in (("alpha", 60, 50), ("beta", 40, 30), ("gamma", 20, 10)):
            rows.append(f"{model},t1,100,{wm},policy_eval_wm")
            rows.append(f"{model},t1,100,{sim},policy_eval_sim")
        rows.append("WoW,adjust_bottle,100,45,data_engine")
        path.write_text("\n".join(rows) + "\n")

    def test_import_human_and_win_rates(self, tmp_path):
        run_dir = tmp_path / "run"
        run_dir.mkdir()
        scores_csv = tmp_path / "scores.csv"
        pairwise_csv = tmp_path / "pairwise.csv"
        self._human_csv(scores_csv)
        self._pairwise_csv(pairwise_csv)
        assert main(["import-human", "--scores", str(scores_csv),
                     "--pairwise", str(pairwise_csv), "--output", str(run_dir)]) == 0
        human = json.loads((run_dir / "human_scores.json").read_text())
        assert human["alpha"]["overall_quality"] == 100.0
        assert human["beta"]["overall_quality"] == 50.0
        wins = json.loads((run_dir / "win_rates.json").read_text())
        assert wins["alpha"] == 1.0
        assert wins["gamma"] == 0.25

    def test_import_tasks_and_correlate(self, tmp_path, capsys):
        run_dir = tmp_path / "run"
        values = {mid: 0.9 for mid in METRIC_IDS}
        for name, scale in (("alpha", 1.0), ("beta", 0.7), ("gamma", 0.4)):
            vec = MetricVector(name, {mid: v * scale for mid, v in values.items()},
                               config={"bounds_version": "v1"})
            dump_json(vec.to_dict(), run_dir / "vectors" / f"{name}.json")
        tasks_csv = tmp_path / "tasks.csv"
        self._tasks_csv(tasks_csv)
        assert main(["import-tasks", "--csv", str(tasks_csv), "--output", str(run_dir)]) == 0
        assert main(["correlate", "--input", str(run_dir)]) == 0
        corr = json.loads((run_dir / "reports" / "correlations.json").read_text())
        by_pair = {(c["x"], c["y"]): c for c in corr}
        policy = by_pair[("simulator_success", "world_model_success")]
        assert policy["r"] == pytest.approx(1.0, abs=1e-12)
        assert policy["mean_gap"] == pytest.approx(0.10, abs=1e-12)

    def test_correlate_without_inputs_exits_one(self, tmp_path):
        run_dir = tmp_path / "run"
        _write_reference_vectors(run_dir)
        assert main(["correlate", "--input", str(run_dir)]) == 1

    def test_import_tasks_rejects_bad_rows(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("model_id,task_id,trials,successes,role\nm,t,100,200,data_engine\n")
        assert main(["import-tasks", "--csv", str(bad), "--output", str(tmp_path)]) == 1


class TestJudgeEdgeCases:
    def test_policy_verdict_in_quality_slot_is_soft_gap(self, tmp_path):
        builder = BundleBuilder(tmp_path / "b")
        arrays = boundary_arrays()
        policy_record = {
            "kind": "policy",
            "request_digest": "x",
            "raw_response": "answer: 1",
            "parsed": {"kind": "policy", "answer": 1, "thinking": ""},
        }
        builder.add_video(
            "v0", model_id="m", task_id="t", instruction="go", role="generated",
            arrays={"frame_scores": arrays["frame_scores"]}, judge_record=policy_record,
        )
        out = tmp_path / "out"
        code = main([
            "evaluate", "--bundle", str(builder.finish()), "--output", str(out),
            "--metrics", "interaction_quality,image_quality",
        ])
        assert code == 2
        per_video = json.loads((out / "per_video" / "m" / "v0.json").read_text())
        assert "interaction_quality" in per_video["gaps"]
        assert "policy" in per_video["gaps"]["interaction_quality"]
        assert per_video["metrics"]["image_quality"]["raw"] == 1.0
