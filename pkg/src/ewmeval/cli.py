"""Command-line pipeline: validate, evaluate, report, correlate, imports.

Exit codes: 0 success, 1 environment/input error, 2 completed with gaps.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import analysis
from .analysis import LedgerEntry, correlate_series, make_entry, policy_evaluator_correlation
from .bundle import load_bundle, validate_bundle
from .engine import RunConfig, dump_json, run_evaluation
from .errors import EvalError
from .metrics import METRIC_IDS
from .scoring import (
    MetricVector,
    PairwiseComparison,
    ewm_score,
    load_bounds,
    normalize_human_score,
    win_rate,
)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_GAPS = 2


def _metric_list(text: str) -> tuple[str, ...]:
    ids = tuple(s.strip() for s in text.split(",") if s.strip())
    unknown = [m for m in ids if m not in METRIC_IDS]
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown metric ids: {unknown}")
    return ids


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ewmeval", description="Evaluation pipeline for embodied world-model videos."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--bundle", required=True, help="bundle root directory")
        p.add_argument("--metrics", type=_metric_list, default=(), help="comma-separated metric ids")

    p_val = sub.add_parser("validate", help="check artifact prerequisites per video and metric")
    add_common(p_val)
    p_val.add_argument("--output", help="write the validation report JSON here")

    p_eval = sub.add_parser("evaluate", help="compute metrics and per-model vectors")
    add_common(p_eval)
    p_eval.add_argument("--output", required=True, help="run output directory")
    p_eval.add_argument("--models", default="", help="comma-separated model ids (default: all)")
    p_eval.add_argument("--gamma", type=float, default=0.3)
    p_eval.add_argument("--alpha-dyn", type=float, default=10.0)
    p_eval.add_argument("--bounds", help="normalization bounds JSON (default: packaged v1)")
    p_eval.add_argument("--judge-mode", choices=["live", "replay", "skip"], default="replay")
    p_eval.add_argument("--judge-endpoint", help="judge URL (or env JUDGE_ENDPOINT)")
    p_eval.add_argument("--judge-model", help="judge model name (or env JUDGE_MODEL)")
    p_eval.add_argument("--parallelism", type=int, default=1)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument(
        "--strict-judge-parse", action="store_true",
        help="reject judge responses that are not a bare JSON object",
    )

    p_rep = sub.add_parser("report", help="emit leaderboard, radar, and correlation documents")
    p_rep.add_argument("--input", required=True, help="evaluate output directory")
    p_rep.add_argument("--output", help="directory for report files (default: <input>/reports)")
    p_rep.add_argument(
        "--formats", default="markdown,csv,json", help="leaderboard formats to emit"
    )

    p_cor = sub.add_parser("correlate", help="correlate composite scores with external series")
    p_cor.add_argument("--input", required=True, help="evaluate output directory")
    p_cor.add_argument("--output", help="where to write correlations.json")

    p_hum = sub.add_parser("import-human", help="ingest human annotation CSVs")
    p_hum.add_argument("--scores", help="CSV: video_id,model_id,dimension,likert")
    p_hum.add_argument("--pairwise", help="CSV: model_a,model_b,video_id,winner")
    p_hum.add_argument("--output", required=True, help="evaluate output directory")

    p_task = sub.add_parser("import-tasks", help="ingest a task-result ledger CSV")
    p_task.add_argument("--csv", required=True, help="CSV: model_id,task_id,trials,successes,role")
    p_task.add_argument("--output", required=True, help="evaluate output directory")
    return parser


def cmd_validate(args) -> int:
    try:
        bundle = load_bundle(args.bundle)
    except (EvalError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    report = validate_bundle(bundle)
    requested = args.metrics or METRIC_IDS
    if args.output:
        dump_json(report.to_dict(), Path(args.output))
    gaps = report.gaps(requested)
    if not gaps:
        print(f"all {len(requested)} requested metrics ready for {len(report.per_video)} videos")
        return EXIT_OK
    for scope, metric, reason in gaps:
        print(f"{scope}: {metric}: {reason}")
    return EXIT_GAPS


def cmd_evaluate(args) -> int:
    try:
        bundle = load_bundle(args.bundle)
        bounds = load_bounds(args.bounds)
        config = RunConfig(
            bundle_root=str(args.bundle),
            output_dir=str(args.output),
            models=tuple(s for s in args.models.split(",") if s),
            metric_subset=tuple(args.metrics),
            gamma=args.gamma,
            alpha_dyn=args.alpha_dyn,
            bounds_path=args.bounds,
            judge_mode=args.judge_mode,
            judge_endpoint=args.judge_endpoint,
            judge_model=args.judge_model,
            parallelism=args.parallelism,
            seed=args.seed,
            strict_judge_parse=args.strict_judge_parse,
        )
    except (EvalError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    result = run_evaluation(config, bundle, bounds)
    for model, vector in sorted(result.vectors.items()):
        print(f"{model}: EWMScore {ewm_score(vector):.2f}")
    if result.has_gaps:
        for scope, metric, reason in result.gaps:
            print(f"gap: {scope}: {metric}: {reason}")
        return EXIT_GAPS
    return EXIT_OK


def _load_vectors(input_dir: Path) -> list[tuple[MetricVector, str | None]]:
    vec_dir = input_dir / "vectors"
    if not vec_dir.is_dir():
        return []
    vectors = []
    for path in sorted(vec_dir.glob("*.json")):
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        vectors.append((MetricVector.from_dict(doc), doc.get("config_digest")))
    return vectors


def _load_optional_json(path: Path):
    if path.exists():
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    return None


def _ledger_from_json(obj) -> list[LedgerEntry]:
    return [LedgerEntry(**entry) for entry in obj]


def cmd_report(args) -> int:
    input_dir = Path(args.input)
    vectors = _load_vectors(input_dir)
    if not vectors:
        print(f"error: no metric vectors under {input_dir}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    human = _load_optional_json(input_dir / "human_scores.json") or {}
    wins = _load_optional_json(input_dir / "win_rates.json") or {}
    ledger_obj = _load_optional_json(input_dir / "task_ledger.json")
    ledger = _ledger_from_json(ledger_obj) if ledger_obj else []

    task_rates: dict[str, dict] = {}
    for entry in ledger:
        rate = analysis.success_rate(entry)
        task_rates.setdefault(entry.model_id, {}).setdefault(entry.role, {})[entry.task_id] = rate

    try:
        entries = [
            make_entry(
                v,
                human_scores=human.get(v.model_id),
                win=wins.get(v.model_id),
                task_success=task_rates.get(v.model_id, {}),
            )
            for v, _ in vectors
        ]
        digests = {v.model_id: digest for v, digest in vectors if digest}
        correlations = _compute_correlations(entries, ledger)
        out_dir = Path(args.output) if args.output else input_dir / "reports"
        formats = [f.strip() for f in args.formats.split(",") if f.strip()]
        ext = {"markdown": "md", "csv": "csv", "json": "json"}
        for fmt in formats:
            doc = analysis.emit_leaderboard(entries, fmt)
            path = out_dir / f"leaderboard.{ext[fmt]}"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(doc, encoding="utf-8", newline="\n")
        radar = {e.model_id: analysis.emit_radar(e)["axes"] for e in entries}
        dump_json(radar, out_dir / "radar.json")
        report_doc = analysis.emit_report(entries, correlations, config_digests=digests)
        (out_dir / "report.json").write_text(report_doc, encoding="utf-8", newline="\n")
        if correlations:
            dump_json(correlations, out_dir / "correlations.json")
    except EvalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GAPS
    print(f"wrote reports for {len(entries)} models to {out_dir}")
    return EXIT_OK


def _compute_correlations(entries, ledger) -> list[dict]:
    correlations = []
    ewm = {e.model_id: e.ewm_score for e in entries}
    with_human = {
        e.model_id: e.human_scores for e in entries if e.human_scores
    }
    for dim in analysis.HUMAN_DIMENSIONS:
        series = {
            mid: scores[dim] for mid, scores in with_human.items() if dim in scores
        }
        if len(series) >= 3 and set(series) <= set(ewm):
            sub = {mid: ewm[mid] for mid in series}
            try:
                correlations.append(
                    correlate_series(sub, series, x_name="ewm_score", y_name=f"human_{dim}")
                )
            except EvalError:
                pass
    roles_present = {e.role for e in ledger}
    if {analysis.POLICY_EVAL_WM, analysis.POLICY_EVAL_SIM} <= roles_present:
        try:
            correlations.append(policy_evaluator_correlation(ledger))
        except (EvalError, ValueError):
            pass
    for role in (analysis.DATA_ENGINE, analysis.ACTION_PLANNER):
        rates = analysis.pooled_rates(ledger, role)
        shared = {mid: rates[mid] for mid in rates if mid in ewm}
        if len(shared) >= 3:
            try:
                correlations.append(
                    correlate_series(
                        {mid: ewm[mid] for mid in shared},
                        shared,
                        x_name="ewm_score",
                        y_name=f"{role}_success",
                    )
                )
            except EvalError:
                pass
    return correlations


def cmd_correlate(args) -> int:
    input_dir = Path(args.input)
    vectors = _load_vectors(input_dir)
    if not vectors:
        print(f"error: no metric vectors under {input_dir}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    human = _load_optional_json(input_dir / "human_scores.json") or {}
    ledger_obj = _load_optional_json(input_dir / "task_ledger.json")
    ledger = _ledger_from_json(ledger_obj) if ledger_obj else []
    entries = [make_entry(v, human_scores=human.get(v.model_id)) for v, _ in vectors]
    correlations = _compute_correlations(entries, ledger)
    if not correlations:
        print("error: nothing to correlate (need human scores or ledgers)", file=sys.stderr)
        return EXIT_INPUT_ERROR
    out = Path(args.output) if args.output else input_dir / "reports" / "correlations.json"
    dump_json(correlations, out)
    for c in correlations:
        extra = f", mean gap {c['mean_gap']:+.4f}" if "mean_gap" in c else ""
        print(f"{c['x']} vs {c['y']}: r={c['r']:.4f} (n={c['n']}){extra}")
    return EXIT_OK


def cmd_import_human(args) -> int:
    out_dir = Path(args.output)
    if not args.scores and not args.pairwise:
        print("error: provide --scores and/or --pairwise", file=sys.stderr)
        return EXIT_INPUT_ERROR
    try:
        if args.scores:
            sums: dict[str, dict] = {}
            counts: dict[str, dict] = {}
            with open(args.scores, newline="", encoding="utf-8") as fh:
                for row in csv.DictReader(fh):
                    model = row["model_id"]
                    dim = row["dimension"]
                    value = normalize_human_score(int(row["likert"]))
                    sums.setdefault(model, {}).setdefault(dim, 0.0)
                    counts.setdefault(model, {}).setdefault(dim, 0)
                    sums[model][dim] += value
                    counts[model][dim] += 1
            scores = {
                model: {dim: sums[model][dim] / counts[model][dim] for dim in sorted(sums[model])}
                for model in sorted(sums)
            }
            dump_json(scores, out_dir / "human_scores.json")
            print(f"imported human scores for {len(scores)} models")
        if args.pairwise:
            comparisons = []
            with open(args.pairwise, newline="", encoding="utf-8") as fh:
                for row in csv.DictReader(fh):
                    comparisons.append(
                        PairwiseComparison(
                            model_a=row["model_a"],
                            model_b=row["model_b"],
                            video_id=row["video_id"],
                            winner=row["winner"],
                        )
                    )
            models = sorted(
                {c.model_a for c in comparisons} | {c.model_b for c in comparisons}
            )
            rates = {model: win_rate(model, comparisons) for model in models}
            dump_json(rates, out_dir / "win_rates.json")
            print(f"imported {len(comparisons)} comparisons for {len(rates)} models")
    except (OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    return EXIT_OK


def cmd_import_tasks(args) -> int:
    try:
        entries = []
        with open(args.csv, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                entries.append(
                    LedgerEntry(
                        model_id=row["model_id"],
                        task_id=row["task_id"],
                        trials=int(row["trials"]),
                        successes=int(row["successes"]),
                        role=row["role"],
                    )
                )
    except (OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    dump_json([e.__dict__ for e in entries], Path(args.output) / "task_ledger.json")
    print(f"imported {len(entries)} ledger entries")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "validate": cmd_validate,
        "evaluate": cmd_evaluate,
        "report": cmd_report,
        "correlate": cmd_correlate,
        "import-human": cmd_import_human,
        "import-tasks": cmd_import_tasks,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
