"""Cross-model analysis and leaderboard emission.

Task-result ledgers ingest success counts (never percentages) so rates
stay exact; correlation helpers wrap the Pearson kernel and keep the
paired values for audit. Document emission is a pure function of its
inputs: identical entries produce byte-identical markdown/CSV/JSON.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

from . import kernels
from .errors import BoundsVersionError, IncompleteVectorError
from .metrics import DIMENSIONS, METRIC_IDS
from .scoring import MetricVector, ewm_score

DATA_ENGINE = "data_engine"
ACTION_PLANNER = "action_planner"
POLICY_EVAL_WM = "policy_eval_wm"
POLICY_EVAL_SIM = "policy_eval_sim"

LEDGER_ROLES = (DATA_ENGINE, ACTION_PLANNER, POLICY_EVAL_WM, POLICY_EVAL_SIM)

HUMAN_DIMENSIONS = ("overall_quality", "instruction_following", "physical_adherence")


@dataclass(frozen=True)
class LedgerEntry:
    model_id: str
    task_id: str
    trials: int
    successes: int
    role: str

    def __post_init__(self):
        if self.role not in LEDGER_ROLES:
            raise ValueError(f"unknown ledger role {self.role!r}")
        if self.trials < 1:
            raise ValueError(f"{self.model_id}/{self.task_id}: trials must be >= 1")
        if not 0 <= self.successes <= self.trials:
            raise ValueError(
                f"{self.model_id}/{self.task_id}: successes {self.successes} outside [0, {self.trials}]"
            )


def success_rate(entry: LedgerEntry) -> float:
    """Successes over trials."""
    return entry.successes / entry.trials


def pooled_rates(entries, role: str) -> dict:
    """model_id -> pooled success rate (total successes / total trials)."""
    successes: dict[str, int] = {}
    trials: dict[str, int] = {}
    for e in entries:
        if e.role != role:
            continue
        successes[e.model_id] = successes.get(e.model_id, 0) + e.successes
        trials[e.model_id] = trials.get(e.model_id, 0) + e.trials
    return {m: successes[m] / trials[m] for m in sorted(successes)}


def correlate_series(x: dict, y: dict, x_name: str = "x", y_name: str = "y") -> dict:
    """Pearson correlation of two per-model series keyed by model id.

    Requires identical model sets; the report keeps the paired values so
    the number can be audited.
    """
    if set(x) != set(y):
        only_x = sorted(set(x) - set(y))
        only_y = sorted(set(y) - set(x))
        raise ValueError(f"model sets differ (only x: {only_x}, only y: {only_y})")
    labels = sorted(x)
    xs = [x[m] for m in labels]
    ys = [y[m] for m in labels]
    r = kernels.pearson(xs, ys)
    return {
        "x": x_name,
        "y": y_name,
        "r": r,
        "n": len(labels),
        "pairs": [{"model_id": m, "x": x[m], "y": y[m]} for m in labels],
    }


def policy_evaluator_correlation(entries) -> dict:
    """Correlation between success rates judged in-model and in-simulator.

    Pairs pooled per-policy rates under the policy_eval_wm and
    policy_eval_sim roles; also reports the mean signed gap (WM - sim).
    """
    wm = pooled_rates(entries, POLICY_EVAL_WM)
    sim = pooled_rates(entries, POLICY_EVAL_SIM)
    result = correlate_series(sim, wm, x_name="simulator_success", y_name="world_model_success")
    gaps = [p["y"] - p["x"] for p in result["pairs"]]
    result["mean_gap"] = sum(gaps) / len(gaps)
    return result


@dataclass(frozen=True)
class LeaderboardEntry:
    model_id: str
    vector: MetricVector
    ewm_score: float
    human_scores: dict | None = None  # dimension -> 0-100
    win_rate: float | None = None
    task_success: dict = field(default_factory=dict)  # role -> task_id -> rate

    def __post_init__(self):
        if not 0.0 <= self.ewm_score <= 100.0:
            raise ValueError(f"{self.model_id}: composite score outside [0, 100]")
        if self.human_scores:
            for dim, v in self.human_scores.items():
                if not 0.0 <= v <= 100.0:
                    raise ValueError(f"{self.model_id}: human score {dim}={v} outside [0, 100]")


def make_entry(vector: MetricVector, human_scores=None, win=None, task_success=None) -> LeaderboardEntry:
    return LeaderboardEntry(
        model_id=vector.model_id,
        vector=vector,
        ewm_score=ewm_score(vector),
        human_scores=human_scores,
        win_rate=win,
        task_success=task_success or {},
    )


def _sorted_entries(entries) -> list[LeaderboardEntry]:
    return sorted(entries, key=lambda e: (-e.ewm_score, e.model_id))


def _check_uniform_bounds(entries) -> str:
    versions = {e.vector.bounds_version for e in entries}
    if len(versions) != 1:
        raise BoundsVersionError(f"entries mix bounds versions {sorted(versions)}")
    return versions.pop()


def _composite_columns(entries) -> list[str]:
    cols = ["ewm_score"]
    if any(e.human_scores for e in entries):
        cols += [f"human_{d}" for d in HUMAN_DIMENSIONS]
    if any(e.win_rate is not None for e in entries):
        cols.append("win_rate")
    return cols


def _entry_cell(entry: LeaderboardEntry, col: str):
    if col == "ewm_score":
        return entry.ewm_score
    if col == "win_rate":
        return entry.win_rate
    if col.startswith("human_"):
        dim = col[len("human_") :]
        return (entry.human_scores or {}).get(dim)
    return entry.vector.values[col]


def emit_leaderboard(entries, fmt: str = "markdown") -> str:
    """Render entries sorted by composite score (ties by model id).

    Column order is fixed: the 16 metric ids in canonical order, then the
    composite columns. Output is byte-stable for identical inputs.
    """
    if not entries:
        raise ValueError("no leaderboard entries")
    version = _check_uniform_bounds(entries)
    ordered = _sorted_entries(entries)
    columns = list(METRIC_IDS) + _composite_columns(ordered)

    if fmt == "json":
        doc = {
            "bounds_version": version,
            "models": [
                {
                    "model_id": e.model_id,
                    "values": {m: e.vector.values[m] for m in METRIC_IDS},
                    "ewm_score": e.ewm_score,
                    "human_scores": e.human_scores,
                    "win_rate": e.win_rate,
                    "task_success": e.task_success,
                }
                for e in ordered
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    if fmt == "csv":
        buf = io.StringIO()
        buf.write(",".join(["model_id"] + columns) + "\n")
        for e in ordered:
            cells = [_csv_quote(e.model_id)]
            for col in columns:
                v = _entry_cell(e, col)
                cells.append("" if v is None else repr(float(v)))
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()

    if fmt == "markdown":
        buf = io.StringIO()
        buf.write(f"Bounds version: {version}\n\n")
        buf.write("| model | " + " | ".join(columns) + " |\n")
        buf.write("|" + "---|" * (len(columns) + 1) + "\n")
        for e in ordered:
            cells = [e.model_id]
            for col in columns:
                v = _entry_cell(e, col)
                if v is None:
                    cells.append("")
                elif col == "ewm_score" or col.startswith("human_"):
                    cells.append(f"{v:.2f}")
                else:
                    cells.append(f"{v:.4f}")
            buf.write("| " + " | ".join(cells) + " |\n")
        return buf.getvalue()

    raise ValueError(f"unknown leaderboard format {fmt!r}")


def _csv_quote(text: str) -> str:
    if any(c in text for c in ',"\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


def emit_radar(entry: LeaderboardEntry) -> dict:
    """Six-axis summary: each axis is the mean of its member metrics."""
    values = entry.vector.values
    missing = [m for m in METRIC_IDS if m not in values]
    if missing:
        raise IncompleteVectorError(missing)
    axes = {
        dim: sum(values[m] for m in members) / len(members)
        for dim, members in DIMENSIONS.items()
    }
    return {"model_id": entry.model_id, "axes": axes}


def emit_report(entries, correlations=None, config_digests=None) -> str:
    """Machine-readable report: models plus any computed correlations."""
    version = _check_uniform_bounds(entries)
    digests = config_digests or {}
    doc = {
        "bounds_version": version,
        "models": [
            {
                "model_id": e.model_id,
                "values": {m: e.vector.values[m] for m in METRIC_IDS},
                "ewm_score": e.ewm_score,
                "human_scores": e.human_scores,
                "win_rate": e.win_rate,
                "task_success": e.task_success,
                "radar": emit_radar(e)["axes"],
                "config_digest": digests.get(e.model_id),
            }
            for e in _sorted_entries(entries)
        ],
        "correlations": [
            {"x": c["x"], "y": c["y"], "r": c["r"], "n": c["n"]} for c in (correlations or [])
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
