"""Metrics export: per-task and aggregate CSV tables plus a JSON summary."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .evaluate import EvalResult

TASK_COLUMNS = ("mode", "kind", "seed", "index", "success", "steps", "replans", "reason")
AGG_COLUMNS = ("mode", "kind", "seed", "config_hash", "tasks", "excluded", "success_rate", "mean_steps", "mean_replans")


def export_metrics(results: list[EvalResult], out_dir, graph=None, config_hash: str | None = None) -> dict:
    """Write ``tasks.csv``, ``aggregates.csv`` and ``summary.json`` into ``out_dir``.

    The summary repeats the aggregates and, when a graph is given, node and
    edge counts plus a histogram of planning edge probabilities.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "tasks.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TASK_COLUMNS)
        for res in results:
            for r in res.rows:
                w.writerow([res.mode, res.kind, res.seed, r.index, int(r.success), r.steps, r.replans, r.reason])
    aggs = [res.aggregates() for res in results]
    with open(out / "aggregates.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, AGG_COLUMNS)
        w.writeheader()
        for a in aggs:
            w.writerow(a)
    summary = {"config_hash": config_hash, "results": aggs}
    if graph is not None:
        summary["graph"] = {"decayed": graph.stats("decayed"), "ablated": graph.stats("ablated")}
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=1) + "\n")
    return summary


def read_task_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def seed_summary(values) -> dict:
    """Mean and range over per-seed values."""
    vals = [float(v) for v in values]
    if not vals:
        return {"n": 0, "mean": float("nan"), "min": float("nan"), "max": float("nan"), "range": float("nan")}
    return {"n": len(vals), "mean": sum(vals) / len(vals), "min": min(vals), "max": max(vals),
            "range": max(vals) - min(vals)}


def format_seed_summary(s: dict) -> str:
    return f"{s['mean']:.3f} (range {s['min']:.3f}..{s['max']:.3f}, n={s['n']})"
