"""Command-line interface.

Exit codes: 0 success, 1 validation error (bad config, missing or mismatched
artifacts), 2 runtime failure. Errors are reported on stderr as one JSON line.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, preset
from .core import AttributeVector, ContractError, GoalSpec, make_rng
from .executor import aliasing_report, sample_attempt_traces, summarize_aliasing
from .planner import Planner
from .pipeline import (ArtifactDir, load_artifacts, open_config, run_experiment, run_pipeline, stage_baseline,
                       stage_eval, stage_explore, stage_export, stage_fit_detector, stage_train)
from .tasks import generate_tasks

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


def _config(args, required: bool = True) -> ExperimentConfig | None:
    if args.config is None:
        if required:
            raise ConfigError("--config is required for this command")
        return None
    return ExperimentConfig.load(args.config)


def _resolved(args) -> ExperimentConfig:
    """Config for post-training verbs: --config if given (must match), else the stored one."""
    stored = open_config(args.artifacts)
    cfg = _config(args, required=False)
    if cfg is not None and cfg.hash != stored.hash:
        raise ConfigError(f"config hash {cfg.hash} does not match artifacts ({stored.hash})")
    return stored


def _print(doc) -> None:
    print(json.dumps(doc, sort_keys=True, indent=1))


def cmd_init_config(args) -> None:
    print(preset(args.env).to_json(), end="")


def cmd_run(args) -> None:
    cfg = _config(args)
    if args.modes:
        results = run_experiment(cfg, args.artifacts, modes=tuple(args.modes.split(",")), count=args.tasks)
        _print([r.aggregates() for r in results])
    else:
        run_pipeline(cfg, args.artifacts)
        _print({"artifacts": str(args.artifacts), "config_hash": cfg.hash})


def cmd_fit_detector(args) -> None:
    det = stage_fit_detector(_config(args), args.artifacts)
    _print({"mode": det.mode, "heldout_error": getattr(det, "heldout_error", None)})


def cmd_explore(args) -> None:
    g = stage_explore(_config(args), args.artifacts)
    _print({"nodes": len(g.nodes), "explore_edges": len(g.explore), "explore_total": g.explore_total})


def cmd_train(args) -> None:
    _, stats = stage_train(_config(args), args.artifacts)
    _print({"steps": stats.steps, "attempts": stats.attempts, "success_rate": stats.success_rate})


def cmd_train_baseline(args) -> None:
    _, stats = stage_baseline(_config(args), args.artifacts)
    _print({"steps": stats.steps, "episodes": stats.attempts, "success_rate": stats.success_rate})


def _parse_goal(text: str, n: int) -> GoalSpec:
    if ":" in text:
        mask, values = text.split(":", 1)
        return GoalSpec.from_strings(mask, values)
    return GoalSpec.from_strings("1" * n, text)


def cmd_plan(args) -> None:
    cfg = _resolved(args)
    art = load_artifacts(args.artifacts, cfg)
    if art.graph is None:
        raise ConfigError("planning needs graph.json; run `train` first")
    n = art.env.n_attributes
    if args.kind is not None:
        task = generate_tasks(art.env, args.kind, args.index + 1, cfg.eval.task_seed)[args.index]
        start, goal = art.detector.detect_bits(task.start(art.env)), task.goal
    else:
        if args.start is None or args.goal is None:
            raise ConfigError("give --start and --goal, or --kind and --index")
        if len(args.start) != n:
            raise ConfigError(f"--start must have {n} bits")
        start, goal = AttributeVector.from_string(args.start).bits, _parse_goal(args.goal, n)
        if goal.n != n:
            raise ConfigError(f"--goal must have {n} bits")
    p = Planner(art.graph, "ablated" if args.ablated else "decayed").plan(start, goal)
    _print({"nodes": [str(v) for v in p.nodes], "probs": list(p.probs), "cost": p.cost,
            "success_probability": p.success_probability, "config_hash": cfg.hash})


def cmd_eval(args) -> None:
    cfg = _resolved(args)
    kinds = [args.kind] if args.kind else None
    results = stage_eval(cfg, args.artifacts, modes=tuple(args.mode.split(",")), kinds=kinds, count=args.tasks)
    _print([r.aggregates() for r in results])


def cmd_ablate(args) -> None:
    cfg = _resolved(args)
    kinds = [args.kind] if args.kind else None
    results = stage_eval(cfg, args.artifacts, modes=("ap", "ap-ablated"), kinds=kinds, count=args.tasks)
    out = []
    for full, abl in zip(results[::2], results[1::2]):
        out.append({"kind": full.kind, "ap": full.success_rate, "ap-ablated": abl.success_rate,
                    "gap": full.success_rate - abl.success_rate})
    _print(out)


def cmd_aliasing_report(args) -> None:
    cfg = _resolved(args)
    art = load_artifacts(args.artifacts, cfg)
    if art.graph is None or art.policy is None:
        raise ConfigError("the aliasing report needs graph.json and policy.npz; run `train` first")
    traces = sample_attempt_traces(art.env, art.detector, art.policy, art.graph, args.attempts,
                                   make_rng(cfg.seed, "aliasing"), cfg.train.t_max)
    report = aliasing_report(art.graph, traces, art.env.source_key)
    edges = sorted(report.values(), key=lambda e: (-e.spread, -e.attempts, e.src.bits, e.dst.bits))
    doc = {
        "config_hash": cfg.hash,
        "summary": summarize_aliasing(report),
        "edges": [{"from": str(e.src), "to": str(e.dst), "attempts": e.attempts, "spread": e.spread,
                   "edge_probability": e.edge_probability,
                   "groups": {str(k): {"attempts": a, "successes": s} for k, (a, s) in sorted(e.groups.items(), key=str)}}
                  for e in edges[:args.top]],
    }
    d = ArtifactDir(args.artifacts, cfg)
    d.record("aliasing-report", [d.write_text("aliasing.json", json.dumps(doc, sort_keys=True, indent=1) + "\n")])
    _print(doc["summary"])


def cmd_export(args) -> None:
    cfg = _resolved(args)
    summary = stage_export(cfg, args.artifacts)
    _print({"results": summary["results"], "metrics": str(Path(args.artifacts) / "metrics")})


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="attrplan", description="Attribute-space planning experiments.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def verb(name, fn, config_required=True, help=None):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", required=config_required, help="experiment config (JSON)")
        p.add_argument("--artifacts", required=True, type=Path, help="artifact directory")
        p.set_defaults(fn=fn)
        return p

    p = sub.add_parser("init-config", help="print the default config for an environment")
    p.add_argument("--env", required=True, choices=("switches", "crafting", "blocks"))
    p.set_defaults(fn=cmd_init_config)

    p = verb("run", cmd_run, help="full training pipeline (optionally followed by evaluation)")
    p.add_argument("--modes", default=None, help="comma-separated evaluation modes: ap, ap-ablated, baseline")
    p.add_argument("--tasks", type=int, default=None)
    verb("fit-detector", cmd_fit_detector, help="build or fit the attribute detector")
    verb("explore", cmd_explore, help="exploration phase")
    verb("train", cmd_train, help="policy phase; freezes the graph")
    verb("train-baseline", cmd_train_baseline, help="reactive REINFORCE baseline")
    p = verb("plan", cmd_plan, config_required=False, help="shortest plan between attribute sets")
    p.add_argument("--start", help="start attributes, bit 0 first")
    p.add_argument("--goal", help="goal values, or MASK:VALUES, bit 0 first")
    p.add_argument("--kind", help="take start and goal from a generated task of this kind")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--ablated", action="store_true")
    p = verb("eval", cmd_eval, config_required=False, help="evaluate on generated task suites")
    p.add_argument("--mode", default="ap")
    p.add_argument("--kind", default=None)
    p.add_argument("--tasks", type=int, default=None)
    p = verb("ablate", cmd_ablate, config_required=False, help="decayed vs exploration-frequency edge estimates")
    p.add_argument("--kind", default=None)
    p.add_argument("--tasks", type=int, default=None)
    p = verb("aliasing-report", cmd_aliasing_report, config_required=False, help="per-edge success by source group")
    p.add_argument("--attempts", type=int, default=20000)
    p.add_argument("--top", type=int, default=50)
    verb("export", cmd_export, config_required=False, help="write metrics tables")
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        args.fn(args)
    except (ContractError, FileNotFoundError, json.JSONDecodeError) as err:
        print(json.dumps({"error": "validation", "reason": str(err)}), file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as err:  # noqa: BLE001
        print(json.dumps({"error": "runtime", "type": type(err).__name__, "reason": str(err)}), file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
