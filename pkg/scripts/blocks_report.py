"""Blocks-world summary from a trained artifact directory: ablation, stacking and aliasing."""

import argparse
from pathlib import Path

from attrplan.core import make_rng
from attrplan.executor import aliasing_report, sample_attempt_traces, summarize_aliasing
from attrplan.pipeline import load_artifacts, open_config, stage_eval


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("artifacts", type=Path)
    ap.add_argument("--tasks", type=int, default=None)
    ap.add_argument("--attempts", type=int, default=5000)
    args = ap.parse_args()
    cfg = open_config(args.artifacts)
    for r in stage_eval(cfg, args.artifacts, modes=("ap", "ap-ablated"), count=args.tasks):
        print(f"{r.mode:>10} {r.kind:>15}: {r.success_rate:.3f} over {r.n} tasks "
              f"(mean steps {r.mean_steps:.1f}, replans {r.mean_replans:.2f})")
    art = load_artifacts(args.artifacts)
    traces = sample_attempt_traces(art.env, art.detector, art.policy, art.graph, args.attempts,
                                   make_rng(cfg.seed, "aliasing"), cfg.train.t_max)
    print("aliasing:", summarize_aliasing(aliasing_report(art.graph, traces, art.env.source_key)))


if __name__ == "__main__":
    main()
