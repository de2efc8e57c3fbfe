"""Train and evaluate one environment over several master seeds.

Example::

    python3 scripts/run_seeds.py switches --seeds 0 1 2 3 4 --modes ap,baseline --out runs/switches
"""

import argparse
import dataclasses
import json
import logging
import time
from pathlib import Path

from attrplan.config import ExperimentConfig, preset
from attrplan.metrics import format_seed_summary, seed_summary
from attrplan.pipeline import run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("env", choices=("switches", "crafting", "blocks"))
    ap.add_argument("--config", help="config JSON; defaults to the environment preset")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--modes", default="ap")
    ap.add_argument("--tasks", type=int, default=None)
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(asctime)s %(message)s")

    base = ExperimentConfig.load(args.config) if args.config else preset(args.env)
    modes = tuple(args.modes.split(","))
    per = {}
    for seed in args.seeds:
        t0 = time.time()
        res = run_experiment(dataclasses.replace(base, seed=seed), args.out / f"seed{seed}", modes, args.tasks)
        for r in res:
            per.setdefault(f"{r.mode}/{r.kind}", []).append(r.success_rate)
        print(f"seed {seed}: " + ", ".join(f"{r.mode}/{r.kind} {r.success_rate:.3f}" for r in res)
              + f" ({time.time() - t0:.0f}s)", flush=True)
    summary = {k: seed_summary(v) for k, v in per.items()}
    for k, s in summary.items():
        print(f"{k}: {format_seed_summary(s)}")
    (args.out / "seeds.json").write_text(json.dumps({"seeds": args.seeds, "summary": summary}, indent=1) + "\n")


if __name__ == "__main__":
    main()
