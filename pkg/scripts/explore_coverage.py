"""Distinct crafting edges found by random and count-based exploration across budgets."""

import argparse
import dataclasses
import time

import numpy as np

from attrplan.config import preset
from attrplan.explorer import reachable_edges
from attrplan.pipeline import build_detector, build_env, run_explore


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--budgets", type=int, nargs="+", default=[20_000, 100_000, 300_000])
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()
    cfg = preset("crafting")
    env = build_env(cfg)
    det = build_detector(cfg, env)
    bfs = reachable_edges(env, range(3))
    print(f"reachable edges (BFS): {len(bfs)}")
    for budget in args.budgets:
        for policy in ("random", "count"):
            t0 = time.time()
            found = []
            for seed in range(args.seeds):
                c = dataclasses.replace(cfg, seed=seed,
                                        explore=dataclasses.replace(cfg.explore, policy=policy, steps=budget))
                g = run_explore(c, env, det)
                edges = {(g.nodes[i], g.nodes[j]) for i, j in g.explore}
                assert edges <= bfs
                found.append(len(edges))
            print(f"{budget:>9} {policy:>6}: mean {np.mean(found):.1f} min {min(found)} max {max(found)} "
                  f"({time.time() - t0:.0f}s)", flush=True)


if __name__ == "__main__":
    main()
