"""Evaluation suites: planner (decayed or ablated edge estimates) and the reactive baseline."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .config import ConfigError
from .executor import execute, run_policy
from .planner import Planner
from .tasks import Task

MODES = ("ap", "ap-ablated", "baseline")


@dataclass(frozen=True)
class TaskOutcome:
    index: int
    success: bool
    steps: int
    replans: int
    reason: str


@dataclass
class EvalResult:
    mode: str
    kind: str
    seed: int
    config_hash: str | None = None
    rows: list[TaskOutcome] = field(default_factory=list)
    excluded: int = 0  # tasks already satisfied at the start

    @property
    def n(self) -> int:
        return len(self.rows)

    @property
    def success_rate(self) -> float:
        return float(np.mean([r.success for r in self.rows])) if self.rows else 0.0

    @property
    def mean_steps(self) -> float:
        return float(np.mean([r.steps for r in self.rows])) if self.rows else 0.0

    @property
    def mean_replans(self) -> float:
        return float(np.mean([r.replans for r in self.rows])) if self.rows else 0.0

    def aggregates(self) -> dict:
        return {"mode": self.mode, "kind": self.kind, "seed": self.seed, "config_hash": self.config_hash,
                "tasks": self.n, "excluded": self.excluded, "success_rate": self.success_rate,
                "mean_steps": self.mean_steps, "mean_replans": self.mean_replans}

    def to_dict(self) -> dict:
        return {**self.aggregates(), "rows": [asdict(r) for r in self.rows]}

    @classmethod
    def from_dict(cls, doc: dict) -> "EvalResult":
        rows = [TaskOutcome(**r) for r in doc["rows"]]
        return cls(doc["mode"], doc["kind"], doc["seed"], doc.get("config_hash"), rows, doc.get("excluded", 0))


def evaluate(artifacts, tasks: list[Task], mode: str, seed: int = 0, budget: int | None = None,
             greedy: bool | None = None) -> EvalResult:
    """Run every task with the chosen agent under a fixed step budget.

    Tasks whose goal already holds at the start are skipped and counted in
    ``excluded``. Task ``i`` samples actions from ``default_rng([seed, i])``,
    so results do not depend on evaluation order. Artifacts are only read.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown evaluation mode {mode!r}")
    cfg, env, det = artifacts.cfg, artifacts.env, artifacts.detector
    if mode == "baseline":
        if artifacts.baseline is None:
            raise ConfigError("baseline evaluation needs baseline.npz; run `train-baseline` first")
    elif artifacts.graph is None or artifacts.policy is None:
        raise ConfigError("planner evaluation needs graph.json and policy.npz; run `train` first")
    budget = cfg.eval_budget if budget is None else budget
    greedy = cfg.eval.greedy if greedy is None else greedy
    kinds = {t.kind for t in tasks}
    result = EvalResult(mode, kinds.pop() if len(kinds) == 1 else "mixed", seed, artifacts.config_hash)
    planner = None if mode == "baseline" else Planner(artifacts.graph, "ablated" if mode == "ap-ablated" else "decayed")
    for i, task in enumerate(tasks):
        state = task.start(env)
        goal = task.goal
        if ((det.detect_bits(state) ^ goal.values) & goal.mask) == 0:
            result.excluded += 1
            continue
        rng = np.random.default_rng([seed, i])
        if planner is None:
            o = run_policy(env, det, artifacts.baseline, goal, budget, rng, state=state, greedy=greedy)
        else:
            o = execute(env, det, artifacts.policy, planner, goal, budget, rng, state=state,
                        t_max=cfg.train.t_max, greedy=greedy)
        result.rows.append(TaskOutcome(i, bool(o.success), int(o.steps), int(o.replans), o.reason))
    return result
