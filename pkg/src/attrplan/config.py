"""Experiment configuration: nested dataclasses with per-environment presets.

Config documents are versioned JSON. Missing keys take the preset value for
the named environment; unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .core import ContractError

CONFIG_VERSION = 1


class ConfigError(ContractError):
    pass


@dataclass
class EnvConfig:
    name: str = "switches"
    size: int | None = None  # grid side for the grid worlds; None keeps the environment default


@dataclass
class DetectorConfig:
    mode: str = "exact"  # exact | learned | noisy
    eps: float = 0.014  # per-bit flip rate (noisy)
    labeled: int = 10_000  # labelled pairs (learned)
    epochs: int = 300
    lr: float = 0.2


@dataclass
class ExploreConfig:
    policy: str = "random"  # random | count
    bonus: str = "smoothed"  # smoothed | sqrt
    steps: int = 200_000  # N1
    horizon: int = 80
    n_envs: int = 16
    hidden: tuple[int, ...] = (100, 100)
    lr: float = 0.01
    bonus_scale: float = 0.1
    entropy: float = 0.01
    batch_segments: int = 8


@dataclass
class TrainConfig:
    method: str = "reinforce"  # reinforce | inverse
    steps: int = 3_000_000  # N2: env steps (reinforce) or recorded attempts (inverse)
    t_max: int = 80
    hidden: tuple[int, ...] = ()
    lr: float = 0.03
    entropy: float = 0.03
    batch_segments: int = 16
    average: str = "steps"
    baseline: str = "value"
    warmup: int = 300
    value_lr: float = 0.003
    n_envs: int = 16
    episode_len: int = 400
    # inverse model (blocks)
    inverse_examples: int = 100_000
    inverse_epochs: int = 10
    inverse_lr: float = 1e-3
    stats_chains: int = 256
    stats_episode_len: int = 20


@dataclass
class GraphConfig:
    gamma: float = 0.9
    epoch_size: int = 2000
    min_attempts: float = 3.0
    prob_floor: float = 1e-6
    prob_ceiling: float = 0.99


@dataclass
class EvalConfig:
    kinds: tuple[str, ...] = ("multi-step",)
    tasks: int = 1000
    budget: int | None = None  # None means 10 * t_max
    task_seed: int = 1000
    greedy: bool = False


@dataclass
class BaselineConfig:
    mode: str = "curriculum"  # curriculum | test-tasks | none
    steps: int = 3_200_000
    horizon: int = 200
    lr: float = 0.03
    entropy: float = 0.03


@dataclass
class ExperimentConfig:
    version: int = CONFIG_VERSION
    seed: int = 0
    env: EnvConfig = field(default_factory=EnvConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    explore: ExploreConfig = field(default_factory=ExploreConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)

    @property
    def eval_budget(self) -> int:
        return self.eval.budget if self.eval.budget is not None else 10 * self.train.t_max

    def validate(self) -> "ExperimentConfig":
        from .envs import ENVIRONMENTS
        from .tasks import _VALID

        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.version == CONFIG_VERSION, f"unsupported config version {self.version}")
        need(self.env.name in ENVIRONMENTS, f"unknown environment {self.env.name!r}")
        need(self.env.size is None or (self.env.name != "blocks" and self.env.size >= 3),
             "grid size must be >= 3 and only applies to the grid worlds")
        need(self.detector.mode in ("exact", "learned", "noisy"), f"unknown detector mode {self.detector.mode!r}")
        need(0.0 <= self.detector.eps <= 1.0, "detector.eps must lie in [0, 1]")
        need(self.detector.labeled > 0 and self.detector.epochs > 0, "detector budgets must be positive")
        need(self.explore.policy in ("random", "count"), f"unknown exploration policy {self.explore.policy!r}")
        need(self.explore.bonus in ("smoothed", "sqrt"), f"unknown bonus {self.explore.bonus!r}")
        # N1 = 0 is accepted so that an empty exploration surfaces as a pipeline error
        need(self.explore.steps >= 0, "explore.steps must be nonnegative")
        need(self.explore.horizon > 0 and self.explore.n_envs > 0, "explore horizon and workers must be positive")
        need(self.train.method in ("reinforce", "inverse"), f"unknown training method {self.train.method!r}")
        need(self.train.steps > 0 and self.train.t_max > 0, "train.steps and train.t_max must be positive")
        need(self.train.average in ("segments", "steps"), f"unknown averaging {self.train.average!r}")
        need(self.train.baseline in ("episode", "step", "value"), f"unknown baseline {self.train.baseline!r}")
        need(self.train.n_envs > 0 and self.train.episode_len > 0 and self.train.batch_segments > 0,
             "training workers, episode length and batch size must be positive")
        need(self.train.inverse_examples > 0 and self.train.inverse_epochs > 0, "inverse budgets must be positive")
        need(self.train.method != "inverse" or self.env.name == "blocks",
             "the inverse-model route is only defined for the blocks world")
        need(0.0 < self.graph.gamma <= 1.0, "graph.gamma must lie in (0, 1]")
        need(self.graph.epoch_size > 0, "graph.epoch_size must be positive")
        need(0.0 < self.graph.prob_floor <= self.graph.prob_ceiling <= 1.0,
             "need 0 < prob_floor <= prob_ceiling <= 1")
        for kind in self.eval.kinds:
            need(kind in _VALID[self.env.name], f"task kind {kind!r} is not defined for {self.env.name}")
        need(self.eval.tasks > 0, "eval.tasks must be positive")
        need(self.eval.budget is None or self.eval.budget > 0, "eval.budget must be positive")
        need(self.baseline.mode in ("curriculum", "test-tasks", "none"), f"unknown baseline mode {self.baseline.mode!r}")
        need(self.baseline.mode == "none" or self.env.name in ("switches", "crafting"),
             "the reactive baseline is only defined for the grid worlds")
        need(self.baseline.steps > 0 and self.baseline.horizon > 0, "baseline budgets must be positive")
        return self

    # -- serialization ----------------------------------------------------------
    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @property
    def hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a JSON object")
        if doc.get("version") != CONFIG_VERSION:
            raise ConfigError(f"unsupported or missing config version {doc.get('version')!r}")
        env = doc.get("env", {})
        name = env.get("name", "switches") if isinstance(env, dict) else None
        if name not in PRESETS:
            raise ConfigError(f"unknown environment {name!r}")
        return _merge(preset(name), doc, "").validate()

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config is not valid JSON: {err}") from None
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_json(fh.read())


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


_OPTIONAL = {"env.size", "eval.budget"}


def _coerce(value, current, where: str):
    if value is None or current is None:
        if where not in _OPTIONAL:
            raise ConfigError(f"{where} may not be null")
        if value is not None and (isinstance(value, bool) or not isinstance(value, int)):
            raise ConfigError(f"{where} must be an integer or null")
        return value
    if isinstance(current, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where} must be a list")
        return tuple(value)
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be a boolean")
        return value
    if isinstance(current, int) and not isinstance(value, bool) and isinstance(value, int):
        return value
    if isinstance(current, float) and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(current, str) and isinstance(value, str):
        return value
    raise ConfigError(f"{where} has the wrong type ({type(value).__name__})")


def _merge(obj, doc: dict, prefix: str):
    names = {f.name: f for f in dataclasses.fields(obj)}
    unknown = sorted(set(doc) - set(names))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(prefix + k for k in unknown)}")
    updates = {}
    for k, v in doc.items():
        cur = getattr(obj, k)
        if dataclasses.is_dataclass(cur):
            if not isinstance(v, dict):
                raise ConfigError(f"{prefix}{k} must be an object")
            updates[k] = _merge(cur, v, f"{prefix}{k}.")
        else:
            updates[k] = _coerce(v, cur, prefix + k)
    return dataclasses.replace(obj, **updates)


def preset(name: str) -> ExperimentConfig:
    """Default configuration for one environment."""
    if name not in PRESETS:
        raise ConfigError(f"unknown environment {name!r}")
    return PRESETS[name]()


def _switches() -> ExperimentConfig:
    return ExperimentConfig(env=EnvConfig("switches"))


def _crafting() -> ExperimentConfig:
    return ExperimentConfig(
        env=EnvConfig("crafting"),
        explore=ExploreConfig(policy="count", steps=1_000_000),
        train=TrainConfig(steps=2_000_000),
        eval=EvalConfig(kinds=("unit-goal",)),
    )


def _blocks() -> ExperimentConfig:
    return ExperimentConfig(
        env=EnvConfig("blocks"),
        explore=ExploreConfig(policy="random", steps=2_000_000),
        train=TrainConfig(method="inverse", steps=1_000_000, t_max=1, hidden=(256, 256)),
        # the inverse model is fixed while statistics are collected, so one epoch suffices
        graph=GraphConfig(epoch_size=10**9),
        eval=EvalConfig(kinds=("multi-step", "4-stack", "underspecified"), budget=50),
        baseline=BaselineConfig(mode="none"),
    )


PRESETS = {"switches": _switches, "crafting": _crafting, "blocks": _blocks}
