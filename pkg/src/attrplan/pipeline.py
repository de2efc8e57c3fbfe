"""End-to-end training pipeline and the artifact directory.

Layout of an artifact directory::

    manifest.json   config hash, seed, stages run, sha256 of every file
    config.json     the full resolved config
    schema.json     attribute names
    detector.json   detector mode and (learned) weights
    graph.json      transition graph (exploration counts + attempt statistics)
    policy.npz      goal-conditional policy / inverse model
    baseline.npz    reactive baseline policy (optional)
    train.json      training statistics
    eval/*.json     evaluation results
    metrics/        exported tables

Every file carries the config hash; loading rejects mixed hashes.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

from .config import ConfigError, ExperimentConfig
from .core import AttributeSchema, derive_seed, make_rng
from .detector import Detector, ExactDetector, NoisyDetector, detector_from_dict, fit, labeled_pairs
from .envs import Env, make_env
from .evaluate import EvalResult, evaluate
from .explorer import explore
from .graph import TransitionGraph
from .metrics import export_metrics
from .nets import MLP
from .policy import GoalPolicy, RewardConfig, inverse_dataset, train_inverse_model
from .tasks import generate_tasks
from .training import TrainStats, collect_inverse_statistics, train_policy, train_reactive_baseline

log = logging.getLogger(__name__)

ARTIFACT_FORMAT_VERSION = 1
FILES = {
    "config": "config.json",
    "schema": "schema.json",
    "detector": "detector.json",
    "graph": "graph.json",
    "policy": "policy.npz",
    "baseline": "baseline.npz",
    "train": "train.json",
}


class PipelineError(RuntimeError):
    pass


class ArtifactError(ConfigError):
    """Missing or inconsistent artifacts (a validation error)."""


def build_env(cfg: ExperimentConfig) -> Env:
    if cfg.env.size is not None:
        return make_env(cfg.env.name, size=cfg.env.size)
    return make_env(cfg.env.name)


def build_detector(cfg: ExperimentConfig, env: Env) -> Detector:
    mode = cfg.detector.mode
    if mode == "exact":
        return ExactDetector(env)
    if mode == "noisy":
        return NoisyDetector(env, cfg.detector.eps, derive_seed(cfg.seed, "detector") % 2**31)
    pairs = labeled_pairs(env, cfg.detector.labeled, derive_seed(cfg.seed, "labels"))
    return fit(pairs, env, epochs=cfg.detector.epochs, lr=cfg.detector.lr,
               seed=derive_seed(cfg.seed, "detector") % 2**31)


def new_graph(cfg: ExperimentConfig, env: Env) -> TransitionGraph:
    g = cfg.graph
    return TransitionGraph(env.n_attributes, g.gamma, g.epoch_size, g.min_attempts, g.prob_floor,
                           env.schema, g.prob_ceiling)


def run_explore(cfg: ExperimentConfig, env: Env, detector: Detector) -> TransitionGraph:
    """Explore phase; fills a fresh graph with exploration counts."""
    e = cfg.explore
    policy = None
    if e.policy == "count":
        policy = GoalPolicy(env, hidden=e.hidden, seed=derive_seed(cfg.seed, "explore-policy") % 2**31)
    counts, _ = explore(env, detector, e.steps, make_rng(cfg.seed, "explore"), policy=policy, bonus=e.bonus,
                        horizon=e.horizon, n_envs=e.n_envs, lr=e.lr, bonus_scale=e.bonus_scale,
                        batch_segments=e.batch_segments, entropy=e.entropy)
    if not counts.counts:
        raise PipelineError("no transitions discovered")
    graph = new_graph(cfg, env)
    counts.into_graph(graph)
    return graph


def run_train(cfg: ExperimentConfig, env: Env, detector: Detector, graph: TransitionGraph):
    """Policy phase: returns ``(policy, stats)`` and fills the graph's attempt statistics."""
    t = cfg.train
    rng = make_rng(cfg.seed, "train")
    if t.method == "inverse":
        data = inverse_dataset(env, detector, t.inverse_examples, make_rng(cfg.seed, "inverse-data"))
        policy = train_inverse_model(env, data, hidden=t.hidden, epochs=t.inverse_epochs, lr=t.inverse_lr,
                                     seed=derive_seed(cfg.seed, "inverse") % 2**31)
        stats = collect_inverse_statistics(env, detector, graph, policy, t.steps, rng, t_max=t.t_max,
                                           n_chains=t.stats_chains, episode_len=t.stats_episode_len, greedy=False)
    else:
        policy = GoalPolicy(env, hidden=t.hidden, seed=derive_seed(cfg.seed, "policy") % 2**31)
        stats = train_policy(env, detector, graph, policy, t.steps, rng, reward=RewardConfig(t_max=t.t_max),
                             lr=t.lr, n_envs=t.n_envs, batch_segments=t.batch_segments, entropy=t.entropy,
                             episode_len=t.episode_len, average=t.average, baseline=t.baseline,
                             warmup=t.warmup, value_lr=t.value_lr)
    return policy, stats


def run_baseline(cfg: ExperimentConfig, env: Env, detector: Detector):
    b, t = cfg.baseline, cfg.train
    if b.mode == "none":
        raise ConfigError(f"no reactive baseline is configured for {cfg.env.name}")
    policy = GoalPolicy(env, hidden=t.hidden, seed=derive_seed(cfg.seed, "baseline-policy") % 2**31)
    stats = train_reactive_baseline(env, detector, policy, b.steps, make_rng(cfg.seed, "baseline"), mode=b.mode,
                                    horizon=b.horizon, lr=b.lr, n_envs=t.n_envs, batch_segments=t.batch_segments,
                                    entropy=b.entropy, average=t.average, baseline=t.baseline, warmup=t.warmup,
                                    value_lr=t.value_lr)
    return policy, stats


# --- artifact directory ------------------------------------------------------------


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _dump_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def stats_doc(stats: TrainStats, config_hash: str) -> dict:
    return {"config_hash": config_hash, "steps": stats.steps, "attempts": stats.attempts,
            "successes": stats.successes, "success_rate": stats.success_rate, "resets": stats.resets,
            "history": list(stats.history or [])}


class ArtifactDir:
    """Single-writer view of an artifact directory bound to one config."""

    def __init__(self, root, cfg: ExperimentConfig):
        self.root = Path(root)
        self.cfg = cfg
        self.hash = cfg.hash

    def path(self, key: str) -> Path:
        return self.root / FILES.get(key, key)

    def exists(self, key: str) -> bool:
        return self.path(key).exists()

    def _manifest(self) -> dict:
        p = self.root / "manifest.json"
        if p.exists():
            doc = json.loads(p.read_text())
            if doc.get("config_hash") != self.hash:
                raise ArtifactError(f"artifact directory {self.root} was produced by config {doc.get('config_hash')}, "
                                    f"not {self.hash}")
            return doc
        return {"format": "attrplan.artifacts", "version": ARTIFACT_FORMAT_VERSION, "config_hash": self.hash,
                "seed": self.cfg.seed, "env": self.cfg.env.name, "stages": [], "files": {}}

    def record(self, stage: str, written: list[str]) -> None:
        doc = self._manifest()
        if stage not in doc["stages"]:
            doc["stages"].append(stage)
        for rel in written:
            doc["files"][rel] = _sha256(self.root / rel)
        (self.root / "manifest.json").write_text(_dump_json(doc))

    def write_text(self, key: str, text: str) -> str:
        self.root.mkdir(parents=True, exist_ok=True)
        p = self.path(key)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
        return str(p.relative_to(self.root))

    def write_bytes(self, key: str, data: bytes) -> str:
        self.root.mkdir(parents=True, exist_ok=True)
        p = self.path(key)
        p.write_bytes(data)
        return str(p.relative_to(self.root))

    # writers
    def save_config(self) -> list[str]:
        return [self.write_text("config", _dump_json({"config_hash": self.hash, "config": self.cfg.to_dict()}))]

    def save_schema(self, schema: AttributeSchema) -> str:
        doc = json.loads(schema.to_json())
        doc["config_hash"] = self.hash
        return self.write_text("schema", _dump_json(doc))

    def save_detector(self, det: Detector) -> str:
        return self.write_text("detector", _dump_json({**det.to_dict(), "config_hash": self.hash}))

    def save_graph(self, graph: TransitionGraph) -> str:
        return self.write_text("graph", graph.dumps(self.hash))

    def save_policy(self, policy: GoalPolicy, key: str = "policy") -> str:
        return self.write_bytes(key, policy.net.to_bytes({"config_hash": self.hash, "env": self.cfg.env.name}))

    def save_stats(self, stats: TrainStats, key: str = "train") -> str:
        return self.write_text(key, _dump_json(stats_doc(stats, self.hash)))

    # readers
    def _check(self, found, what: str) -> None:
        if found != self.hash:
            raise ArtifactError(f"{what} carries config hash {found}, expected {self.hash}")

    def _require(self, key: str) -> Path:
        p = self.path(key)
        if not p.exists():
            raise ArtifactError(f"missing artifact {p}")
        return p

    def load_detector(self, env: Env) -> Detector:
        doc = json.loads(self._require("detector").read_text())
        self._check(doc.get("config_hash"), "detector")
        return detector_from_dict(doc, env)

    def load_graph(self) -> TransitionGraph:
        doc = json.loads(self._require("graph").read_text())
        self._check(doc.get("config_hash"), "graph")
        return TransitionGraph.from_dict(doc)

    def load_policy(self, env: Env, key: str = "policy") -> GoalPolicy:
        data = self._require(key).read_bytes()
        self._check(MLP.read_header(data).get("meta", {}).get("config_hash"), key)
        return GoalPolicy(env, net=MLP.from_bytes(data))


def open_config(root) -> ExperimentConfig:
    """The config stored in an artifact directory."""
    p = Path(root) / FILES["config"]
    if not p.exists():
        raise ArtifactError(f"missing artifact {p}")
    doc = json.loads(p.read_text())
    cfg = ExperimentConfig.from_dict(doc["config"])
    if doc.get("config_hash") != cfg.hash:
        raise ArtifactError("stored config does not match its recorded hash")
    return cfg


@dataclass
class Artifacts:
    """Everything evaluation needs, loaded read-only from an artifact directory."""

    cfg: ExperimentConfig
    env: Env
    detector: Detector
    graph: TransitionGraph | None
    policy: GoalPolicy | None
    baseline: GoalPolicy | None

    @property
    def config_hash(self) -> str:
        return self.cfg.hash


def load_artifacts(root, cfg: ExperimentConfig | None = None) -> Artifacts:
    stored = open_config(root)
    if cfg is not None and cfg.hash != stored.hash:
        raise ArtifactError(f"config hash {cfg.hash} does not match artifacts ({stored.hash})")
    cfg = stored
    d = ArtifactDir(root, cfg)
    d._manifest()
    env = build_env(cfg)
    detector = d.load_detector(env)
    graph = d.load_graph() if d.exists("graph") else None
    policy = d.load_policy(env) if d.exists("policy") else None
    baseline = d.load_policy(env, "baseline") if d.exists("baseline") else None
    return Artifacts(cfg, env, detector, graph, policy, baseline)


# --- stages ------------------------------------------------------------------------


def stage_fit_detector(cfg: ExperimentConfig, root) -> Detector:
    d = ArtifactDir(root, cfg)
    d._manifest()
    env = build_env(cfg)
    det = build_detector(cfg, env)
    written = d.save_config() + [d.save_schema(env.schema), d.save_detector(det)]
    d.record("fit-detector", written)
    return det


def _require_stage(d: ArtifactDir, key: str, stage: str) -> None:
    if not d.exists(key):
        raise ArtifactError(f"missing {FILES[key]}; run `{stage}` first")


def stage_explore(cfg: ExperimentConfig, root) -> TransitionGraph:
    d = ArtifactDir(root, cfg)
    _require_stage(d, "detector", "fit-detector")
    env = build_env(cfg)
    graph = run_explore(cfg, env, d.load_detector(env))
    d.record("explore", [d.save_graph(graph)])
    return graph


def stage_train(cfg: ExperimentConfig, root):
    d = ArtifactDir(root, cfg)
    _require_stage(d, "graph", "explore")
    env = build_env(cfg)
    detector = d.load_detector(env)
    graph = d.load_graph()
    if graph.frozen:
        raise ArtifactError("graph is already frozen; rerun `explore` to retrain")
    policy, stats = run_train(cfg, env, detector, graph)
    graph.freeze()
    d.record("train", [d.save_graph(graph), d.save_policy(policy), d.save_stats(stats)])
    return policy, stats


def stage_baseline(cfg: ExperimentConfig, root):
    d = ArtifactDir(root, cfg)
    _require_stage(d, "detector", "fit-detector")
    env = build_env(cfg)
    policy, stats = run_baseline(cfg, env, d.load_detector(env))
    d.record("train-baseline", [d.save_policy(policy, "baseline"), d.save_stats(stats, "baseline-train.json")])
    return policy, stats


def run_pipeline(cfg: ExperimentConfig, root) -> Path:
    """Detector, exploration and policy training; writes all artifacts and the manifest.

    The config is validated before any computation. Every stage draws its
    randomness from a seed derived from ``cfg.seed`` and the stage name, so
    reruns reproduce the artifacts byte for byte.
    """
    cfg.validate()
    t0 = time.time()
    stage_fit_detector(cfg, root)
    log.info("detector ready (%.1fs)", time.time() - t0)
    graph = stage_explore(cfg, root)
    log.info("explore: %d nodes, %d edges (%.1fs)", len(graph.nodes), len(graph.explore), time.time() - t0)
    _, stats = stage_train(cfg, root)
    log.info("train: %d attempts, success %.3f (%.1fs)", stats.attempts, stats.success_rate, time.time() - t0)
    return Path(root)


def eval_key(mode: str, kind: str) -> str:
    return f"eval/{mode}_{kind}.json"


def stage_eval(cfg: ExperimentConfig, root, modes=("ap",), kinds=None, count: int | None = None) -> list[EvalResult]:
    """Evaluate the stored agents on freshly generated task suites.

    Task suites depend only on ``eval.task_seed``, so every master seed is
    scored on the same tasks.
    """
    art = load_artifacts(root, cfg)
    d = ArtifactDir(root, art.cfg)
    kinds = tuple(kinds) if kinds else art.cfg.eval.kinds
    count = art.cfg.eval.tasks if count is None else count
    results, written = [], []
    for kind in kinds:
        tasks = generate_tasks(art.env, kind, count, art.cfg.eval.task_seed)
        for mode in modes:
            res = evaluate(art, tasks, mode, seed=derive_seed(art.cfg.seed, "eval") % 2**31)
            written.append(d.write_text(eval_key(mode, kind), _dump_json(res.to_dict())))
            results.append(res)
            log.info("eval %s %s: %.3f over %d tasks", mode, kind, res.success_rate, res.n)
    d.record("eval", written)
    return results


def load_results(root) -> list[EvalResult]:
    cfg = open_config(root)
    out = []
    for p in sorted((Path(root) / "eval").glob("*.json")):
        res = EvalResult.from_dict(json.loads(p.read_text()))
        if res.config_hash != cfg.hash:
            raise ArtifactError(f"{p} carries config hash {res.config_hash}, expected {cfg.hash}")
        out.append(res)
    return out


def stage_export(cfg: ExperimentConfig | None, root) -> dict:
    stored = open_config(root)
    if cfg is not None and cfg.hash != stored.hash:
        raise ArtifactError(f"config hash {cfg.hash} does not match artifacts ({stored.hash})")
    d = ArtifactDir(root, stored)
    graph = d.load_graph() if d.exists("graph") else None
    summary = export_metrics(load_results(root), Path(root) / "metrics", graph, stored.hash)
    d.record("export", ["metrics/tasks.csv", "metrics/aggregates.csv", "metrics/summary.json"])
    return summary


def run_experiment(cfg: ExperimentConfig, root, modes=("ap",), count: int | None = None) -> list[EvalResult]:
    """Pipeline, optional reactive baseline, evaluation and metrics export in one call."""
    run_pipeline(cfg, root)
    if "baseline" in modes:
        stage_baseline(cfg, root)
    results = stage_eval(cfg, root, modes, count=count)
    stage_export(cfg, root)
    return results
