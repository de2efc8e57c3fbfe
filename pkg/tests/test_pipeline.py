import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from attrplan.config import ConfigError
from attrplan.evaluate import evaluate
from attrplan.metrics import export_metrics, read_task_rows, seed_summary
from attrplan.pipeline import (ArtifactError, PipelineError, build_detector, build_env, load_artifacts,
                               run_experiment, run_explore, run_pipeline, stage_baseline, stage_eval,
                               stage_explore, stage_fit_detector, stage_train)
from attrplan.tasks import generate_tasks

from conftest import tiny_config


def digest(root: Path) -> dict:
    return {str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def switches_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("sw")
    cfg = tiny_config("switches")
    run_experiment(cfg, root, ("ap", "ap-ablated", "baseline"))
    return cfg, root


@pytest.mark.parametrize("name", ["switches", "crafting", "blocks"])
def test_pipeline_is_byte_reproducible(tmp_path, name):
    cfg = tiny_config(name)
    modes = ("ap",) if name == "blocks" else ("ap", "baseline")
    run_experiment(cfg, tmp_path / "a", modes)
    run_experiment(cfg, tmp_path / "b", modes)
    a, b = digest(tmp_path / "a"), digest(tmp_path / "b")
    assert a == b
    assert {"graph.json", "policy.npz", "manifest.json", "metrics/aggregates.csv"} <= set(a)


def test_different_seed_changes_artifacts(tmp_path):
    run_pipeline(tiny_config("switches", seed=0), tmp_path / "a")
    run_pipeline(tiny_config("switches", seed=1), tmp_path / "b")
    assert digest(tmp_path / "a")["policy.npz"] != digest(tmp_path / "b")["policy.npz"]


def test_manifest_lists_every_file(switches_run):
    cfg, root = switches_run
    man = json.loads((root / "manifest.json").read_text())
    assert man["config_hash"] == cfg.hash
    assert man["stages"] == ["fit-detector", "explore", "train", "train-baseline", "eval", "export"]
    files = digest(root)
    for rel, sha in man["files"].items():
        assert files[rel] == sha


def test_every_file_carries_config_hash(switches_run):
    cfg, root = switches_run
    for name in ("config.json", "schema.json", "detector.json", "graph.json", "train.json", "baseline-train.json"):
        assert json.loads((root / name).read_text())["config_hash"] == cfg.hash
    for p in (root / "eval").glob("*.json"):
        assert json.loads(p.read_text())["config_hash"] == cfg.hash


def test_empty_exploration_is_a_pipeline_error(tmp_path):
    cfg = tiny_config("switches", explore={"steps": 0})
    with pytest.raises(PipelineError, match="no transitions"):
        run_pipeline(cfg, tmp_path)


def test_full_switches_exploration_finds_every_color_assignment():
    cfg = tiny_config("switches", explore={"steps": 200_000})
    env = build_env(cfg)
    g = run_explore(cfg, env, build_detector(cfg, env))
    assert len(g.nodes) == 4**4


def test_stage_order_enforced(tmp_path):
    cfg = tiny_config("switches")
    with pytest.raises(ArtifactError):
        stage_explore(cfg, tmp_path)
    stage_fit_detector(cfg, tmp_path)
    with pytest.raises(ArtifactError):
        stage_train(cfg, tmp_path)
    stage_explore(cfg, tmp_path)
    stage_train(cfg, tmp_path)
    with pytest.raises(ArtifactError, match="frozen"):
        stage_train(cfg, tmp_path)


def test_mismatched_config_rejected(switches_run, tmp_path):
    cfg, root = switches_run
    other = tiny_config("switches", seed=5)
    with pytest.raises(ArtifactError):
        load_artifacts(root, other)
    with pytest.raises(ArtifactError):
        stage_explore(other, root)


def test_tampered_artifact_hash_rejected(switches_run, tmp_path):
    _, root = switches_run
    copy = tmp_path / "copy"
    copy.mkdir()
    for p in root.glob("*.*"):
        (copy / p.name).write_bytes(p.read_bytes())
    doc = json.loads((copy / "graph.json").read_text())
    doc["config_hash"] = "0" * 16
    (copy / "graph.json").write_text(json.dumps(doc))
    with pytest.raises(ArtifactError, match="graph"):
        load_artifacts(copy)


def test_missing_config_rejected(tmp_path):
    with pytest.raises(ArtifactError):
        load_artifacts(tmp_path)


def test_evaluation_leaves_training_artifacts_untouched(switches_run):
    cfg, root = switches_run
    before = {k: v for k, v in digest(root).items() if not k.startswith(("eval/", "metrics/", "manifest"))}
    stage_eval(cfg, root, modes=("ap", "baseline"), count=7)
    after = {k: v for k, v in digest(root).items() if not k.startswith(("eval/", "metrics/", "manifest"))}
    assert before == after


def test_task_outcomes_independent_of_suite_length(switches_run):
    cfg, root = switches_run
    art = load_artifacts(root)
    tasks = generate_tasks(art.env, "multi-step", 12, cfg.eval.task_seed)
    full = evaluate(art, tasks, "ap", seed=3, budget=40)
    part = evaluate(art, tasks[:6], "ap", seed=3, budget=40)
    assert part.rows == [r for r in full.rows if r.index < 6]


def test_evaluation_mode_errors(switches_run, tmp_path):
    cfg, root = switches_run
    art = load_artifacts(root)
    tasks = generate_tasks(art.env, "multi-step", 2, 0)
    with pytest.raises(ConfigError):
        evaluate(art, tasks, "oracle")
    art.baseline = None
    with pytest.raises(ConfigError):
        evaluate(art, tasks, "baseline")


def test_excluded_tasks_are_counted(switches_run):
    cfg, root = switches_run
    art = load_artifacts(root)
    tasks = generate_tasks(art.env, "multi-step", 300, cfg.eval.task_seed)
    res = evaluate(art, tasks, "ap", budget=5)
    presolved = sum(art.detector.detect_bits(t.start(art.env)) == t.goal.values for t in tasks)
    assert res.excluded == presolved and res.n + res.excluded == 300


def test_blocks_has_no_reactive_baseline(tmp_path):
    cfg = tiny_config("blocks")
    stage_fit_detector(cfg, tmp_path)
    with pytest.raises(ConfigError):
        stage_baseline(cfg, tmp_path)


def test_metrics_tables_agree(switches_run):
    _, root = switches_run
    rows = read_task_rows(root / "metrics" / "tasks.csv")
    with open(root / "metrics" / "aggregates.csv", newline="") as fh:
        aggs = list(csv.DictReader(fh))
    assert aggs
    for a in aggs:
        mine = [r for r in rows if r["mode"] == a["mode"] and r["kind"] == a["kind"]]
        assert len(mine) == int(a["tasks"])
        assert np.mean([int(r["success"]) for r in mine]) == pytest.approx(float(a["success_rate"]))
        assert np.mean([int(r["steps"]) for r in mine]) == pytest.approx(float(a["mean_steps"]))
    summary = json.loads((root / "metrics" / "summary.json").read_text())
    assert summary["graph"]["decayed"]["nodes"] == summary["graph"]["ablated"]["nodes"]


def test_metrics_with_no_results_are_header_only(tmp_path):
    export_metrics([], tmp_path)
    assert (tmp_path / "tasks.csv").read_text().strip().count("\n") == 0
    assert (tmp_path / "aggregates.csv").read_text().startswith("mode,kind,seed")
    assert json.loads((tmp_path / "summary.json").read_text())["results"] == []


def test_seed_summary():
    s = seed_summary([0.5, 0.7, 0.6])
    assert s["mean"] == pytest.approx(0.6) and s["range"] == pytest.approx(0.2) and s["n"] == 3
    assert seed_summary([])["n"] == 0
