import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from attrplan.detector import ExactDetector
from attrplan.envs import make_env

settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("repo")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(params=["switches", "crafting", "blocks"])
def any_env(request):
    return make_env(request.param)


@pytest.fixture
def switches():
    return make_env("switches")


@pytest.fixture
def crafting():
    return make_env("crafting")


@pytest.fixture
def blocks():
    return make_env("blocks")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def exact(env):
    return ExactDetector(env)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


TINY = {
    "switches": {"explore": {"steps": 3000}, "train": {"steps": 4000, "warmup": 5},
                 "baseline": {"steps": 3000}, "eval": {"tasks": 15}},
    "crafting": {"explore": {"steps": 2000, "hidden": [16]}, "train": {"steps": 4000, "warmup": 5},
                 "baseline": {"steps": 3000}, "eval": {"tasks": 15}},
    "blocks": {"explore": {"steps": 3000},
               "train": {"steps": 400, "hidden": [32], "inverse_examples": 600, "inverse_epochs": 2,
                         "stats_chains": 16},
               "eval": {"tasks": 10}},
}


def tiny_config(name, seed=0, **sections):
    """Small-budget config for pipeline and CLI tests."""
    from attrplan.config import ExperimentConfig
    doc = {"version": 1, "seed": seed, "env": {"name": name}}
    for key, val in TINY[name].items():
        doc[key] = dict(val)
    for key, val in sections.items():
        doc.setdefault(key, {}).update(val)
    return ExperimentConfig.from_dict(doc)
