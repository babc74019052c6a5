"""Shared fixtures. Trained models are session-scoped so the slow runs happen once."""

import time
from types import SimpleNamespace

import numpy as np
import pytest

from srmaps.environments import (
    build_grid_room,
    build_language_space,
    default_maze,
    sample_sentences,
    sample_transition_pairs,
)
from srmaps.navigation import AgentConfig, train_agent
from srmaps.network import TrainConfig, init_network, train

ROOM_PAIRS = 50_000
ROOM_TRAIN = TrainConfig(epochs=200, batch_size=64, learning_rate=1e-3, seed=0)
LANGUAGE_TRAIN = TrainConfig(epochs=50, batch_size=32, learning_rate=1e-2, seed=0)


@pytest.fixture(scope="session")
def room():
    return build_grid_room(10, 10)


@pytest.fixture(scope="session")
def maze():
    return default_maze()


@pytest.fixture(scope="session")
def language():
    return build_language_space()


@pytest.fixture(scope="session")
def room_run(room):
    """Room network after the reduced budget, with wall-clock seconds."""
    start = time.perf_counter()
    data = sample_transition_pairs(room, ROOM_PAIRS, seed=0)
    net = init_network(room.n_states, seed=0)
    report = train(net, data, ROOM_TRAIN)
    return SimpleNamespace(net=net, report=report, seconds=time.perf_counter() - start)


@pytest.fixture(scope="session")
def trained_room(room_run):
    return room_run.net, room_run.report


@pytest.fixture(scope="session")
def language_run(language):
    start = time.perf_counter()
    data = sample_sentences(language, 5_000, seed=0)
    net = init_network(language.n_states, seed=0)
    report = train(net, data, LANGUAGE_TRAIN)
    return SimpleNamespace(net=net, report=report, seconds=time.perf_counter() - start)


@pytest.fixture(scope="session")
def trained_language(language_run):
    return language_run.net, language_run.report


@pytest.fixture(scope="session")
def agent_run(maze):
    start = time.perf_counter()
    agent = train_agent(maze, AgentConfig(seed=0))
    return SimpleNamespace(agent=agent, seconds=time.perf_counter() - start)


@pytest.fixture(scope="session")
def trained_agent(agent_run):
    return agent_run.agent


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def report_criterion(request):
    """Record one PASS/FAIL line per acceptance criterion; printed in the summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE, {})

    def record(number: int, title: str, checks: dict[str, bool], details: str) -> bool:
        ok = all(checks.values())
        failed = ", ".join(k for k, v in checks.items() if not v)
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} | {details}"
        if failed:
            line += f" | failed: {failed}"
        lines[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
