import os
from pathlib import Path

import pytest

from smwss import SolverSettings, assemble
from smwss.cli import build_model
from smwss.config import parse_config


@pytest.fixture(scope="session")
def cache_dir(request) -> Path:
    env = os.environ.get("SMWSS_CACHE")
    return Path(env) if env else Path(request.config.cache.mkdir("smwss"))


@pytest.fixture(scope="session")
def default_model(cache_dir):
    return build_model(parse_config(None), threads=4, cache=cache_dir)


@pytest.fixture(scope="session")
def cp_table(default_model):
    """Default mirror and atom at 300 K, cached between sessions."""
    return default_model.table


@pytest.fixture(scope="session")
def default_tp(cp_table):
    return assemble(cp_table)


@pytest.fixture(scope="session")
def coarse_settings():
    return SolverSettings(density=2000.0, lattice_points=400)


@pytest.fixture(scope="session")
def coarse_result(default_tp, coarse_settings):
    return coarse_settings.run(default_tp)


@pytest.fixture(scope="session")
def default_result(default_tp):
    return SolverSettings().run(default_tp)


_ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(n, ok, detail)``."""
    store = request.config.stash[_ACCEPTANCE]

    def record(n: int, ok: bool, detail: str):
        store[n] = (bool(ok), detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_ACCEPTANCE, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(store):
        ok, detail = store[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
