import sys
import time

import numpy as np
import pytest

from cusign.config import load_config
from cusign.ugv import run_scenario


@pytest.fixture(scope="session")
def traces():
    """Bundled scenarios, run once per session."""
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = run_scenario(load_config(name))
        return cache[name]

    return get


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))


SUITE_LIMIT_S = 120.0


def pytest_sessionstart(session):
    session.config._cusign_t0 = time.perf_counter()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts = sys.modules.get("test_acceptance")
    if verdicts is not None and verdicts.VERDICTS:
        terminalreporter.section("acceptance")
        for _, head, details in sorted(verdicts.VERDICTS):
            terminalreporter.write_line(head)
            for line in details:
                terminalreporter.write_line(line)
    elapsed = time.perf_counter() - config._cusign_t0
    status = "PASS" if elapsed < SUITE_LIMIT_S else "FAIL"
    terminalreporter.write_line(f"suite runtime {elapsed:.1f} s (limit {SUITE_LIMIT_S:.0f} s): {status}")
