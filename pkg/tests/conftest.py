from __future__ import annotations

import os
import time

import pytest
from hypothesis import settings

from wtmrd.simulation import run_scenario
from wtmrd.workload import ScenarioConfig

settings.register_profile("default", deadline=None, max_examples=100)
settings.register_profile("ci", deadline=None, max_examples=300)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

REFERENCE_SEEDS = tuple(range(1, 11))
REFERENCE_VARIANTS = ("wtmrd", "noclass", "threshold:1")

# filled by test_acceptance, echoed at the end of the session
ACCEPTANCE_LINES: list[str] = []
# wall-clock seconds spent building each variant's reference batch
REFERENCE_SECONDS: dict[str, float] = {}


@pytest.fixture(scope="session")
def reference_reports():
    """Reports of the 100-node, 20% blackhole scenario for every variant and seed."""
    out = {}
    for variant in REFERENCE_VARIANTS:
        t0 = time.perf_counter()
        out[variant] = [run_scenario(ScenarioConfig(nodes=100, seed=s), variant, record=False).report
                        for s in REFERENCE_SEEDS]
        REFERENCE_SECONDS[variant] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def small_run():
    """A recorded 50-node run shared by transcript-level tests."""
    return run_scenario(ScenarioConfig(nodes=50, seed=4, sim_time=100))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
