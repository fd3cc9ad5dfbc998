from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from acceptance_registry import RESULTS

settings.register_profile("artifact", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("artifact")


@pytest.fixture
def rng():
    return np.random.default_rng(20260417)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        ok, detail = RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
