import numpy as np
import pytest

from thrombolr.synth import default_truth, generate


@pytest.fixture(scope="session")
def small_synth():
    """Lognormal planted table, 20 000 rows over x1..x6."""
    table, truth = generate(default_truth(distribution="lognormal", sigma=0.5), 20_000, 6, 3)
    return table, truth


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(module, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
