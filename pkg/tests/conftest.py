import numpy as np
import pytest

from momentwgan import autodiff as ad


@pytest.fixture(autouse=True)
def float64():
    """Gradient tolerances need double precision; restore whatever was set."""
    with ad.precision(np.float64):
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, read from recorded properties."""
    lines = []
    for outcome in ("passed", "failed"):
        for report in terminalreporter.stats.get(outcome, []):
            if report.when != "call":
                continue
            for key, value in report.user_properties:
                if key == "criterion":
                    lines.append((value[0], f"{'PASS' if outcome == 'passed' else 'FAIL'} criterion {value[0]}: {value[1]}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
