from pathlib import Path

import pytest

from roomaerosol.eigenspectrum import AxisSpec

REPO = Path(__file__).resolve().parent.parent
CONFIGS = REPO / "configs"

AIR_DIFFUSIVITY = 2.42e-5

# Acceptance lines collected during the run and repeated in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def configs_dir():
    return CONFIGS


@pytest.fixture
def reflecting_absorbing_axis():
    """1 m axis, nearly reflecting at 0 and strongly absorbing at L."""
    return AxisSpec(1.0, AIR_DIFFUSIVITY, 1e-7, 1e-1)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
