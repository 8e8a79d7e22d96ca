import pytest

from portfolio_recovery.damage import RepairTimeModel
from portfolio_recovery.instances import build_instance
from portfolio_recovery.kernel import PlannerModel


def deterministic(*means):
    """Deterministic repair model; pads to the four damage states."""
    means = list(means) + [means[-1] + k + 1 for k in range(4 - len(means))]
    return RepairTimeModel(mean_days=tuple(float(m) for m in means), distribution="deterministic")


@pytest.fixture
def one_building():
    """40 occupants, Moderate damage, 20-day deterministic repair."""
    return build_instance([0], [40], [2], deterministic(10, 20))


@pytest.fixture
def planner_of():
    def make(inst, **kw):
        return PlannerModel(inst.mdp(), inst.catalog, **kw)

    return make


# acceptance criterion -> "[PASS] ..." line, filled by tests/test_acceptance.py
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for tag in sorted(ACCEPTANCE_LINES, key=lambda t: (int(t[1:].rstrip("b")), t)):
            terminalreporter.write_line(ACCEPTANCE_LINES[tag])
