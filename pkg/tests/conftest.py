import pytest

from hh2fem.adaptive import LoopConfig
from hh2fem.harness import run

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance summary")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def singular_p1_records():
    """Short known-singularity run shared by the harness/report/cli tests."""
    config = LoopConfig(theta=0.5, p=1, mode="m3", variant="lambda-res",
                        max_elements=400)
    return run("singular-known", config)


@pytest.fixture(scope="session")
def smooth_p2_records():
    """Short smooth p=2 run exercising the apx columns."""
    config = LoopConfig(theta=0.5, p=2, mode="m3p", variant="lambda-osc",
                        max_elements=150)
    return run("smooth", config)
