import pytest

from cyclicflow.grid import GridSpec, build_grid

# criterion -> (passed, detail); filled by test_acceptance
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        passed, detail = ACCEPTANCE_LINES[key]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {key}: {detail}")


@pytest.fixture(scope="session")
def square16():
    return build_grid(GridSpec.rectangle(2.0, 16, 16))


@pytest.fixture(scope="session")
def square8():
    return build_grid(GridSpec.rectangle(2.0, 8, 8))


@pytest.fixture(scope="session")
def annulus_small():
    return build_grid(GridSpec.annulus(0.5, 5.0, 8, 16))
