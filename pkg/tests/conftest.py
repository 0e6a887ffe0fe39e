import pytest

from triadic.params import ModelParams, derive


@pytest.fixture
def ba_constants():
    """p=1, q=0, r=1: every step adds a vertex joined to the ends of a weighted edge."""
    return derive(ModelParams(1, 0, 1))


@pytest.fixture
def mixed_constants():
    return derive(ModelParams("1/2", "1/2", "1/2"))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo runs")


_CRITERIA: dict[str, str] = {}


@pytest.fixture
def criterion():
    """Record a pass/fail line for an acceptance criterion; printed in the summary."""

    def record(cid: str, passed: bool, text: str):
        line = f"{cid:<4} {'PASS' if passed else 'FAIL'}  {text}"
        _CRITERIA[cid] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for cid in sorted(_CRITERIA, key=lambda c: int(c[1:])):
            terminalreporter.write_line(_CRITERIA[cid])
