import pytest

from tcfou import BernsteinFunction, FouModel, TcfouModel


@pytest.fixture
def stable_half():
    return BernsteinFunction.stable(0.5)


@pytest.fixture
def model():
    """H = 0.7 fOU time-changed by the 1/2-stable inverse subordinator."""
    return TcfouModel(FouModel(0.7), BernsteinFunction.stable(0.5))


ACCEPTANCE = []  # (number, passed, summary) filled by test_acceptance.py


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, text in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {text}")
