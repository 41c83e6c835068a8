import math

import pytest

from pruefer import IntegratorConfig, PotentialSpec, integrate


@pytest.fixture(scope="session")
def feedback_long():
    """FeedbackSign(a=1), k=0.5, theta0=pi/4 on [0, 1e6]."""
    cfg = IntegratorConfig(k=0.5, x_end=1e6, theta0=math.pi / 4)
    return integrate(PotentialSpec.feedback_sign(1.0), cfg, strict=True)


@pytest.fixture(scope="session")
def feedback_short():
    cfg = IntegratorConfig(k=0.5, x_end=1e4, theta0=math.pi / 4)
    return integrate(PotentialSpec.feedback_sign(1.0), cfg, strict=True)


@pytest.fixture(scope="session")
def zero_long():
    cfg = IntegratorConfig(k=1.0, x_end=1e6, theta0=math.pi / 4)
    return integrate(PotentialSpec.zero(), cfg, strict=True)


ACCEPTANCE_RESULTS = {}


def record_criterion(number: int, title: str, passed: bool, detail: str):
    ACCEPTANCE_RESULTS[number] = (title, passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        title, ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(
            f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
