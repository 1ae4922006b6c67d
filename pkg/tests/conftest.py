import pytest

from fblab.mesh import Domain
from fblab.model import BoundarySpec, ProblemSpec


def interval_spec(p=2.0, gamma=1.0, lp=1.0, lm=0.0, a=-1.0, b=1.0, left=0.0, right=0.0, **kw):
    return ProblemSpec(
        p=p,
        gamma=gamma,
        lambda_plus=lp,
        lambda_minus=lm,
        domain=Domain.interval(a, b),
        boundary=BoundarySpec(kind="endpoints", values=(left, right)),
        **kw,
    )


@pytest.fixture
def jet_spec():
    return interval_spec(gamma=0.0, lp=2.0, lm=1.0, left=-1.0, right=1.0)


@pytest.fixture
def obstacle_spec():
    return interval_spec(gamma=1.0, lp=1.0, lm=0.0, left=0.0, right=0.25)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
