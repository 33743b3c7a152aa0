import numpy as np
import pytest

from dstruct.generators import path_graph
from dstruct.space import FiniteMetricSpace, IntervalGridSpace, pl_field


@pytest.fixture
def p2():
    return path_graph(2)


@pytest.fixture
def p3():
    return path_graph(3)


@pytest.fixture
def p3_metric():
    # same metric as the path, but without adjacency
    d = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]])
    return FiniteMetricSpace(d, np.ones(3))


@pytest.fixture
def unit():
    return IntervalGridSpace.uniform(1)


@pytest.fixture
def halves():
    return IntervalGridSpace.uniform(2)


@pytest.fixture
def hat():
    return pl_field([0.0, 0.5, 1.0], [0.0, 0.5, 0.0])


@pytest.fixture
def identity_field():
    return pl_field([0.0, 1.0], [0.0, 1.0])


def pytest_terminal_summary(terminalreporter):
    import sys

    lines = []
    for mod in list(sys.modules.values()):
        lines.extend(getattr(mod, "ACCEPTANCE_LINES", []) or [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
