import numpy as np
import pytest

from hap.core import HierarchySolution, LayeredProblem


def random_problem(rng, n, layers, s_low=-10.0, c_low=-8.0, forbid=0.0):
    """Uniform random instance; ``forbid`` is the chance an off-diagonal entry is -inf."""
    s = rng.uniform(s_low, 0.0, size=(layers, n, n))
    if forbid:
        mask = rng.random((layers, n, n)) < forbid
        s[mask] = -np.inf
    c = rng.uniform(c_low, 0.0, size=(layers, n))
    return LayeredProblem.build(s, c)


def random_solution(rng, n, layers):
    """A uniformly built valid hierarchy (every layer keeps at least one exemplar)."""
    assignment = []
    active = np.arange(n)
    for _ in range(layers):
        k = rng.integers(1, len(active) + 1)
        ex = np.sort(rng.choice(active, size=k, replace=False))
        a = np.full(n, -1)
        a[active] = rng.choice(ex, size=len(active))
        a[ex] = ex
        assignment.append(a)
        active = ex
    return HierarchySolution(assignment)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def report(criterion, passed, detail):
    """Record one acceptance-criterion outcome for the end-of-run summary."""
    line = f"{'PASS' if passed else 'FAIL'} criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
