import numpy as np
import pytest

from jsrec import OperatorContext


@pytest.fixture
def identity_problem():
    """A = I_2, rows of u are (3, 4) and (0.5, 0); with mu = tau = 1 the
    solution is the row-wise shrinkage of u by one."""
    A = np.eye(2)
    u = np.array([[3.0, 4.0], [0.5, 0.0]])
    x_star = np.array([[2.4, 3.2], [0.0, 0.0]])
    return A, u, x_star


@pytest.fixture
def identity_ctx(identity_problem):
    A, u, _ = identity_problem
    return OperatorContext(A, u, tau=1.0, mu=1.0)


def random_problem(seed, m=5, N=8, omega=3):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((m, N)) / np.sqrt(m), rng.standard_normal((m, omega))


_ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one pass/fail line for an acceptance criterion."""
    def _report(label, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}" + (f": {detail}" if detail else "")
        print(line)
        _ACCEPTANCE_LINES.append(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
