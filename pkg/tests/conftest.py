import numpy as np
import pytest

from qrnystrom.data import paper_fixture


@pytest.fixture
def example1():
    return np.array(paper_fixture("example1").matrix)


@pytest.fixture
def remark2():
    return np.array(paper_fixture("remark2").matrix)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def rel_fro(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), np.finfo(float).tiny)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
