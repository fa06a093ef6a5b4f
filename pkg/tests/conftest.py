import itertools

import numpy as np
import pytest


def brute_force_upper(q, hit, p):
    """P(sum q_i B_i >= t) with B_i ~ Bernoulli(p), by listing all 2^I patterns."""
    q = np.asarray(q, dtype=float)
    t = q[np.asarray(hit, dtype=bool)].sum()
    total = 0.0
    for bits in itertools.product((0, 1), repeat=len(q)):
        b = np.array(bits)
        if (q * b).sum() >= t - 1e-9:
            total += p ** b.sum() * (1 - p) ** (len(q) - b.sum())
    return total


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def toy_csv(tmp_path):
    path = tmp_path / "pairs.csv"
    path.write_text("y\n1.5\n0.7\n2.2\n0.3\n", encoding="utf-8")
    return path


ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
