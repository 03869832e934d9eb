import random
from fractions import Fraction

import pytest

from dioph_count.exact import QMatrix

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


def random_qmatrix(rng: random.Random, n: int, max_num=50, max_den=60) -> QMatrix:
    return QMatrix(
        [[Fraction(rng.randint(-max_num, max_num), rng.randint(1, max_den)) for _ in range(n)] for _ in range(n)]
    )


@pytest.fixture
def rng():
    return random.Random(20240501)
