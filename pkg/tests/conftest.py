import pytest

from scripkit.model import make_spec

LOW_COST = (0.05, 1.0, 1.0, 0.95)
HIGH_COST = (0.15, 1.0, 1.0, 0.95)


def two_type_game(m=4):
    return make_spec([LOW_COST, HIGH_COST], ["3/10", "7/10"], 10, m, 100)


def one_type_game(m=2, h=10, n=100, **kw):
    return make_spec([LOW_COST], [1], h, m, n, **kw)


@pytest.fixture
def game():
    return two_type_game()


@pytest.fixture
def single():
    return one_type_game()


ACCEPTANCE_LINES: list[str] = []


def record(number: int, ok: bool, detail: str) -> bool:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
