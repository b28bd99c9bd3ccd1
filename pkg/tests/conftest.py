import pytest

from bergman_kit import WeightSpec, make_weight


@pytest.fixture(scope="session")
def w1():
    return make_weight(WeightSpec())


@pytest.fixture(scope="session")
def w2():
    return make_weight(WeightSpec(alpha=2.0))


ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record ``(passed, detail)`` for a numbered acceptance criterion."""
    def record(n, passed, detail):
        ACCEPTANCE[n] = (bool(passed), detail)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
