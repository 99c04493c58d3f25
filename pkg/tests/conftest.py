import numpy as np
import pytest
from hypothesis import strategies as st

from aoi_sched.model import AgeFunction, ProblemInstance

FIG2 = dict(num_channels=4, success_probs=(0.2, 0.4, 0.6, 0.8), a_max=10, power_cost=15.0, alpha=0.4)


@pytest.fixture
def fig2():
    return ProblemInstance(**FIG2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@st.composite
def instances(draw, max_states=30, max_channels=6, exponential=True, horizon=1):
    C = draw(st.integers(1, max_channels))
    mus = tuple(draw(st.lists(st.floats(0.05, 0.95), min_size=C, max_size=C)))
    a_max = draw(st.integers(2, max_states))
    alpha = draw(st.floats(0.01, 0.99))
    power = draw(st.floats(0.01, 50.0))
    if exponential and draw(st.booleans()):
        age_fn = AgeFunction.exponential(draw(st.floats(0.01, 0.5)))
    else:
        age_fn = AgeFunction.linear()
    return ProblemInstance(C, mus, a_max, power, alpha, age_fn, horizon=horizon)


_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion; printed in the terminal summary."""
    def record(number, passed, detail):
        _ACCEPTANCE.append((number, bool(passed), detail))
        return bool(passed)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_ACCEPTANCE, key=lambda x: x[0]):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
