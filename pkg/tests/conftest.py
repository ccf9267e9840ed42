import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

ACCEPTANCE_LINES = []


def small_matrices(max_rows=4, max_cols=4, square=False, elements=None):
    elements = elements if elements is not None else st.floats(-1, 1, allow_nan=False, width=64)

    @st.composite
    def build(draw):
        n = draw(st.integers(1, max_rows))
        k = n if square else draw(st.integers(1, max_cols))
        return draw(hnp.arrays(np.float64, (n, k), elements=elements))

    return build()


def symmetric_matrices(max_n=4):
    return small_matrices(max_n, max_n, square=True).map(lambda A: (A + A.T) / 2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
