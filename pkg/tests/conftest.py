import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@st.composite
def simplex_rows(draw, n_rows=None, n_cols=None, min_mass=1e-3):
    """Strictly positive row-stochastic matrices."""
    r = draw(st.integers(1, 4)) if n_rows is None else n_rows
    c = draw(st.integers(2, 5)) if n_cols is None else n_cols
    w = draw(st.lists(st.floats(min_mass, 1.0), min_size=r * c, max_size=r * c))
    m = np.array(w).reshape(r, c)
    m[:, 0] += 1e-3  # keep every row normalizable
    return m / m.sum(axis=1, keepdims=True)


def random_policy(rng, n_contexts, n_actions):
    return rng.dirichlet(np.ones(n_actions), size=n_contexts)


_ACCEPTANCE: list = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion, then assert."""

    def report(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append((number, line))
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
