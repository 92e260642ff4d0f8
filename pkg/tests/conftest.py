import numpy as np
import pytest

from dqds import driver


@pytest.fixture(autouse=True)
def per_value_budget():
    """Every solver run inside a test must keep each value within its sweep budget."""
    seen = []

    def check(stats, upsilon):
        seen.append((stats.max_iter_per_value, upsilon))

    driver.run_listeners.append(check)
    yield seen
    driver.run_listeners.remove(check)
    over = [(m, u) for m, u in seen if m > u]
    assert not over, f"per-value iteration budget exceeded: {over[:5]}"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
