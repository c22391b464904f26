import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from painmil import GeneratorConfig, make_bags, synthesize

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_sequences():
    return synthesize(GeneratorConfig(n_sequences=24, len_min=120, len_max=180, seed=11))


@pytest.fixture(scope="session")
def compact_bags(small_sequences):
    return make_bags(small_sequences, "compact", "ncut")


@pytest.fixture(scope="session")
def clustered_bags(small_sequences):
    return make_bags(small_sequences, "clustered", "ncut")


def random_bags(rng, n_bags=8, d=5, max_inst=6, both_classes=True):
    """Random bags with labels in {-1, +1}; both classes present if asked."""
    X = [rng.random((int(rng.integers(1, max_inst + 1)), d)) for _ in range(n_bags)]
    y = np.where(rng.random(n_bags) < 0.5, 1, -1)
    if both_classes:
        y[0], y[1] = 1, -1
    return X, y


# one "PASS"/"FAIL" line per acceptance criterion, shown in the terminal summary
ACCEPTANCE_LINES = []


def report(criterion, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'}  {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
