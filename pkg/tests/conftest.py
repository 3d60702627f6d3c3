import numpy as np
import pytest

from orsa import synthgen


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_dataset():
    """Ten devices, one outlier of each type, 400 samples each."""
    config = synthgen.SynthConfig(
        n_devices=10,
        samples_per_device=400,
        outlier_assignment={1: "type1", 2: "type2", 3: "type3", 4: "type4"},
        seed=7,
    )
    return synthgen.generate_dataset(config)


_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
