import numpy as np
import pytest

from orthoate import Moments, random_realizable_moments


@pytest.fixture
def bernoulli_03_moments() -> Moments:
    """Exact residual moments of a Bernoulli(0.3) treatment indicator."""
    return Moments.from_bernoulli(0.3, 6)


def moment_sequences(n: int, max_order: int, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    return [random_realizable_moments(rng, max_order) for _ in range(n)]


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    """Collects one PASS/FAIL line per acceptance criterion for the summary."""

    def record(name: str, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"{name}: {'PASS' if passed else 'FAIL'} ({detail})")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
