import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_unimodular(rng, n, steps=6):
    """Product of random elementary integer matrices (det = +-1)."""
    a = np.eye(n, dtype=np.int64)
    for _ in range(steps):
        i, j = rng.choice(n, size=2, replace=False)
        e = np.eye(n, dtype=np.int64)
        e[i, j] = rng.integers(-2, 3)
        a = e @ a
    if rng.random() < 0.3:
        p = np.eye(n, dtype=np.int64)[rng.permutation(n)]
        a = p @ a
    return a


_VERDICTS = []


@pytest.fixture
def verdict(request):
    """Record one pass/fail line for an acceptance criterion; returns the flag."""

    def record(label, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        print(line)
        _VERDICTS.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
