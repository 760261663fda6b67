import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for an acceptance criterion and fail on any failed check."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(n, checks):
        ok = all(passed for _, passed in checks)
        detail = "; ".join(f"{name} {'ok' if passed else 'FAIL'}" for name, passed in checks)
        lines.append((n, f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"))
        print(lines[-1][1])
        failed = [name for name, passed in checks if not passed]
        assert not failed, f"criterion {n} failed: {failed}"

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
