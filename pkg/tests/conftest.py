import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance outcomes, filled by test_acceptance.py and printed after the run
ACCEPTANCE: dict[str, list[tuple[bool, str]]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE):
        results = ACCEPTANCE[name]
        ok = all(passed for passed, _ in results)
        failed = [d for passed, d in results if not passed]
        detail = "; ".join(failed) if failed else f"{len(results)} checks"
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
