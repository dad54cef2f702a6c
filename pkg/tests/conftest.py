import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=30, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE = {}


def record_acceptance(name, ok, detail=""):
    """Record one acceptance criterion; a criterion with several parts passes only if all do."""
    prev_ok, prev_detail = ACCEPTANCE.get(name, (True, ""))
    ACCEPTANCE[name] = (prev_ok and bool(ok), "; ".join(d for d in (prev_detail, detail) if d))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in ACCEPTANCE.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
