import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)




def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[n]
        ok = all(p for _, p, _ in parts)
        detail = "; ".join(f"{name}: {d}" for name, p, d in parts if not p) if not ok else \
            "; ".join(name for name, _, _ in parts)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {n:2d}  {detail}")
