import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from calloc.data import SyntheticBuildingConfig, building_config, generate_synthetic_building

settings.register_profile("calloc", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("calloc")

# acceptance outcomes, filled by test_acceptance.py and echoed after the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def tiny():
    """A 12-AP, 10-RP building: fast enough for per-test training."""
    return generate_synthetic_building(SyntheticBuildingConfig(n_aps=12, path_length_m=9, rng_seed=3, name="tiny"))


@pytest.fixture(scope="session")
def b3():
    return generate_synthetic_building(building_config(3))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
