import numpy as np
import pytest

from phasor_sentinel.synth import FleetConfig, generate_fleet, generate_minute


@pytest.fixture(scope="session")
def small_fleet():
    """Three minutes of a 4-PMU fleet; enough for spoof/feature tests."""
    config = FleetConfig(pmu_count=4, minutes=3, seed=11)
    return config, generate_fleet(config)


@pytest.fixture(scope="session")
def one_minute(small_fleet):
    _, minutes = small_fleet
    return minutes[0]


@pytest.fixture(scope="session")
def ten_pmu_minute():
    """One minute of the default-size fleet for correlation-structure tests."""
    return generate_minute(FleetConfig(pmu_count=10, minutes=1, seed=7), 0)


@pytest.fixture()
def rng():
    return np.random.default_rng(42)
