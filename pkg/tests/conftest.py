import numpy as np
import pytest

from evsched.env import EvChargingEnv, EvEnvConfig, TruncatedNormal
from evsched.prices import SyntheticPriceSpec, gen_synthetic


def make_deterministic_env_config(**overrides):
    """Config with point-mass sessions: arrive 18:00, depart 8:00, half full."""
    base = dict(
        arrival=TruncatedNormal(18.0, 0.0, 15.0, 21.0),
        departure=TruncatedNormal(8.0, 0.0, 6.0, 11.0),
        initial_soc_fraction=TruncatedNormal(0.5, 0.0, 0.3, 0.8),
    )
    base.update(overrides)
    return EvEnvConfig(**base)


@pytest.fixture
def two_tier_series():
    return gen_synthetic(SyntheticPriceSpec(pattern="two-tier"), days=6)


@pytest.fixture
def det_env_config():
    return make_deterministic_env_config()


@pytest.fixture
def det_env(two_tier_series, det_env_config):
    env = EvChargingEnv(det_env_config)
    mean = float(np.mean(two_tier_series.prices))
    std = float(np.std(two_tier_series.prices))
    env.set_normalization(mean, std)
    return env
