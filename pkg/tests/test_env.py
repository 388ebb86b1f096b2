import numpy as np
import pytest

from evsched.env import (
    EPISODE_STEPS,
    EvChargingEnv,
    EvEnvConfig,
    Session,
    TruncatedNormal,
    feasible_action_clip,
    normalization_stats,
    sample_session,
    valid_episode_days,
)
from evsched.errors import EnvError
from evsched.prices import PriceSeries, SyntheticPriceSpec, gen_synthetic

from conftest import make_deterministic_env_config


def reset_day1(env, series, soc=12.0, arrival=18, departure=8):
    session = Session(arrival_hour=arrival, departure_hour=departure, initial_soc=soc)
    return env.reset(series, 1, session), session


def test_truncated_normal_bounds_and_point_mass():
    rng = np.random.default_rng(0)
    dist = TruncatedNormal(0.0, 2.0, -1.0, 1.0)
    draws = dist.sample(rng, size=500)
    assert draws.min() >= -1.0 and draws.max() <= 1.0
    point = TruncatedNormal(0.3, 0.0, 0.0, 1.0)
    assert point.sample(rng) == 0.3
    np.testing.assert_array_equal(point.sample(rng, size=3), [0.3, 0.3, 0.3])
    with pytest.raises(ValueError):
        TruncatedNormal(5.0, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        TruncatedNormal(0.0, -1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        TruncatedNormal(0.0, 1.0, 2.0, 1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        EvEnvConfig(capacity=-1.0)
    with pytest.raises(ValueError):
        EvEnvConfig(soc_min=30.0)
    with pytest.raises(ValueError):
        EvEnvConfig(soc_target=3.0)  # below default soc_min
    with pytest.raises(ValueError):
        EvEnvConfig(max_charge=0.0)
    with pytest.raises(ValueError):
        EvEnvConfig(anchor_hour=24)
    cfg = EvEnvConfig()
    assert cfg.action_low == -6.0 and cfg.action_high == 6.0
    assert cfg.observation_dim == 25
    assert EvEnvConfig(state_time_features=True).observation_dim == 27


def test_sample_session_rounding():
    cfg = make_deterministic_env_config(
        arrival=TruncatedNormal(18.5, 0.0, 15.0, 21.0),
        departure=TruncatedNormal(7.4, 0.0, 6.0, 11.0),
    )
    s = sample_session(np.random.default_rng(0), cfg)
    assert s.arrival_hour == 19  # .5 rounds up
    assert s.departure_hour == 7
    assert s.initial_soc == 12.0


def test_feasible_action_clip():
    cfg = EvEnvConfig()
    assert feasible_action_clip(12.0, 100.0, cfg) == 6.0
    assert feasible_action_clip(12.0, -100.0, cfg) == -6.0
    assert feasible_action_clip(2.0, -6.0, cfg) == -2.0      # battery empty
    assert feasible_action_clip(21.0, 6.0, cfg) == 3.0       # battery full
    assert feasible_action_clip(12.0, 1.5, cfg) == 1.5


def test_valid_episode_days():
    cfg = EvEnvConfig(anchor_hour=12)
    series = gen_synthetic(SyntheticPriceSpec(), days=6)
    days = valid_episode_days(series, cfg)
    # day 0 lacks the 23-hour lookback before hour 12; the last day lacks
    # the hour after the final step
    assert days == range(1, 5)
    assert valid_episode_days(gen_synthetic(SyntheticPriceSpec(), days=2), cfg) == range(1, 1)


def test_reset_bounds_checking(two_tier_series, det_env):
    session = Session(18, 8, 12.0)
    with pytest.raises(EnvError, match="lookback"):
        det_env.reset(two_tier_series, 0, session)
    with pytest.raises(EnvError, match="past the series end"):
        det_env.reset(two_tier_series, 5, session)
    with pytest.raises(EnvError, match="initial SOC"):
        det_env.reset(two_tier_series, 1, Session(18, 8, 99.0))
    state = det_env.reset(two_tier_series, 1, session)
    assert state.t == 0
    assert state.soc == 12.0
    assert not state.parked  # anchor noon, arrival 18:00
    assert state.price_window.shape == (24,)


def test_step_timeline_and_masking(two_tier_series, det_env):
    state, _ = reset_day1(det_env, two_tier_series)
    # arrival 18:00 with anchor 12:00 -> parked from t=6; departure 8:00
    # next day -> departure step t=20, which ends the episode
    assert det_env.arrival_step == 6
    assert det_env.departure_step == 20
    applied = []
    done = False
    while not done:
        state, reward, cost, done, info = det_env.step(5.0)
        applied.append(info["action_applied"])
    assert len(applied) == 20
    assert all(a == 0.0 for a in applied[:6])     # away until 18:00
    assert any(a != 0.0 for a in applied[6:])
    with pytest.raises(EnvError, match="finished"):
        det_env.step(0.0)


def test_away_steps_cost_nothing(two_tier_series, det_env):
    state, _ = reset_day1(det_env, two_tier_series)
    for _ in range(6):  # t = 0..5 away
        state, reward, cost, done, info = det_env.step(6.0)
        assert reward == 0.0 and cost == 0.0 and info["action_applied"] == 0.0
    assert state.soc == 12.0


def test_reward_is_negative_bill(two_tier_series, det_env):
    reset_day1(det_env, two_tier_series)
    for _ in range(6):
        det_env.step(0.0)
    hour = det_env.hour_index()
    price = two_tier_series.prices[hour]
    _, reward, _, _, info = det_env.step(2.0)
    assert info["action_applied"] == 2.0
    assert reward == -2.0 * price


# Cost branches, each against hand arithmetic.

def test_cost_terminal_deviation_exact(two_tier_series, det_env):
    reset_day1(det_env, two_tier_series, soc=12.0)
    total = 0.0
    for t in range(19):
        _, _, cost, done, _ = det_env.step(0.0)
        total += cost
    # t=19 -> t+1 == departure step 20: |12 - 24| = 12, episode ends
    _, _, cost, done, _ = det_env.step(0.0)
    assert done
    assert cost == 12.0


def test_cost_sub_minimum_deficit_exact(two_tier_series, det_env):
    state, _ = reset_day1(det_env, two_tier_series, soc=6.0)
    for _ in range(6):
        det_env.step(0.0)
    # parked at soc 6.0, discharge 3: soc_next = 3.0 < 4.8 -> deficit 1.8
    _, _, cost, done, _ = det_env.step(-3.0)
    assert not done
    assert cost == pytest.approx(4.8 - 3.0)
    # recover above the floor: no cost
    _, _, cost, _, _ = det_env.step(4.0)
    assert cost == 0.0


def test_cost_in_range_zero(two_tier_series, det_env):
    reset_day1(det_env, two_tier_series, soc=12.0)
    for _ in range(6):
        det_env.step(0.0)
    for action in (1.0, -1.0, 0.5):
        _, _, cost, _, _ = det_env.step(action)
        assert cost == 0.0


def test_cost_away_masked_zero(two_tier_series, det_env):
    reset_day1(det_env, two_tier_series, soc=0.0)
    # SOC 0 is far below soc_min but the car is not parked yet
    _, _, cost, _, _ = det_env.step(0.0)
    assert cost == 0.0
    # after departure the branch is also cost-free
    reset_day1(det_env, two_tier_series, soc=24.0)
    done = False
    costs = []
    while not done:
        state, _, cost, done, _ = det_env.step(0.0)
        if state.t > 20:
            costs.append(cost)
    assert all(c == 0.0 for c in costs)


def test_cost_horizon_end_while_parked(two_tier_series, det_env_config):
    env = EvChargingEnv(det_env_config)
    env.set_normalization(0.0, 1.0)
    # a crafted 13:00 departure lands past the horizon, so the episode is
    # cut at t=24 with the car still parked: deviation is charged there
    session = Session(arrival_hour=18, departure_hour=13, initial_soc=20.0)
    env.reset(two_tier_series, 1, session)
    done = False
    steps = 0
    while not done:
        _, _, cost, done, _ = env.step(0.0)
        steps += 1
    assert steps == EPISODE_STEPS
    assert cost == 4.0


def test_cost_horizon_not_parked_zero(two_tier_series, det_env):
    # depart before the horizon: the final steps are the away branch
    reset_day1(det_env, two_tier_series, soc=24.0)
    total_cost = 0.0
    done = False
    while not done:
        _, _, cost, done, _ = det_env.step(0.0)
        total_cost += cost
    assert total_cost == 0.0  # full battery held to departure


def test_clipping_flag_off_still_contains_soc(two_tier_series):
    cfg = make_deterministic_env_config(clip_infeasible_actions=False)
    env = EvChargingEnv(cfg)
    env.set_normalization(0.0, 1.0)
    session = Session(18, 8, 22.0)
    env.reset(two_tier_series, 1, session)
    for _ in range(6):
        env.step(0.0)
    state, reward, _, _, info = env.step(6.0)
    # unclipped: the bill covers all 6 kWh, the battery only takes 2
    assert info["action_applied"] == 6.0
    assert state.soc == 24.0
    price = two_tier_series.prices[info["hour_index"]]
    assert reward == -6.0 * price


def test_observe_layout(two_tier_series, det_env):
    state, _ = reset_day1(det_env, two_tier_series)
    obs = det_env.observe(state)
    assert obs.shape == (25,)
    assert obs[0] == 12.0 / 24.0
    mean, std = det_env.norm_mean, det_env.norm_std
    np.testing.assert_allclose(obs[1:], (state.price_window - mean) / std)


def test_observe_requires_stats(two_tier_series, det_env_config):
    env = EvChargingEnv(det_env_config)
    state = env.reset(two_tier_series, 1, Session(18, 8, 12.0))
    with pytest.raises(EnvError, match="normalization"):
        env.observe(state)


def test_time_features_observation(two_tier_series):
    cfg = make_deterministic_env_config(state_time_features=True)
    env = EvChargingEnv(cfg)
    env.set_normalization(0.0, 1.0)
    state = env.reset(two_tier_series, 1, Session(18, 8, 12.0))
    obs = env.observe(state)
    assert obs.shape == (27,)
    assert obs[-2] == 0.0             # not arrived yet
    assert obs[-1] == 20.0 / 24.0     # hours to departure step


def test_normalization_stats_floor():
    series = PriceSeries(gen_synthetic(SyntheticPriceSpec(), days=2).start,
                         np.full(48, 0.2))
    mean, std = normalization_stats(series)
    assert mean == pytest.approx(0.2)
    assert std == 1.0
