"""Episodic EV charging/discharging environment over an hourly price series.

One episode is one day on a fixed clock: step t corresponds to hour of day
(anchor_hour + t) mod 24, so the overnight parking interval (arrive in the
evening, depart the next morning) lies inside a single episode. Rewards are
the negated energy bill for the hour; costs are constraint violations in kWh
(target-SOC deviation at departure, shortfall below the comfort minimum
while parked).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EnvError
from .prices import HOURS_PER_DAY, PriceSeries, price_window

EPISODE_STEPS = 24


@dataclass(frozen=True)
class TruncatedNormal:
    """Normal(mean, std) restricted to [lower, upper] by rejection sampling.

    std == 0 degenerates to a point mass at ``mean`` (which must then lie
    inside the bounds).
    """

    mean: float
    std: float
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"need lower < upper, got [{self.lower}, {self.upper}]")
        if self.std < 0:
            raise ValueError("std must be >= 0")
        if self.std == 0 and not self.lower <= self.mean <= self.upper:
            raise ValueError("degenerate distribution needs mean inside the bounds")

    def sample(self, rng: np.random.Generator, size: int | None = None):
        if self.std == 0:
            if size is None:
                return float(self.mean)
            return np.full(size, self.mean, dtype=np.float64)
        n = 1 if size is None else int(size)
        out = np.empty(n, dtype=np.float64)
        filled = 0
        while filled < n:
            draw = rng.normal(self.mean, self.std, size=n - filled)
            ok = draw[(draw >= self.lower) & (draw <= self.upper)]
            out[filled : filled + ok.size] = ok
            filled += ok.size
        if size is None:
            return float(out[0])
        return out


def _round_half_up(x: float) -> int:
    """Round to the nearest integer with ties going up."""
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class EvEnvConfig:
    """Battery, session, and observation settings.

    Defaults model a 24 kWh compact EV at 100% charge/discharge efficiency
    with a 20% comfort floor and a full-battery departure target.
    """

    capacity: float = 24.0
    soc_min: float = 4.8
    soc_target: float = 24.0
    max_charge: float = 6.0
    max_discharge: float = 6.0
    cost_budget: float = 0.024  # kWh of tolerated expected violation
    anchor_hour: int = 12
    arrival: TruncatedNormal = field(default_factory=lambda: TruncatedNormal(18.0, 1.0, 15.0, 21.0))
    departure: TruncatedNormal = field(default_factory=lambda: TruncatedNormal(8.0, 1.0, 6.0, 11.0))
    initial_soc_fraction: TruncatedNormal = field(
        default_factory=lambda: TruncatedNormal(0.5, 0.1, 0.3, 0.8)
    )
    clip_infeasible_actions: bool = True
    state_time_features: bool = False

    def __post_init__(self):
        if not 0 < self.capacity:
            raise ValueError("capacity must be positive")
        if not 0 <= self.soc_min <= self.capacity:
            raise ValueError("soc_min must lie in [0, capacity]")
        if not self.soc_min <= self.soc_target <= self.capacity:
            raise ValueError("soc_target must lie in [soc_min, capacity]")
        if self.max_charge <= 0 or self.max_discharge <= 0:
            raise ValueError("charge/discharge rates must be positive")
        if self.cost_budget < 0:
            raise ValueError("cost_budget must be >= 0")
        if not 0 <= self.anchor_hour < HOURS_PER_DAY:
            raise ValueError("anchor_hour must lie in 0..23")

    @property
    def action_low(self) -> float:
        return -self.max_discharge

    @property
    def action_high(self) -> float:
        return self.max_charge

    @property
    def observation_dim(self) -> int:
        return 1 + HOURS_PER_DAY + (2 if self.state_time_features else 0)


@dataclass(frozen=True)
class Session:
    """One parking session: arrive in the evening, depart the next morning."""

    arrival_hour: int       # hour of day, same calendar day as the episode anchor
    departure_hour: int     # hour of day, next calendar day
    initial_soc: float      # kWh on arrival


def sample_session(rng: np.random.Generator, cfg: EvEnvConfig) -> Session:
    """Draw a session; hours round to the nearest integer, ties up."""
    arrival = _round_half_up(cfg.arrival.sample(rng))
    departure = _round_half_up(cfg.departure.sample(rng))
    frac = cfg.initial_soc_fraction.sample(rng)
    return Session(arrival_hour=arrival, departure_hour=departure, initial_soc=frac * cfg.capacity)


@dataclass(frozen=True)
class EpisodeState:
    """What a policy may observe at one step."""

    t: int
    soc: float
    parked: bool
    price_window: np.ndarray  # the 24 prices ending at the current hour, oldest first
    hours_since_arrival: float | None = None
    hours_to_departure: float | None = None


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    action: float
    reward: float
    cost: float
    next_obs: np.ndarray
    done: bool


def feasible_action_clip(soc: float, action: float, cfg: EvEnvConfig) -> float:
    """Clip a commanded energy exchange to what the battery can physically do."""
    lo = max(-cfg.max_discharge, -soc)
    hi = min(cfg.max_charge, cfg.capacity - soc)
    return float(min(max(action, lo), hi))


def valid_episode_days(series: PriceSeries, cfg: EvEnvConfig) -> range:
    """Day indices whose episodes fit inside ``series`` with full lookback.

    An episode anchored at day d spans hours [d*24 + anchor, d*24 + anchor + 24]
    and needs 23 hours of history before its first hour.
    """
    n = len(series)
    # lookback: d*24 + anchor - 23 >= 0
    d_min = max(0, math.ceil((HOURS_PER_DAY - 1 - cfg.anchor_hour) / HOURS_PER_DAY))
    # coverage: d*24 + anchor + EPISODE_STEPS <= n - 1
    d_max = (n - 1 - cfg.anchor_hour - EPISODE_STEPS) // HOURS_PER_DAY
    if d_max < d_min:
        return range(0)
    return range(d_min, d_max + 1)


class EvChargingEnv:
    """The charging CMDP. ``reset`` binds a series day and session; ``step``
    advances one hour and returns (state, reward, cost, done, info)."""

    def __init__(self, cfg: EvEnvConfig, norm_mean: float | None = None,
                 norm_std: float | None = None):
        self.cfg = cfg
        self.norm_mean = norm_mean
        self.norm_std = norm_std
        self._series: PriceSeries | None = None
        self._done = True

    @property
    def observation_dim(self) -> int:
        return self.cfg.observation_dim

    def set_normalization(self, mean: float, std: float) -> None:
        self.norm_mean = float(mean)
        self.norm_std = float(std) if std > 1e-12 else 1.0

    def reset(self, series: PriceSeries, day_index: int, session: Session) -> EpisodeState:
        cfg = self.cfg
        h0 = day_index * HOURS_PER_DAY + cfg.anchor_hour
        if h0 < HOURS_PER_DAY - 1:
            raise EnvError(
                f"day {day_index} leaves only {h0} hours of price lookback (need 23)"
            )
        if h0 + EPISODE_STEPS > len(series) - 1:
            raise EnvError(
                f"day {day_index} runs past the series end "
                f"(episode needs hours up to {h0 + EPISODE_STEPS}, series has {len(series)})"
            )
        if not 0 <= session.initial_soc <= cfg.capacity:
            raise EnvError(f"initial SOC {session.initial_soc} outside [0, {cfg.capacity}]")
        self._series = series
        self._h0 = h0
        self._t = 0
        self._soc = float(session.initial_soc)
        self._t_arrival = (session.arrival_hour - cfg.anchor_hour) % HOURS_PER_DAY
        self._t_departure = HOURS_PER_DAY - cfg.anchor_hour + session.departure_hour
        self._session = session
        self._done = False
        return self._state()

    def hour_index(self, t: int | None = None) -> int:
        """Absolute series index of step t's hour (current step by default)."""
        if self._series is None:
            raise EnvError("hour_index before reset")
        return self._h0 + (self._t if t is None else t)

    @property
    def series(self) -> PriceSeries:
        if self._series is None:
            raise EnvError("no series bound; call reset first")
        return self._series

    @property
    def departure_step(self) -> int:
        return self._t_departure

    @property
    def arrival_step(self) -> int:
        return self._t_arrival

    def _state(self) -> EpisodeState:
        t = self._t
        window = price_window(self._series, self._h0 + t)
        hsa = htd = None
        if self.cfg.state_time_features:
            hsa = max(0, t - self._t_arrival) / HOURS_PER_DAY
            htd = max(0, self._t_departure - t) / HOURS_PER_DAY
        return EpisodeState(
            t=t,
            soc=self._soc,
            parked=self._t_arrival <= t < self._t_departure,
            price_window=window,
            hours_since_arrival=hsa,
            hours_to_departure=htd,
        )

    def step(self, action: float):
        if self._done:
            raise EnvError("step called on a finished episode; call reset first")
        cfg = self.cfg
        t = self._t
        parked = self._t_arrival <= t < self._t_departure
        if not parked:
            applied = 0.0
        elif cfg.clip_infeasible_actions:
            applied = feasible_action_clip(self._soc, float(action), cfg)
        else:
            applied = float(action)
        price = float(self._series.prices[self._h0 + t])
        reward = -applied * price
        soc_next = self._soc + applied
        # Battery containment holds regardless of the clipping flag; with
        # clipping off the agent still pays for energy the battery rejects.
        soc_next = min(max(soc_next, 0.0), cfg.capacity)

        at_departure = t + 1 == self._t_departure
        at_horizon = t + 1 == EPISODE_STEPS
        if at_departure or (at_horizon and parked):
            cost = abs(soc_next - cfg.soc_target)
            done = True
        elif at_horizon:
            cost = 0.0
            done = True
        elif parked:
            cost = max(0.0, cfg.soc_min - soc_next)
            done = False
        else:
            cost = 0.0
            done = False

        self._soc = soc_next
        self._t = t + 1
        self._done = done
        info = {"action_applied": applied, "price": price, "hour_index": self._h0 + t}
        return self._state(), reward, cost, done, info

    def observe(self, state: EpisodeState) -> np.ndarray:
        """Flatten a state into the policy observation vector.

        Layout: [soc/capacity, 24 normalized prices(, time features)].
        """
        if self.norm_mean is None or self.norm_std is None:
            raise EnvError("observe requires normalization stats; call set_normalization")
        cfg = self.cfg
        parts = [np.array([state.soc / cfg.capacity])]
        parts.append((state.price_window - self.norm_mean) / self.norm_std)
        if cfg.state_time_features:
            parts.append(np.array([state.hours_since_arrival, state.hours_to_departure]))
        return np.concatenate(parts).astype(np.float64)


def normalization_stats(series: PriceSeries) -> tuple[float, float]:
    """Scalar mean/std of a training series; std floors at 1 for constants."""
    mean = float(np.mean(series.prices))
    std = float(np.std(series.prices))
    # np.std of a constant array returns rounding dust, not exactly zero
    if std <= 1e-12:
        std = 1.0
    return mean, std
