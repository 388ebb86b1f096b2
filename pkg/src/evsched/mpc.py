"""Receding-horizon charging control over the linear program.

Each parked hour the planner solves a fresh LP from the current SOC to the
predicted departure, using a price forecast (exact, or the true prices
corrupted with proportional Gaussian noise), applies the first hour of the
plan, and discards the rest. With exact prices and a known departure this
is the clairvoyant optimum the learned policies are measured against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import EPISODE_STEPS, EvChargingEnv, Session
from .errors import LpInfeasibleError
from .lp import LpProblem, solve_charging_lp

DEPARTURE_MODES = ("known", "sampled")


@dataclass(frozen=True)
class MpcConfig:
    """Planner settings.

    price_error_fraction f draws each forecast price from
    N(p, (f*p)^2); 0 means the planner sees the real prices. The
    departure is either read from the session ("known") or sampled once
    per episode from the environment's departure distribution
    ("sampled", redrawn later only if the car is still there past the
    prediction).
    """

    price_error_fraction: float = 0.0
    departure_mode: str = "known"
    resolve_each_step: bool = True

    def __post_init__(self):
        if self.price_error_fraction < 0:
            raise ValueError("price_error_fraction must be >= 0")
        if self.departure_mode not in DEPARTURE_MODES:
            raise ValueError(
                f"departure_mode must be one of {DEPARTURE_MODES}, got {self.departure_mode!r}"
            )


def forecast_prices(true_prices: np.ndarray, fraction: float,
                    rng: np.random.Generator | None) -> np.ndarray:
    """Proportional-noise forecast; exact copy when fraction == 0."""
    true_prices = np.asarray(true_prices, dtype=np.float64)
    if fraction <= 0.0:
        return true_prices.copy()
    if rng is None:
        raise ValueError("noisy forecasts need an RNG")
    std = fraction * np.abs(true_prices)
    return true_prices + rng.normal(0.0, 1.0, size=true_prices.shape) * std


class MpcPlanner:
    """Receding-horizon controller for ``run_episode``.

    Needs ``begin_episode`` before acting; infeasible subproblems fall
    back to charging straight toward the target.
    """

    def __init__(self, mpc_cfg: MpcConfig):
        self.cfg = mpc_cfg
        self._env: EvChargingEnv | None = None
        self.solves = 0
        self.infeasible_fallbacks = 0

    def begin_episode(self, env: EvChargingEnv, session: Session,
                      rng: np.random.Generator | None) -> None:
        if rng is None and (self.cfg.price_error_fraction > 0
                            or self.cfg.departure_mode == "sampled"):
            raise ValueError("this planner configuration needs a per-episode RNG")
        self._env = env
        self._rng = rng
        self._plan = None
        self._plan_start = -1
        if self.cfg.departure_mode == "known":
            departure = session.departure_hour
        else:
            departure = _round_half_up(env.cfg.departure.sample(rng))
        self._t_dep_pred = EPISODE_STEPS - env.cfg.anchor_hour + departure
        self._pred_departure_hour = departure

    def _redraw_departure(self, after_hour: int) -> None:
        # The car outstayed the prediction: resample conditioned on a
        # later departure. The true departure shares the distribution's
        # support, so a strictly later draw always exists.
        env = self._env
        departure = self._pred_departure_hour
        while departure <= after_hour:
            departure = _round_half_up(env.cfg.departure.sample(self._rng))
        self._pred_departure_hour = departure
        self._t_dep_pred = EPISODE_STEPS - env.cfg.anchor_hour + departure

    def _solve(self, state):
        env = self._env
        ecfg = env.cfg
        horizon = min(self._t_dep_pred, EPISODE_STEPS) - state.t
        start = env.hour_index(state.t)
        true_prices = env.series.prices[start : start + horizon]
        prices = forecast_prices(true_prices, self.cfg.price_error_fraction, self._rng)
        problem = LpProblem(
            prices=prices,
            soc_init=state.soc,
            soc_min=ecfg.soc_min,
            capacity=ecfg.capacity,
            soc_target=ecfg.soc_target,
            max_charge=ecfg.max_charge,
            max_discharge=ecfg.max_discharge,
        )
        self.solves += 1
        try:
            schedule, _ = solve_charging_lp(problem)
        except LpInfeasibleError:
            self.infeasible_fallbacks += 1
            schedule = None
        return schedule

    def act(self, state) -> float:
        env = self._env
        if env is None:
            raise RuntimeError("act before begin_episode")
        ecfg = env.cfg
        if not state.parked:
            return 0.0
        if state.t >= self._t_dep_pred:
            if self.cfg.departure_mode == "sampled":
                self._redraw_departure(self._pred_departure_hour)
                self._plan = None
            else:
                # Known departures never outrun the plan; direct charge
                # toward the target is the safe degenerate answer.
                return self._feasible_action(state, ecfg.soc_target - state.soc, 0)

        steps_after = min(self._t_dep_pred, EPISODE_STEPS) - state.t - 1
        if steps_after == 0:
            # The terminal-SOC equality pins the last hour; no LP needed,
            # and the direct difference is exact where a solve could
            # carry round-off into the terminal deviation.
            action = ecfg.soc_target - state.soc
        elif self.cfg.resolve_each_step or self._plan is None:
            schedule = self._solve(state)
            self._plan = schedule
            self._plan_start = state.t
            action = ecfg.soc_target - state.soc if schedule is None else schedule[0]
        else:
            offset = state.t - self._plan_start
            action = self._plan[offset] if offset < len(self._plan) else 0.0
        return self._feasible_action(state, float(action), steps_after)

    def _feasible_action(self, state, action: float, steps_after: int) -> float:
        """Project the plan's next hour onto the exact feasible set.

        The LP already respects every bound in exact arithmetic; this
        projection re-imposes them on the floating-point trajectory,
        nudging by ulps where a bound binds so that round-off can never
        register as a violation the planner did not intend. It also
        keeps the infeasible-fallback action inside the battery's
        physical box.
        """
        ecfg = self._env.cfg
        soc = state.soc
        lo = max(-ecfg.max_discharge, -soc)
        hi = min(ecfg.max_charge, ecfg.capacity - soc)
        a = min(max(action, lo), hi)
        if steps_after > 0:
            # Stay above the comfort floor and keep the target reachable
            # with the remaining full-rate hours.
            floor = max(ecfg.soc_min, ecfg.soc_target - ecfg.max_charge * steps_after)
            if soc + a < floor and a < hi:
                a = min(max(a, floor - soc), hi)
                while soc + a < floor and a < hi:
                    a = float(np.nextafter(a, np.inf))
                a = min(a, hi)
            # Mirror bound: do not overshoot beyond what the remaining
            # hours can discharge back down.
            ceiling = min(ecfg.capacity, ecfg.soc_target + ecfg.max_discharge * steps_after)
            if soc + a > ceiling and a > lo:
                a = max(min(a, ceiling - soc), lo)
                while soc + a > ceiling and a > lo:
                    a = float(np.nextafter(a, -np.inf))
                a = max(a, lo)
        return float(a)


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))
