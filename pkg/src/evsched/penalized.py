"""Penalty-shaped baselines: unconstrained learners on reward r - sigma * cost.

Both baselines reuse the shared episodic trainer. The SAC variant is the
constrained learner with its cost machinery frozen (lambda pinned at zero,
no quadratic term), so with sigma = 0 it reproduces plain SAC exactly. The
DDPG variant is a deterministic tanh actor with a single critic and Polyak
targets, exploring with additive Gaussian noise.
"""

from __future__ import annotations

import logging
from dataclasses import replace

import numpy as np

from .alsac import (ConstrainedSacLearner, LagrangeState, TrainConfig, TrainResult,
                    _critic_input, critic_update, run_training)
from .env import EvChargingEnv
from .nn import AdamState, DenseNet, adam_step, soft_update
from .prices import PriceSeries

logger = logging.getLogger(__name__)


def shaped_reward(reward: float, cost: float, sigma: float) -> float:
    """Fold the constraint cost into the reward with weight sigma."""
    return reward - sigma * cost


class DdpgLearner:
    """Deterministic policy gradient with one critic and target networks.

    The actor emits scale * tanh(u) + offset; exploration adds Gaussian
    noise with std ``exploration_std_fraction`` of the action half-range.
    """

    def __init__(self, obs_dim: int, cfg: TrainConfig, action_low: float,
                 action_high: float, rng_init: np.random.Generator,
                 exploration_std_fraction: float = 0.1):
        if not action_low < action_high:
            raise ValueError("need action_low < action_high")
        self.cfg = cfg
        self.scale = (action_high - action_low) / 2.0
        self.offset = (action_high + action_low) / 2.0
        self.low = action_low
        self.high = action_high
        self.noise_std = exploration_std_fraction * self.scale
        self.actor = DenseNet((obs_dim, *cfg.hidden_sizes, 1), rng_init, final_scale=0.01)
        self.critic = DenseNet((obs_dim + 1, *cfg.hidden_sizes, 1), rng_init)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.adam_actor = AdamState.for_params(self.actor.params)
        self.adam_critic = AdamState.for_params(self.critic.params)
        # No dual variables; a frozen zero state keeps the trainer's logging
        # columns meaningful (both multipliers sit at zero forever).
        self.lag = LagrangeState(constraint_frozen=True)
        self.update_count = 0
        self.nonfinite_strikes = 0

    def _unit_action(self, net: DenseNet, obs: np.ndarray) -> np.ndarray:
        return np.tanh(net.forward(np.atleast_2d(obs))[:, 0])

    def act(self, obs: np.ndarray, rng: np.random.Generator) -> float:
        a = self.scale * self._unit_action(self.actor, obs)[0] + self.offset
        a += rng.normal(0.0, self.noise_std)
        return float(min(max(a, self.low), self.high))

    def act_eval(self, obs: np.ndarray) -> float:
        return float(self.scale * self._unit_action(self.actor, obs)[0] + self.offset)

    def update(self, batch, rng: np.random.Generator) -> dict:
        cfg = self.cfg
        unit_next = self._unit_action(self.actor_target, batch.next_obs)
        x_next = np.concatenate([batch.next_obs, unit_next[:, None]], axis=1)
        q_next = self.critic_target.forward(x_next)[:, 0]
        y = batch.reward + (1.0 - batch.done) * cfg.gamma * q_next
        x = _critic_input(batch.obs, batch.action, self.scale, self.offset)
        q_loss = critic_update([self.critic], [self.adam_critic], x, y, cfg.learning_rate)

        stats = {"critic_loss": q_loss, "cost_critic_loss": 0.0, "actor_objective": None}
        self.update_count += 1
        if self.update_count % cfg.actor_delay == 0:
            out, actor_cache = self.actor.forward_cached(batch.obs)
            unit = np.tanh(out[:, 0])
            x_pi = np.concatenate([batch.obs, unit[:, None]], axis=1)
            q_out, critic_cache = self.critic.forward_cached(x_pi)
            value = float(np.mean(q_out[:, 0]))
            b = batch.size
            upstream = np.full((b, 1), 1.0 / b)
            _, x_grad = self.critic.backward(critic_cache, upstream, need_input_grad=True)
            # Chain d mean Q / d unit-action through the tanh squash.
            g_u = x_grad[:, -1] * (1.0 - unit * unit)
            grads, _ = self.actor.backward(actor_cache, g_u[:, None])
            if np.all(np.isfinite(grads)):
                adam_step(self.actor.params, -grads, self.adam_actor, cfg.learning_rate)
            else:
                self.nonfinite_strikes += 1
                logger.warning("actor gradient non-finite, step skipped")
            stats["actor_objective"] = value

        soft_update(self.critic_target.params, self.critic.params, cfg.soft_update_rate)
        soft_update(self.actor_target.params, self.actor.params, cfg.soft_update_rate)
        if not np.isfinite(q_loss):
            self.nonfinite_strikes += 1
        return stats

    def parameter_arrays(self) -> dict[str, np.ndarray]:
        return {
            "actor": self.actor.params,
            "critic": self.critic.params,
            "actor_target": self.actor_target.params,
            "critic_target": self.critic_target.params,
        }

    def load_parameter_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, params in self.parameter_arrays().items():
            params[:] = arrays[name]


def train_penalized_sac(env: EvChargingEnv, series: PriceSeries, train_days,
                        cfg: TrainConfig, lag: LagrangeState,
                        streams, sigma: float) -> TrainResult:
    """SAC on shaped rewards: cost multiplier frozen at zero, entropy
    temperature still self-tuning."""
    frozen = replace(lag, lam=0.0, constraint_frozen=True)
    learner = ConstrainedSacLearner(env.observation_dim, cfg, frozen,
                                    env.cfg.action_low, env.cfg.action_high,
                                    streams["init"])
    return run_training(env, series, train_days, cfg, learner, streams,
                        shape_sigma=sigma)


def train_penalized_ddpg(env: EvChargingEnv, series: PriceSeries, train_days,
                         cfg: TrainConfig, streams, sigma: float,
                         exploration_std_fraction: float = 0.1) -> TrainResult:
    learner = DdpgLearner(env.observation_dim, cfg, env.cfg.action_low,
                          env.cfg.action_high, streams["init"],
                          exploration_std_fraction=exploration_std_fraction)
    return run_training(env, series, train_days, cfg, learner, streams,
                        shape_sigma=sigma)
