"""Estimator-style front end: fit on a price series, predict actions.

The estimators wrap the functional training code behind the familiar
fit/predict/get_params surface so they compose with standard tooling
(cloning, grid search over hyperparameters, pipelines that end in a
custom scorer). fit trains on every valid day of the series handed in;
train/test splitting is the caller's business.
"""

from __future__ import annotations

from dataclasses import asdict

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .alsac import (ConstrainedSacLearner, LagrangeState, TrainConfig,
                    select_best_checkpoint, train_constrained_sac)
from .checkpoint import load_checkpoint, save_checkpoint
from .env import (EvChargingEnv, EvEnvConfig, TruncatedNormal,
                  normalization_stats, valid_episode_days)
from .errors import CheckpointError
from .mpc import MpcConfig, MpcPlanner
from .penalized import DdpgLearner, train_penalized_ddpg, train_penalized_sac
from .rollout import PolicyController, evaluate_controller
from .utils import rng_streams
from .validation import as_price_series, check_observations


def env_config_to_dict(cfg: EvEnvConfig) -> dict:
    return asdict(cfg)


def env_config_from_dict(d: dict) -> EvEnvConfig:
    d = dict(d)
    for key in ("arrival", "departure", "initial_soc_fraction"):
        if key in d and isinstance(d[key], dict):
            d[key] = TruncatedNormal(**d[key])
    return EvEnvConfig(**d)


class _FittedModelMixin:
    """predict / evaluate / save shared by the replay-trained estimators."""

    def _resolved_env_config(self) -> EvEnvConfig:
        return self.env_config if self.env_config is not None else EvEnvConfig()

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            episodes=self.episodes,
            gamma=self.gamma,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            hidden_sizes=tuple(self.hidden_sizes),
            soft_update_rate=self.soft_update_rate,
            warmup_episodes=self.warmup_episodes,
            updates_per_step=self.updates_per_step,
            actor_delay=self.actor_delay,
            replay_capacity=self.replay_capacity,
            checkpoint_every=self.checkpoint_every,
        )

    def _finish_fit(self, result, env_cfg: EvEnvConfig, mean: float, std: float):
        best = select_best_checkpoint(result.checkpoints, self._selection_budget())
        snapshot = result.checkpoints[best]
        result.learner.load_parameter_arrays(snapshot.arrays)
        result.learner.lag = snapshot.lag
        self.env_config_ = env_cfg
        self.norm_mean_ = mean
        self.norm_std_ = std
        self.obs_dim_ = env_cfg.observation_dim
        self.learner_ = result.learner
        self.train_result_ = result
        self.best_checkpoint_ = snapshot

    def _selection_budget(self) -> float:
        return getattr(self, "cost_budget", self._resolved_env_config().cost_budget)

    def _eval_env(self) -> EvChargingEnv:
        env = EvChargingEnv(self.env_config_)
        env.set_normalization(self.norm_mean_, self.norm_std_)
        return env

    def predict(self, X) -> np.ndarray:
        """Deterministic (mean) action for each observation row, in kWh."""
        check_is_fitted(self, "learner_")
        obs = check_observations(X, self.obs_dim_)
        return np.array([self.learner_.act_eval(row) for row in obs])

    def evaluate(self, X, days=None, seed=None):
        """Roll the fitted policy over ``days`` of a price series.

        Sessions come from a (seed, day)-keyed RNG, so results do not
        depend on which other days were evaluated alongside.
        """
        check_is_fitted(self, "learner_")
        series = as_price_series(X)
        env = self._eval_env()
        if days is None:
            days = valid_episode_days(series, env.cfg)
        controller = PolicyController(self.learner_, env)
        return evaluate_controller(env, series, days, controller,
                                   self.seed if seed is None else seed)

    def save(self, path) -> None:
        check_is_fitted(self, "learner_")
        params = self.get_params(deep=False)
        params.pop("env_config")
        params["hidden_sizes"] = list(params["hidden_sizes"])
        meta = {
            "kind": self._kind,
            "params": params,
            "env_config": env_config_to_dict(self.env_config_),
            "lag": asdict(self.learner_.lag),
            "norm_mean": self.norm_mean_,
            "norm_std": self.norm_std_,
            "obs_dim": self.obs_dim_,
        }
        save_checkpoint(path, meta, self.learner_.parameter_arrays())

    @classmethod
    def load(cls, path):
        meta, arrays = load_checkpoint(path)
        if meta.get("kind") != cls._kind:
            raise CheckpointError(
                f"checkpoint holds a {meta.get('kind')!r} model, not {cls._kind!r}"
            )
        params = dict(meta["params"])
        params["hidden_sizes"] = tuple(params["hidden_sizes"])
        params["env_config"] = env_config_from_dict(meta["env_config"])
        est = cls(**params)
        env_cfg = params["env_config"]
        lag = LagrangeState(**meta["lag"])
        learner = est._blank_learner(meta["obs_dim"], lag, env_cfg)
        learner.load_parameter_arrays(arrays)
        learner.lag = lag
        est.env_config_ = env_cfg
        est.norm_mean_ = float(meta["norm_mean"])
        est.norm_std_ = float(meta["norm_std"])
        est.obs_dim_ = int(meta["obs_dim"])
        est.learner_ = learner
        return est


class AugmentedLagrangianSAC(_FittedModelMixin, BaseEstimator):
    """Constrained soft actor-critic over hourly charging decisions.

    fit trains on the given price series; the fitted policy maps the
    observation vector (normalized SOC and price history) to a charging
    action. Violation budget, dual step sizes, and the usual SAC knobs
    are exposed as parameters.
    """

    _kind = "alsac"

    def __init__(self, episodes=200, hidden_sizes=(256, 256), batch_size=256,
                 gamma=0.995, learning_rate=5e-4, multiplier_rate=1e-5,
                 entropy_target=-1.0, cost_budget=0.024, penalty_coeff=None,
                 literal_dual_signs=False, warmup_episodes=5, updates_per_step=1,
                 actor_delay=2, soft_update_rate=0.005, replay_capacity=100_000,
                 checkpoint_every=100, env_config=None, seed=0):
        self.episodes = episodes
        self.hidden_sizes = hidden_sizes
        self.batch_size = batch_size
        self.gamma = gamma
        self.learning_rate = learning_rate
        self.multiplier_rate = multiplier_rate
        self.entropy_target = entropy_target
        self.cost_budget = cost_budget
        self.penalty_coeff = penalty_coeff
        self.literal_dual_signs = literal_dual_signs
        self.warmup_episodes = warmup_episodes
        self.updates_per_step = updates_per_step
        self.actor_delay = actor_delay
        self.soft_update_rate = soft_update_rate
        self.replay_capacity = replay_capacity
        self.checkpoint_every = checkpoint_every
        self.env_config = env_config
        self.seed = seed

    def _lagrange(self) -> LagrangeState:
        return LagrangeState(
            step_alpha=self.multiplier_rate,
            step_lambda=self.multiplier_rate,
            entropy_target=self.entropy_target,
            cost_budget=self.cost_budget,
            penalty_coeff=self.penalty_coeff,
            literal_dual_signs=self.literal_dual_signs,
        )

    def _blank_learner(self, obs_dim, lag, env_cfg):
        return ConstrainedSacLearner(obs_dim, self._train_config(), lag,
                                     env_cfg.action_low, env_cfg.action_high,
                                     rng_streams(self.seed)["init"])

    def fit(self, X, y=None):
        series = as_price_series(X)
        env_cfg = self._resolved_env_config()
        env = EvChargingEnv(env_cfg)
        mean, std = normalization_stats(series)
        env.set_normalization(mean, std)
        days = valid_episode_days(series, env_cfg)
        result = train_constrained_sac(env, series, days, self._train_config(),
                                       self._lagrange(), rng_streams(self.seed))
        self._finish_fit(result, env_cfg, mean, std)
        return self


class PenalizedSAC(_FittedModelMixin, BaseEstimator):
    """SAC trained on the shaped reward r - sigma * cost, constraint-blind."""

    _kind = "penalized-sac"

    def __init__(self, sigma=1.2, episodes=200, hidden_sizes=(256, 256),
                 batch_size=256, gamma=0.995, learning_rate=5e-4,
                 multiplier_rate=1e-5, entropy_target=-1.0, cost_budget=0.024,
                 warmup_episodes=5, updates_per_step=1, actor_delay=2,
                 soft_update_rate=0.005, replay_capacity=100_000,
                 checkpoint_every=100, env_config=None, seed=0):
        self.sigma = sigma
        self.episodes = episodes
        self.hidden_sizes = hidden_sizes
        self.batch_size = batch_size
        self.gamma = gamma
        self.learning_rate = learning_rate
        self.multiplier_rate = multiplier_rate
        self.entropy_target = entropy_target
        self.cost_budget = cost_budget
        self.warmup_episodes = warmup_episodes
        self.updates_per_step = updates_per_step
        self.actor_delay = actor_delay
        self.soft_update_rate = soft_update_rate
        self.replay_capacity = replay_capacity
        self.checkpoint_every = checkpoint_every
        self.env_config = env_config
        self.seed = seed

    def _lagrange(self) -> LagrangeState:
        return LagrangeState(
            step_alpha=self.multiplier_rate,
            step_lambda=self.multiplier_rate,
            entropy_target=self.entropy_target,
            cost_budget=self.cost_budget,
            constraint_frozen=True,
        )

    def _blank_learner(self, obs_dim, lag, env_cfg):
        return ConstrainedSacLearner(obs_dim, self._train_config(), lag,
                                     env_cfg.action_low, env_cfg.action_high,
                                     rng_streams(self.seed)["init"])

    def fit(self, X, y=None):
        series = as_price_series(X)
        env_cfg = self._resolved_env_config()
        env = EvChargingEnv(env_cfg)
        mean, std = normalization_stats(series)
        env.set_normalization(mean, std)
        days = valid_episode_days(series, env_cfg)
        result = train_penalized_sac(env, series, days, self._train_config(),
                                     self._lagrange(), rng_streams(self.seed),
                                     self.sigma)
        self._finish_fit(result, env_cfg, mean, std)
        return self


class PenalizedDDPG(_FittedModelMixin, BaseEstimator):
    """Deterministic policy gradient on the shaped reward r - sigma * cost."""

    _kind = "penalized-ddpg"

    def __init__(self, sigma=1.2, exploration_std_fraction=0.1, episodes=200,
                 hidden_sizes=(256, 256), batch_size=256, gamma=0.995,
                 learning_rate=5e-4, cost_budget=0.024, warmup_episodes=5,
                 updates_per_step=1, actor_delay=2, soft_update_rate=0.005,
                 replay_capacity=100_000, checkpoint_every=100,
                 env_config=None, seed=0):
        self.sigma = sigma
        self.exploration_std_fraction = exploration_std_fraction
        self.episodes = episodes
        self.hidden_sizes = hidden_sizes
        self.batch_size = batch_size
        self.gamma = gamma
        self.learning_rate = learning_rate
        self.cost_budget = cost_budget
        self.warmup_episodes = warmup_episodes
        self.updates_per_step = updates_per_step
        self.actor_delay = actor_delay
        self.soft_update_rate = soft_update_rate
        self.replay_capacity = replay_capacity
        self.checkpoint_every = checkpoint_every
        self.env_config = env_config
        self.seed = seed

    def _blank_learner(self, obs_dim, lag, env_cfg):
        return DdpgLearner(obs_dim, self._train_config(), env_cfg.action_low,
                           env_cfg.action_high, rng_streams(self.seed)["init"],
                           exploration_std_fraction=self.exploration_std_fraction)

    def fit(self, X, y=None):
        series = as_price_series(X)
        env_cfg = self._resolved_env_config()
        env = EvChargingEnv(env_cfg)
        mean, std = normalization_stats(series)
        env.set_normalization(mean, std)
        days = valid_episode_days(series, env_cfg)
        result = train_penalized_ddpg(env, series, days, self._train_config(),
                                      rng_streams(self.seed), self.sigma,
                                      self.exploration_std_fraction)
        self._finish_fit(result, env_cfg, mean, std)
        return self


class MpcScheduler(BaseEstimator):
    """Receding-horizon LP planning presented through the estimator API.

    Nothing is learned: fit only pins down the environment settings.
    predict is deliberately unsupported, because planning needs the whole
    price context of a day rather than a single observation row; use
    evaluate (or the rollout functions) instead.
    """

    def __init__(self, price_error_fraction=0.0, departure_mode="known",
                 resolve_each_step=True, env_config=None, seed=0):
        self.price_error_fraction = price_error_fraction
        self.departure_mode = departure_mode
        self.resolve_each_step = resolve_each_step
        self.env_config = env_config
        self.seed = seed

    def _mpc_config(self) -> MpcConfig:
        return MpcConfig(
            price_error_fraction=self.price_error_fraction,
            departure_mode=self.departure_mode,
            resolve_each_step=self.resolve_each_step,
        )

    def fit(self, X=None, y=None):
        self._mpc_config()  # validates the parameters
        self.env_config_ = self.env_config if self.env_config is not None else EvEnvConfig()
        return self

    def predict(self, X):
        raise NotImplementedError(
            "planning needs a full day of prices and the session context; "
            "use evaluate() or rollout.run_episode with an MpcPlanner"
        )

    def evaluate(self, X, days=None, seed=None):
        check_is_fitted(self, "env_config_")
        series = as_price_series(X)
        env = EvChargingEnv(self.env_config_)
        # Planning never reads observation vectors, but give the env
        # usable stats anyway so mixed pipelines can observe states.
        env.set_normalization(*normalization_stats(series))
        if days is None:
            days = valid_episode_days(series, env.cfg)
        controller = MpcPlanner(self._mpc_config())
        return evaluate_controller(env, series, days, controller,
                                   self.seed if seed is None else seed)


ESTIMATOR_KINDS = {
    AugmentedLagrangianSAC._kind: AugmentedLagrangianSAC,
    PenalizedSAC._kind: PenalizedSAC,
    PenalizedDDPG._kind: PenalizedDDPG,
}


def load_estimator(path):
    """Load whichever fitted estimator a checkpoint file holds."""
    meta, _ = load_checkpoint(path)
    kind = meta.get("kind")
    if kind not in ESTIMATOR_KINDS:
        raise CheckpointError(f"unknown model kind {kind!r} in checkpoint")
    return ESTIMATOR_KINDS[kind].load(path)
