"""Constrained EV charge scheduling over hourly electricity prices.

Learned schedulers (constrained soft actor-critic, penalty-shaped SAC and
DDPG) and a receding-horizon LP planner share one simulated charging
environment, with an estimator-style API on top and a CLI for seeded,
reproducible experiment runs.
"""

from .alsac import (LagrangeState, TrainConfig, actor_gradient, dual_update,
                    lagrangian_value, select_best_checkpoint,
                    train_constrained_sac)
from .base import (AugmentedLagrangianSAC, MpcScheduler, PenalizedDDPG,
                   PenalizedSAC, load_estimator)
from .env import (EvChargingEnv, EvEnvConfig, Session, TruncatedNormal,
                  normalization_stats, sample_session, valid_episode_days)
from .errors import (CheckpointError, ConfigError, EnvError, EvschedError,
                     LpInfeasibleError, LpUnboundedError, PriceDataError)
from .lp import LpProblem, simplex_solve, solve_charging_lp
from .mpc import MpcConfig, MpcPlanner, forecast_prices
from .penalized import DdpgLearner, shaped_reward, train_penalized_ddpg, train_penalized_sac
from .prices import (PriceSeries, SyntheticPriceSpec, gen_synthetic,
                     load_price_csv, price_window, split_train_test)
from .rollout import (EvalResult, PolicyController, evaluate_controller,
                      run_episode)
from .runner import compare_runs, execute_run, run_from_config, trace_run

__version__ = "0.1.0"

__all__ = [
    "AugmentedLagrangianSAC", "CheckpointError", "ConfigError", "DdpgLearner",
    "EnvError", "EvChargingEnv", "EvEnvConfig", "EvalResult", "EvschedError",
    "LagrangeState", "LpInfeasibleError", "LpProblem", "LpUnboundedError",
    "MpcConfig", "MpcPlanner", "MpcScheduler", "PenalizedDDPG", "PenalizedSAC",
    "PolicyController", "PriceDataError", "PriceSeries", "Session",
    "SyntheticPriceSpec", "TrainConfig", "TruncatedNormal", "actor_gradient",
    "compare_runs", "dual_update", "evaluate_controller", "execute_run",
    "forecast_prices", "gen_synthetic", "lagrangian_value", "load_estimator",
    "load_price_csv", "normalization_stats", "price_window", "run_episode",
    "run_from_config", "sample_session", "select_best_checkpoint",
    "shaped_reward", "simplex_solve", "solve_charging_lp", "split_train_test",
    "trace_run", "train_constrained_sac", "train_penalized_ddpg",
    "train_penalized_sac", "valid_episode_days",
]
