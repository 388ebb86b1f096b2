"""Soft actor-critic with an augmented-Lagrangian cost constraint.

A reward critic pair and a cost critic pair (each with Polyak targets) are
fit by soft TD regression; the actor ascends a Lagrangian that trades
return against entropy (multiplier alpha) and against expected discounted
constraint cost (multiplier lambda, with a one-sided quadratic penalty on
budget violation). The multipliers follow projected dual ascent on their
constraint residuals.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .env import EvChargingEnv, sample_session
from .nn import AdamState, DenseNet, adam_step, soft_update
from .policy import GaussianPolicyHead
from .prices import PriceSeries
from .replay import Batch, ReplayBuffer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 200
    gamma: float = 0.995
    batch_size: int = 256
    learning_rate: float = 5e-4
    hidden_sizes: tuple[int, ...] = (256, 256)
    soft_update_rate: float = 0.005
    warmup_episodes: int = 5
    updates_per_step: int = 1
    actor_delay: int = 2
    replay_capacity: int = 100_000
    checkpoint_every: int = 100      # episodes; 0 disables intermediate snapshots

    def __post_init__(self):
        if self.episodes < 0 or self.batch_size < 1 or self.replay_capacity < 1:
            raise ValueError("episodes >= 0, batch_size >= 1, replay_capacity >= 1 required")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.updates_per_step < 1 or self.actor_delay < 1:
            raise ValueError("updates_per_step and actor_delay must be >= 1")


@dataclass(frozen=True)
class LagrangeState:
    """Dual variables and their update rule parameters.

    ``step_lambda`` doubles as the quadratic penalty coefficient unless
    ``penalty_coeff`` overrides it. ``constraint_frozen`` pins lambda at its
    initial value and disables the quadratic term (shaped-reward baselines).
    ``literal_dual_signs`` switches the duals to plain gradient ascent on
    the Lagrangian value instead of ascent on the constraint residuals.
    """

    alpha: float = 0.0
    lam: float = 0.0
    step_alpha: float = 1e-5
    step_lambda: float = 1e-5
    entropy_target: float = -1.0
    cost_budget: float = 0.024
    penalty_coeff: float | None = None
    constraint_frozen: bool = False
    literal_dual_signs: bool = False

    @property
    def quad_coeff(self) -> float:
        if self.constraint_frozen:
            return 0.0
        return self.step_lambda if self.penalty_coeff is None else self.penalty_coeff


def dual_update(lag: LagrangeState, mean_log_prob: float, mean_cost_q: float) -> LagrangeState:
    """Projected dual step from batch statistics.

    Default direction: alpha grows while entropy is below target, lambda
    grows while expected discounted cost exceeds the budget; both are
    projected onto [0, inf).
    """
    if lag.literal_dual_signs:
        resid_alpha = -lag.entropy_target - mean_log_prob
        resid_lambda = lag.cost_budget - mean_cost_q
    else:
        resid_alpha = lag.entropy_target + mean_log_prob
        resid_lambda = mean_cost_q - lag.cost_budget
    alpha = max(0.0, lag.alpha + lag.step_alpha * resid_alpha)
    lam = lag.lam if lag.constraint_frozen else max(0.0, lag.lam + lag.step_lambda * resid_lambda)
    return replace(lag, alpha=alpha, lam=lam)


def _critic_input(obs: np.ndarray, action: np.ndarray, scale: float, offset: float) -> np.ndarray:
    a = (np.asarray(action, dtype=np.float64).reshape(-1, 1) - offset) / scale
    return np.concatenate([np.atleast_2d(obs), a], axis=1)


def critic_targets(batch: Batch, policy: GaussianPolicyHead,
                   q_targets, cost_targets, gamma: float, alpha: float,
                   rng: np.random.Generator):
    """Soft TD targets for both critic pairs, sharing one fresh action draw.

    y   = r + (1 - done) * gamma * (min Q_hat(s', a') - alpha * log pi(a'|s'))
    y_c = c + (1 - done) * gamma *  min Qc_hat(s', a')
    """
    xi = rng.standard_normal(batch.size)
    a_next, logp_next = policy.sample(batch.next_obs, xi)
    x_next = _critic_input(batch.next_obs, a_next, policy.scale, policy.offset)
    q_min = np.minimum(q_targets[0].forward(x_next)[:, 0], q_targets[1].forward(x_next)[:, 0])
    qc_min = np.minimum(cost_targets[0].forward(x_next)[:, 0],
                        cost_targets[1].forward(x_next)[:, 0])
    not_done = 1.0 - batch.done
    y = batch.reward + not_done * gamma * (q_min - alpha * logp_next)
    y_c = batch.cost + not_done * gamma * qc_min
    return y, y_c


def critic_update(nets, adams, x: np.ndarray, y: np.ndarray, lr: float) -> float:
    """One MSE regression step for each critic in a pair; returns the mean
    pre-update loss across the pair."""
    losses = []
    b = x.shape[0]
    for net, adam in zip(nets, adams):
        pred, cache = net.forward_cached(x)
        err = pred[:, 0] - y
        losses.append(float(np.mean(err * err)))
        upstream = (2.0 / b) * err[:, None]
        grads, _ = net.backward(cache, upstream)
        adam_step(net.params, grads, adam, lr)
    return float(np.mean(losses))


def _policy_q_terms(policy: GaussianPolicyHead, q_pair, qc_pair,
                    obs: np.ndarray, xi: np.ndarray):
    """Fresh policy actions on ``obs`` plus min-critic values and caches."""
    cache = policy.sample_cached(obs, xi)
    x = _critic_input(obs, cache.action, policy.scale, policy.offset)
    q_out = []
    q_caches = []
    for net in (*q_pair, *qc_pair):
        out, c = net.forward_cached(x)
        q_out.append(out[:, 0])
        q_caches.append(c)
    q1, q2, qc1, qc2 = q_out
    q_mask = q1 <= q2
    qc_mask = qc1 <= qc2
    q_min = np.where(q_mask, q1, q2)
    qc_min = np.where(qc_mask, qc1, qc2)
    return cache, q_caches, q_min, qc_min, q_mask, qc_mask


def _lagrangian_terms(q_min, qc_min, log_prob, lag: LagrangeState):
    mean_q = float(np.mean(q_min))
    mean_qc = float(np.mean(qc_min))
    mean_logp = float(np.mean(log_prob))
    viol = max(0.0, mean_qc - lag.cost_budget)
    value = (
        mean_q
        + lag.alpha * (-lag.entropy_target - mean_logp)
        + lag.lam * (lag.cost_budget - mean_qc)
        - 0.5 * lag.quad_coeff * viol * viol
    )
    return value, mean_logp, mean_qc, viol


def lagrangian_value(policy: GaussianPolicyHead, q_pair, qc_pair,
                     obs: np.ndarray, xi: np.ndarray, lag: LagrangeState) -> float:
    """Actor objective on a batch with fixed noise and frozen critics.

    L = E[min Q] + alpha * (-entropy_target - E[log pi])
      + lambda * (budget - E[min Qc]) - (quad/2) * max(0, E[min Qc] - budget)^2
    """
    terms = _policy_q_terms(policy, q_pair, qc_pair, obs, xi)
    value, _, _, _ = _lagrangian_terms(terms[2], terms[3], terms[0].log_prob, lag)
    return value


def _assemble_actor_gradient(policy, q_pair, qc_pair, terms, lag: LagrangeState):
    cache, q_caches, q_min, qc_min, q_mask, qc_mask = terms
    b = cache.action.shape[0]
    value, mean_logp, mean_qc, viol = _lagrangian_terms(q_min, qc_min, cache.log_prob, lag)

    # d value / d action, routed through whichever critic attains the min.
    def _input_grad(net, net_cache, upstream_col):
        _, g = net.backward(net_cache, upstream_col[:, None], need_input_grad=True)
        return g[:, -1] / policy.scale

    w_q = 1.0 / b
    g_a = _input_grad(q_pair[0], q_caches[0], w_q * q_mask)
    g_a = g_a + _input_grad(q_pair[1], q_caches[1], w_q * (~q_mask))
    w_qc = -(lag.lam + lag.quad_coeff * viol) / b
    if w_qc != 0.0:
        g_a = g_a + _input_grad(qc_pair[0], q_caches[2], w_qc * qc_mask)
        g_a = g_a + _input_grad(qc_pair[1], q_caches[3], w_qc * (~qc_mask))
    g_logp = np.full(b, -lag.alpha / b)
    grads = policy.backward_through_sample(cache, g_a, g_logp)
    return grads, value, mean_logp, mean_qc


def actor_gradient(policy: GaussianPolicyHead, q_pair, qc_pair,
                   obs: np.ndarray, xi: np.ndarray, lag: LagrangeState):
    """Exact parameter gradient of ``lagrangian_value`` w.r.t. the policy.

    Returns (grads, value, mean_log_prob, mean_cost_q).
    """
    terms = _policy_q_terms(policy, q_pair, qc_pair, obs, xi)
    return _assemble_actor_gradient(policy, q_pair, qc_pair, terms, lag)


class ConstrainedSacLearner:
    """Networks, optimizers, and the per-batch update rule."""

    def __init__(self, obs_dim: int, cfg: TrainConfig, lag: LagrangeState,
                 action_low: float, action_high: float, rng_init: np.random.Generator):
        self.cfg = cfg
        self.lag = lag
        self.policy = GaussianPolicyHead(obs_dim, cfg.hidden_sizes, rng_init,
                                         action_low, action_high)
        sizes = (obs_dim + 1, *cfg.hidden_sizes, 1)
        self.q_pair = [DenseNet(sizes, rng_init) for _ in range(2)]
        self.qc_pair = [DenseNet(sizes, rng_init) for _ in range(2)]
        self.q_targets = [net.copy() for net in self.q_pair]
        self.qc_targets = [net.copy() for net in self.qc_pair]
        self.adam_policy = AdamState.for_params(self.policy.net.params)
        self.adam_q = [AdamState.for_params(n.params) for n in self.q_pair]
        self.adam_qc = [AdamState.for_params(n.params) for n in self.qc_pair]
        self.update_count = 0
        self.nonfinite_strikes = 0

    def act(self, obs: np.ndarray, rng: np.random.Generator) -> float:
        xi = rng.standard_normal(1)
        action, _ = self.policy.sample(obs[None, :], xi)
        return float(action[0])

    def act_eval(self, obs: np.ndarray) -> float:
        return float(self.policy.deterministic(obs[None, :])[0])

    def update(self, batch: Batch, rng: np.random.Generator) -> dict:
        cfg = self.cfg
        y, y_c = critic_targets(batch, self.policy, self.q_targets, self.qc_targets,
                                cfg.gamma, self.lag.alpha, rng)
        x = _critic_input(batch.obs, batch.action, self.policy.scale, self.policy.offset)
        q_loss = critic_update(self.q_pair, self.adam_q, x, y, cfg.learning_rate)
        qc_loss = critic_update(self.qc_pair, self.adam_qc, x, y_c, cfg.learning_rate)

        stats = {"critic_loss": q_loss, "cost_critic_loss": qc_loss, "actor_objective": None}
        self.update_count += 1
        if self.update_count % cfg.actor_delay == 0:
            xi = rng.standard_normal(batch.size)
            # Dual statistics and the actor step share the same re-sampled
            # batch; multipliers move first, the actor then ascends the
            # updated Lagrangian. The forward terms are reused for both.
            terms = _policy_q_terms(self.policy, self.q_pair, self.qc_pair, batch.obs, xi)
            mean_logp = float(np.mean(terms[0].log_prob))
            mean_qc = float(np.mean(terms[3]))
            self.lag = dual_update(self.lag, mean_logp, mean_qc)
            grads, value, _, _ = _assemble_actor_gradient(
                self.policy, self.q_pair, self.qc_pair, terms, self.lag)
            if np.all(np.isfinite(grads)):
                adam_step(self.policy.net.params, -grads, self.adam_policy, cfg.learning_rate)
            else:
                self.nonfinite_strikes += 1
                logger.warning("actor gradient non-finite, step skipped")
            stats["actor_objective"] = value

        for online, target in zip(self.q_pair + self.qc_pair,
                                  self.q_targets + self.qc_targets):
            soft_update(target.params, online.params, cfg.soft_update_rate)

        if not (np.isfinite(q_loss) and np.isfinite(qc_loss)):
            self.nonfinite_strikes += 1
        return stats

    def parameter_arrays(self) -> dict[str, np.ndarray]:
        arrays = {"policy": self.policy.net.params}
        for i, net in enumerate(self.q_pair):
            arrays[f"q{i + 1}"] = net.params
        for i, net in enumerate(self.qc_pair):
            arrays[f"qc{i + 1}"] = net.params
        for i, net in enumerate(self.q_targets):
            arrays[f"q{i + 1}_target"] = net.params
        for i, net in enumerate(self.qc_targets):
            arrays[f"qc{i + 1}_target"] = net.params
        return arrays

    def load_parameter_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        own = self.parameter_arrays()
        for name, params in own.items():
            params[:] = arrays[name]


@dataclass
class TrainRecord:
    episode: int
    env_steps: int
    cost_eur: float
    violation_kwh: float
    alpha: float
    lam: float
    critic_loss: float
    cost_critic_loss: float
    actor_objective: float


@dataclass
class CheckpointSnapshot:
    episode: int
    env_steps: int
    arrays: dict[str, np.ndarray]
    lag: LagrangeState
    probe_cost: float
    probe_violation: float


@dataclass
class TrainResult:
    records: list[TrainRecord]
    checkpoints: list[CheckpointSnapshot]
    learner: object
    env_steps: int


LOG_COLUMNS = (
    "episode", "env_steps", "episode_cost_eur", "episode_violation_kwh",
    "alpha", "lambda", "critic_loss", "cost_critic_loss", "actor_objective",
)


def _probe_policy(learner, env: EvChargingEnv, series: PriceSeries,
                  probe_days, probe_sessions) -> tuple[float, float]:
    """Mean cost and violation of the deterministic policy over probe episodes.

    Exploration noise makes per-episode training stats a poor proxy for how
    the mean action behaves, so snapshots are scored the same way evaluation
    will score them: greedy actions, fixed sessions.
    """
    from .rollout import PolicyController, run_episode

    controller = PolicyController(learner, env)
    costs = []
    viols = []
    for day, session in zip(probe_days, probe_sessions):
        result = run_episode(env, series, int(day), session, controller)
        costs.append(result.cost_eur)
        viols.append(result.violation_kwh)
    return float(np.mean(costs)), float(np.mean(viols))


def _snapshot(learner, episode, env_steps, probe_cost,
              probe_violation) -> CheckpointSnapshot:
    arrays = {k: v.copy() for k, v in learner.parameter_arrays().items()}
    return CheckpointSnapshot(episode=episode, env_steps=env_steps, arrays=arrays,
                              lag=learner.lag, probe_cost=probe_cost,
                              probe_violation=probe_violation)


def select_best_checkpoint(checkpoints: list[CheckpointSnapshot], budget: float) -> int:
    """Pick the cheapest checkpoint among those meeting the violation budget
    on deterministic probe episodes; if none qualify, the least-violating one."""
    if not checkpoints:
        raise ValueError("no checkpoints to select from")
    qualifying = [i for i, c in enumerate(checkpoints) if c.probe_violation <= budget]
    if qualifying:
        return min(qualifying, key=lambda i: checkpoints[i].probe_cost)
    return min(range(len(checkpoints)), key=lambda i: checkpoints[i].probe_violation)


def train_constrained_sac(env: EvChargingEnv, series: PriceSeries, train_days,
                          cfg: TrainConfig, lag: LagrangeState,
                          streams: dict[str, np.random.Generator],
                          shape_sigma: float = 0.0,
                          max_nonfinite: int = 10) -> TrainResult:
    """Run episodic training and return per-episode records plus snapshots.

    ``shape_sigma`` > 0 stores shaped rewards r - sigma * cost in the buffer
    (the logged cost/violation stay unshaped). Training halts cleanly if
    updates go non-finite ``max_nonfinite`` times.
    """
    learner = ConstrainedSacLearner(env.observation_dim, cfg, lag,
                                    env.cfg.action_low, env.cfg.action_high,
                                    streams["init"])
    return run_training(env, series, train_days, cfg, learner, streams,
                        shape_sigma=shape_sigma, max_nonfinite=max_nonfinite)


def run_training(env: EvChargingEnv, series: PriceSeries, train_days,
                 cfg: TrainConfig, learner,
                 streams: dict[str, np.random.Generator],
                 shape_sigma: float = 0.0,
                 max_nonfinite: int = 10) -> TrainResult:
    """The episodic loop shared by every replay-based learner.

    A learner provides act/update/lag/parameter_arrays plus a
    nonfinite_strikes counter; the loop owns day and session sampling,
    warmup exploration, the replay buffer, and snapshotting.
    """
    train_days = np.asarray(list(train_days), dtype=np.int64)
    if cfg.episodes > 0 and train_days.size == 0:
        raise ValueError("no valid training days supplied")
    buffer = ReplayBuffer(cfg.replay_capacity, env.observation_dim)
    records: list[TrainRecord] = []
    checkpoints: list[CheckpointSnapshot] = []
    env_steps = 0
    rng_day = streams["day"]
    rng_session = streams["session"]
    rng_policy = streams["policy"]
    rng_learn = streams["learn"]
    # Fixed probe episodes, drawn once so every snapshot is scored on the
    # same footing. The eval stream is otherwise untouched during training.
    rng_probe = streams["eval"]
    if train_days.size:
        picks = np.unique(np.linspace(0, train_days.size - 1,
                                      min(3, train_days.size)).round().astype(int))
        probe_days = train_days[picks]
    else:
        probe_days = train_days
    probe_sessions = [sample_session(rng_probe, env.cfg) for _ in probe_days]

    for episode in range(cfg.episodes):
        day = int(train_days[rng_day.integers(0, train_days.size)])
        session = sample_session(rng_session, env.cfg)
        state = env.reset(series, day, session)
        obs = env.observe(state)
        ep_cost = 0.0
        ep_viol = 0.0
        ep_stats = {"critic_loss": [], "cost_critic_loss": [], "actor_objective": []}
        done = False
        while not done:
            if episode < cfg.warmup_episodes:
                action = float(rng_policy.uniform(env.cfg.action_low, env.cfg.action_high))
            else:
                action = learner.act(obs, rng_policy)
            state, reward, cost, done, _ = env.step(action)
            next_obs = env.observe(state)
            stored_reward = reward - shape_sigma * cost if shape_sigma else reward
            buffer.push(obs, action, stored_reward, cost, next_obs, done)
            ep_cost += -reward
            ep_viol += cost
            obs = next_obs
            env_steps += 1
            if episode >= cfg.warmup_episodes and len(buffer) >= cfg.batch_size:
                for _ in range(cfg.updates_per_step):
                    stats = learner.update(buffer.sample(rng_learn, cfg.batch_size), rng_learn)
                    for key, val in stats.items():
                        if val is not None:
                            ep_stats[key].append(val)
        if learner.nonfinite_strikes > max_nonfinite:
            logger.error("training halted after %d non-finite updates", learner.nonfinite_strikes)
            break
        records.append(TrainRecord(
            episode=episode,
            env_steps=env_steps,
            cost_eur=ep_cost,
            violation_kwh=ep_viol,
            alpha=learner.lag.alpha,
            lam=learner.lag.lam,
            critic_loss=float(np.mean(ep_stats["critic_loss"])) if ep_stats["critic_loss"] else 0.0,
            cost_critic_loss=(float(np.mean(ep_stats["cost_critic_loss"]))
                              if ep_stats["cost_critic_loss"] else 0.0),
            actor_objective=(float(np.mean(ep_stats["actor_objective"]))
                             if ep_stats["actor_objective"] else 0.0),
        ))
        if cfg.checkpoint_every and (episode + 1) % cfg.checkpoint_every == 0:
            p_cost, p_viol = _probe_policy(learner, env, series, probe_days,
                                           probe_sessions)
            checkpoints.append(_snapshot(learner, episode, env_steps, p_cost, p_viol))
    # Final snapshot always exists so selection has at least one candidate.
    if cfg.episodes > 0:
        last = checkpoints[-1].episode if checkpoints else -1
        if not records or last != records[-1].episode:
            p_cost, p_viol = _probe_policy(learner, env, series, probe_days,
                                           probe_sessions)
            checkpoints.append(_snapshot(learner,
                                         records[-1].episode if records else -1,
                                         env_steps, p_cost, p_viol))
    return TrainResult(records=records, checkpoints=checkpoints, learner=learner,
                       env_steps=env_steps)
