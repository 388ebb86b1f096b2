"""Experiment runs and their on-disk artifacts.

A run trains (or configures) one method from a RunSpec and writes into its
output directory:

    resolved.cfg          canonical config, every default explicit
    log.csv               one row per training episode (empty for mpc)
    metrics.csv           evaluation summary for this method
    checkpoint_best.ckpt  selected model parameters (learned methods only)
    run.json              digests, sizes, wall-clock, raw metrics

Everything except run.json is byte-identical across reruns of the same
config on the same machine; run.json carries the wall clock and is the
one file allowed to differ.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .alsac import LOG_COLUMNS
from .base import (AugmentedLagrangianSAC, MpcScheduler, PenalizedDDPG,
                   PenalizedSAC, load_estimator)
from .config import RunSpec, load_run_config, resolved_config_text
from .env import EvChargingEnv, normalization_stats, valid_episode_days
from .errors import ConfigError
from .mpc import MpcConfig, MpcPlanner
from .prices import (PriceSeries, SyntheticPriceSpec, gen_synthetic,
                     load_price_csv, split_train_test)
from .rollout import PolicyController, eval_session, run_episode
from .utils import day_rng, fmt_eur, fmt_stat, sha256_hex, write_csv

METRICS_COLUMNS = (
    "method", "episodes", "mean_cost_eur", "mean_violation_kwh",
    "max_violation_kwh", "violation_rate", "mean_final_soc_kwh",
)

_KIND_BY_METHOD = {"alsac": "alsac", "sac": "penalized-sac", "ddpg": "penalized-ddpg"}


def build_series(data) -> PriceSeries:
    if data.source == "csv":
        return load_price_csv(data.path, unit=data.unit)
    spec = SyntheticPriceSpec(pattern=data.pattern, low=data.low, high=data.high,
                              cheap_hours=tuple(data.cheap_hours), noise=data.noise,
                              seed=data.data_seed)
    return gen_synthetic(spec, data.days)


def series_digest(series: PriceSeries) -> str:
    head = series.start.isoformat().encode("ascii")
    return sha256_hex(head + b"|" + np.ascontiguousarray(series.prices).tobytes())


def eval_day_range(series: PriceSeries, test_days: int, env_cfg) -> range:
    """Episode anchors inside the held-out tail that fit the series."""
    all_days = valid_episode_days(series, env_cfg)
    first_test = series.n_days - test_days
    start = max(first_test, all_days.start)
    return range(start, all_days.stop)


def _make_estimator(spec: RunSpec):
    t = spec.train
    lag = spec.lag
    common = dict(
        episodes=t.episodes, hidden_sizes=t.hidden_sizes, batch_size=t.batch_size,
        gamma=t.gamma, learning_rate=t.learning_rate, cost_budget=lag.cost_budget,
        warmup_episodes=t.warmup_episodes, updates_per_step=t.updates_per_step,
        actor_delay=t.actor_delay, soft_update_rate=t.soft_update_rate,
        replay_capacity=t.replay_capacity, checkpoint_every=t.checkpoint_every,
        env_config=spec.env, seed=spec.seed,
    )
    name = spec.method.name
    if name == "alsac":
        return AugmentedLagrangianSAC(
            multiplier_rate=lag.step_lambda, entropy_target=lag.entropy_target,
            penalty_coeff=lag.penalty_coeff, literal_dual_signs=lag.literal_dual_signs,
            **common)
    if name == "sac":
        return PenalizedSAC(sigma=spec.method.sigma, multiplier_rate=lag.step_lambda,
                            entropy_target=lag.entropy_target, **common)
    if name == "ddpg":
        return PenalizedDDPG(
            sigma=spec.method.sigma,
            exploration_std_fraction=spec.method.exploration_std_fraction, **common)
    if name == "mpc":
        return MpcScheduler(
            price_error_fraction=spec.method.price_error_fraction,
            departure_mode=spec.method.departure_mode,
            resolve_each_step=spec.method.resolve_each_step,
            env_config=spec.env, seed=spec.seed)
    raise ConfigError([f"unknown method {name!r}"])


def _train_log_rows(records):
    rows = []
    for r in records:
        rows.append((
            str(r.episode), str(r.env_steps), fmt_eur(r.cost_eur),
            fmt_eur(r.violation_kwh), fmt_stat(r.alpha), fmt_stat(r.lam),
            fmt_stat(r.critic_loss), fmt_stat(r.cost_critic_loss),
            fmt_stat(r.actor_objective),
        ))
    return rows


def _metrics_row(method: str, result) -> tuple:
    return (
        method, str(len(result.episodes)), fmt_eur(result.mean_cost_eur),
        fmt_eur(result.mean_violation_kwh), fmt_eur(result.max_violation_kwh),
        fmt_stat(result.violation_rate), fmt_eur(result.mean_final_soc),
    )


@dataclass
class RunOutcome:
    out_dir: Path
    spec: RunSpec
    eval_result: object
    run_info: dict


def execute_run(spec: RunSpec, out_dir) -> RunOutcome:
    """Train/evaluate one method and write the artifact directory."""
    started = time.monotonic()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    series = build_series(spec.data)
    if series.n_days <= spec.data.test_days:
        raise ConfigError([
            f"series has {series.n_days} days, need more than test_days = {spec.data.test_days}"
        ])
    split = split_train_test(series, spec.data.test_days)
    train_days = valid_episode_days(split.train, spec.env)
    eval_days = eval_day_range(series, spec.data.test_days, spec.env)
    if spec.method.name != "mpc" and spec.train.episodes > 0 and len(train_days) == 0:
        raise ConfigError(["no training day fits the series; add data or move anchor_hour"])
    if len(eval_days) == 0:
        raise ConfigError(["no evaluation day fits the held-out tail"])

    resolved = resolved_config_text(spec)
    (out / "resolved.cfg").write_text(resolved, encoding="utf-8")

    est = _make_estimator(spec)
    if spec.method.name == "mpc":
        est.fit()
        write_csv(out / "log.csv", LOG_COLUMNS, [])
        env_steps = 0
    else:
        est.fit(split.train)
        write_csv(out / "log.csv", LOG_COLUMNS, _train_log_rows(est.train_result_.records))
        est.save(out / "checkpoint_best.ckpt")
        env_steps = est.train_result_.env_steps

    eval_result = est.evaluate(series, days=eval_days, seed=spec.seed)
    write_csv(out / "metrics.csv", METRICS_COLUMNS,
              [_metrics_row(spec.method.name, eval_result)])

    run_info = {
        "method": spec.method.name,
        "seed": spec.seed,
        "cost_budget": spec.lag.cost_budget,
        "config_digest": sha256_hex(resolved.encode("utf-8")),
        "data_digest": series_digest(series),
        "eval_data_digest": series_digest(split.test),
        "n_hours": len(series),
        "train_days": len(train_days),
        "eval_days": [eval_days.start, eval_days.stop],
        "env_steps": env_steps,
        "wall_clock_seconds": round(time.monotonic() - started, 3),
        "metrics": {
            "episodes": len(eval_result.episodes),
            "mean_cost_eur": eval_result.mean_cost_eur,
            "mean_violation_kwh": eval_result.mean_violation_kwh,
            "max_violation_kwh": eval_result.max_violation_kwh,
            "violation_rate": eval_result.violation_rate,
            "mean_final_soc_kwh": eval_result.mean_final_soc,
        },
    }
    (out / "run.json").write_text(json.dumps(run_info, indent=2, sort_keys=True) + "\n",
                                  encoding="utf-8")
    return RunOutcome(out_dir=out, spec=spec, eval_result=eval_result, run_info=run_info)


def run_from_config(config_path, out_dir, seed: int | None = None) -> RunOutcome:
    spec = load_run_config(config_path)
    if seed is not None:
        spec = replace(spec, seed=int(seed))
    return execute_run(spec, out_dir)


def _read_run_dir(path: Path) -> dict:
    problems = []
    info_path = path / "run.json"
    metrics_path = path / "metrics.csv"
    if not info_path.is_file():
        problems.append(f"{path}: missing run.json")
    if not metrics_path.is_file():
        problems.append(f"{path}: missing metrics.csv")
    if problems:
        raise ConfigError(problems)
    info = json.loads(info_path.read_text(encoding="utf-8"))
    lines = metrics_path.read_text(encoding="utf-8").strip().split("\n")
    header = tuple(lines[0].split(","))
    if header != METRICS_COLUMNS or len(lines) != 2:
        raise ConfigError([f"{path}: metrics.csv does not look like a run summary"])
    row = dict(zip(header, lines[1].split(",")))
    return {"dir": path, "info": info, "row": row}


def compare_runs(run_dirs, out_path=None):
    """Cross-method table from finished run directories.

    Refuses to compare runs evaluated on different data or budgets; the
    winning row is the cheapest method whose mean violation fits the
    budget (falling back to least-violating).
    """
    if len(run_dirs) < 2:
        raise ConfigError(["compare needs at least two run directories"])
    runs = [_read_run_dir(Path(d)) for d in run_dirs]
    problems = []
    base = runs[0]["info"]
    for r in runs[1:]:
        if r["info"]["eval_data_digest"] != base["eval_data_digest"]:
            problems.append(
                f"{r['dir']}: evaluated on different data than {runs[0]['dir']}")
        if r["info"]["cost_budget"] != base["cost_budget"]:
            problems.append(
                f"{r['dir']}: cost budget differs from {runs[0]['dir']}")
    if problems:
        raise ConfigError(problems)

    budget = float(base["cost_budget"])
    feasible = [float(r["row"]["mean_violation_kwh"]) <= budget for r in runs]
    if any(feasible):
        candidates = [i for i, ok in enumerate(feasible) if ok]
        best = min(candidates, key=lambda i: float(runs[i]["row"]["mean_cost_eur"]))
        rule = "best = cheapest method with mean violation within budget"
    else:
        best = min(range(len(runs)),
                   key=lambda i: float(runs[i]["row"]["mean_violation_kwh"]))
        rule = "no method met the budget; best = smallest mean violation"

    rows = [tuple(r["row"][c] for c in METRICS_COLUMNS) for r in runs]
    if out_path is not None:
        write_csv(out_path, METRICS_COLUMNS, rows)

    display = [METRICS_COLUMNS] + [
        ((("*" if i == best else " ") + row[0]),) + row[1:]
        for i, row in enumerate(rows)
    ]
    widths = [max(len(r[i]) for r in display) for i in range(len(METRICS_COLUMNS))]
    lines = []
    for r in display:
        lines.append("  ".join(val.ljust(w) for val, w in zip(r, widths)).rstrip())
    lines.append("")
    lines.append(f"violation budget: {fmt_eur(budget)} kWh; {rule}")
    return {"text": "\n".join(lines), "best": runs[best]["dir"].name,
            "rows": rows, "budget": budget}


TRACE_COLUMNS = ("day", "t", "hour", "status", "price", "soc_before",
                 "action", "applied", "reward_eur", "cost_kwh")


def _controller_for_trace(spec: RunSpec, run_dir: Path, env: EvChargingEnv):
    if spec.method.name == "mpc":
        return MpcPlanner(MpcConfig(
            price_error_fraction=spec.method.price_error_fraction,
            departure_mode=spec.method.departure_mode,
            resolve_each_step=spec.method.resolve_each_step))
    ckpt = run_dir / "checkpoint_best.ckpt"
    if not ckpt.is_file():
        raise ConfigError([f"{run_dir}: missing checkpoint_best.ckpt"])
    est = load_estimator(ckpt)
    env.set_normalization(est.norm_mean_, est.norm_std_)
    return PolicyController(est.learner_, env)


def trace_run(run_dir, days=None, out_path=None):
    """Replay evaluation days of a finished run, one table row per hour.

    The (seed, day)-keyed session and controller RNGs guarantee the rows
    match what evaluation saw, even for a single day in isolation.
    """
    run_dir = Path(run_dir)
    cfg_path = run_dir / "resolved.cfg"
    if not cfg_path.is_file():
        raise ConfigError([f"{run_dir}: missing resolved.cfg"])
    spec = load_run_config(cfg_path)
    series = build_series(spec.data)
    split = split_train_test(series, spec.data.test_days)
    all_eval = eval_day_range(series, spec.data.test_days, spec.env)
    if days is None:
        days = [all_eval.start]
    bad = [d for d in days if d not in all_eval]
    if bad:
        raise ConfigError([
            f"day {d} outside the evaluation range "
            f"{all_eval.start}..{all_eval.stop - 1}" for d in bad
        ])

    env = EvChargingEnv(spec.env)
    env.set_normalization(*normalization_stats(split.train))
    controller = _controller_for_trace(spec, run_dir, env)

    rows = []
    for day in days:
        session = eval_session(spec.seed, day, spec.env)
        rng = day_rng(spec.seed, "eval-control", day)
        result = run_episode(env, series, day, session, controller, rng)
        t_arr = env.arrival_step
        last_t = result.steps[-1].t
        for rec in result.steps:
            if rec.t < t_arr:
                status = "away"
            elif rec.t == last_t and rec.done:
                status = "departure"
            else:
                status = "parked"
            rows.append((
                str(day), str(rec.t), str((spec.env.anchor_hour + rec.t) % 24),
                status, fmt_eur(rec.price), fmt_eur(rec.soc_before),
                fmt_eur(rec.action), fmt_eur(rec.action_applied),
                fmt_eur(rec.reward), fmt_eur(rec.cost),
            ))
        # Fill the rest of the anchored day so every day prints 24 rows.
        for t in range(last_t + 1, 24):
            hour_idx = day * 24 + spec.env.anchor_hour + t
            rows.append((
                str(day), str(t), str((spec.env.anchor_hour + t) % 24), "gone",
                fmt_eur(float(series.prices[hour_idx])), fmt_eur(result.final_soc),
                "", "", fmt_eur(0.0), fmt_eur(0.0),
            ))

    if out_path is not None:
        write_csv(out_path, TRACE_COLUMNS, rows)
    display = [TRACE_COLUMNS] + rows
    widths = [max(len(r[i]) for r in display) for i in range(len(TRACE_COLUMNS))]
    lines = ["  ".join(val.ljust(w) for val, w in zip(r, widths)).rstrip()
             for r in display]
    return {"text": "\n".join(lines), "rows": rows}


def parse_day_span(text: str):
    """CLI day selector: '41' or '41..45' (inclusive)."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(text)]
    except ValueError:
        raise ConfigError([f"bad day selector {text!r}; use N or N..M"]) from None
