"""INI run configuration: schema, validation, and canonical rendering.

Every key has a default, so an empty file is a valid (synthetic two-tier,
constrained-SAC) run. Validation collects every problem before raising,
and unknown keys get a closest-match suggestion. The canonical rendering
with all defaults filled in is what lands in resolved.cfg and what the
run digest is computed over.
"""

from __future__ import annotations

import configparser
import difflib
from dataclasses import dataclass

from .alsac import LagrangeState, TrainConfig
from .env import EvEnvConfig, TruncatedNormal
from .errors import ConfigError
from .prices import PATTERNS

METHODS = ("alsac", "sac", "ddpg", "mpc")

_BOOL_STATES = {
    "true": True, "false": False, "1": True, "0": False,
    "yes": True, "no": False, "on": True, "off": False,
}

# section -> key -> (type tag, default). Order here is rendering order.
_SCHEMA = {
    "data": {
        "source": ("choice:synthetic,csv", "synthetic"),
        "path": ("str", ""),
        "unit": ("str", "eur/kwh"),
        "pattern": ("choice:" + ",".join(PATTERNS), "two-tier"),
        "low": ("float", 0.05),
        "high": ("float", 0.30),
        "cheap_hours": ("ints", (0, 1, 2, 3, 4, 5)),
        "noise": ("float", 0.0),
        "days": ("int", 120),
        "data_seed": ("int", 0),
        "test_days": ("int", 30),
    },
    "env": {
        "capacity": ("float", 24.0),
        "soc_min": ("float", 4.8),
        "soc_target": ("float", 24.0),
        "max_charge": ("float", 6.0),
        "max_discharge": ("float", 6.0),
        "anchor_hour": ("int", 12),
        "arrival_mean": ("float", 18.0),
        "arrival_std": ("float", 1.0),
        "arrival_low": ("float", 15.0),
        "arrival_high": ("float", 21.0),
        "departure_mean": ("float", 8.0),
        "departure_std": ("float", 1.0),
        "departure_low": ("float", 6.0),
        "departure_high": ("float", 11.0),
        "soc_frac_mean": ("float", 0.5),
        "soc_frac_std": ("float", 0.1),
        "soc_frac_low": ("float", 0.3),
        "soc_frac_high": ("float", 0.8),
        "clip_infeasible_actions": ("bool", True),
        "state_time_features": ("bool", False),
    },
    "train": {
        "episodes": ("int", 200),
        "gamma": ("float", 0.995),
        "batch_size": ("int", 256),
        "learning_rate": ("float", 5e-4),
        "multiplier_rate": ("float", 1e-5),
        "entropy_target": ("float", -1.0),
        "cost_budget": ("float", 0.024),
        "penalty_coeff": ("optfloat", None),
        "literal_dual_signs": ("bool", False),
        "hidden_sizes": ("ints", (256, 256)),
        "soft_update_rate": ("float", 0.005),
        "warmup_episodes": ("int", 5),
        "updates_per_step": ("int", 1),
        "actor_delay": ("int", 2),
        "replay_capacity": ("int", 100_000),
        "checkpoint_every": ("int", 100),
    },
    "method": {
        "name": ("choice:" + ",".join(METHODS), "alsac"),
        "sigma": ("float", 1.2),
        "price_error_fraction": ("float", 0.0),
        "departure_mode": ("choice:known,sampled", "known"),
        "resolve_each_step": ("bool", True),
        "exploration_std_fraction": ("float", 0.1),
    },
    "run": {
        "seed": ("int", 0),
    },
}


@dataclass(frozen=True)
class DataSpec:
    source: str
    path: str
    unit: str
    pattern: str
    low: float
    high: float
    cheap_hours: tuple
    noise: float
    days: int
    data_seed: int
    test_days: int


@dataclass(frozen=True)
class MethodSpec:
    name: str
    sigma: float
    price_error_fraction: float
    departure_mode: str
    resolve_each_step: bool
    exploration_std_fraction: float


@dataclass(frozen=True)
class RunSpec:
    data: DataSpec
    env: EvEnvConfig
    train: TrainConfig
    lag: LagrangeState
    method: MethodSpec
    seed: int


def _coerce(tag: str, raw: str):
    raw = raw.strip()
    if tag == "str":
        return raw
    if tag == "int":
        return int(raw)
    if tag == "float":
        return float(raw)
    if tag == "optfloat":
        return None if raw == "" else float(raw)
    if tag == "bool":
        val = _BOOL_STATES.get(raw.lower())
        if val is None:
            raise ValueError(f"not a boolean: {raw!r}")
        return val
    if tag == "ints":
        if raw == "":
            return ()
        return tuple(int(part.strip()) for part in raw.split(","))
    if tag.startswith("choice:"):
        choices = tag.split(":", 1)[1].split(",")
        if raw not in choices:
            raise ValueError(f"must be one of {', '.join(choices)}; got {raw!r}")
        return raw
    raise AssertionError(f"unhandled schema tag {tag}")


def _render_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return ""
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def _suggest(name: str, known) -> str:
    close = difflib.get_close_matches(name, list(known), n=1)
    return f" (did you mean {close[0]!r}?)" if close else ""


def parse_config_text(text: str, origin: str = "<config>") -> dict:
    """Parse INI text against the schema; returns {section: {key: value}}.

    Raises ConfigError listing every unknown name and bad value at once.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"),
                                       interpolation=None)
    try:
        parser.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError([f"could not parse {origin}: {exc}"]) from exc

    problems = []
    values = {section: dict.fromkeys(keys) for section, keys in _SCHEMA.items()}
    for section, keys in _SCHEMA.items():
        for key, (_, default) in keys.items():
            values[section][key] = default

    for section in parser.sections():
        if section not in _SCHEMA:
            problems.append(f"unknown section [{section}]{_suggest(section, _SCHEMA)}")
            continue
        schema = _SCHEMA[section]
        for key, raw in parser.items(section):
            if key not in schema:
                problems.append(f"unknown key '{key}' in [{section}]{_suggest(key, schema)}")
                continue
            tag = schema[key][0]
            try:
                values[section][key] = _coerce(tag, raw)
            except ValueError as exc:
                problems.append(f"bad value for [{section}] {key}: {exc}")

    if problems:
        raise ConfigError(problems)
    return values


def build_run_spec(values: dict) -> RunSpec:
    """Assemble validated dataclasses; aggregates their complaints."""
    problems = []
    data = DataSpec(**values["data"])
    if data.source == "csv" and not data.path:
        problems.append("[data] source = csv requires a path")
    if data.test_days < 1:
        problems.append("[data] test_days must be >= 1")
    if data.days < 2:
        problems.append("[data] days must be >= 2")

    e = values["env"]
    env_cfg = None
    try:
        env_cfg = EvEnvConfig(
            capacity=e["capacity"],
            soc_min=e["soc_min"],
            soc_target=e["soc_target"],
            max_charge=e["max_charge"],
            max_discharge=e["max_discharge"],
            cost_budget=values["train"]["cost_budget"],
            anchor_hour=e["anchor_hour"],
            arrival=TruncatedNormal(e["arrival_mean"], e["arrival_std"],
                                    e["arrival_low"], e["arrival_high"]),
            departure=TruncatedNormal(e["departure_mean"], e["departure_std"],
                                      e["departure_low"], e["departure_high"]),
            initial_soc_fraction=TruncatedNormal(e["soc_frac_mean"], e["soc_frac_std"],
                                                 e["soc_frac_low"], e["soc_frac_high"]),
            clip_infeasible_actions=e["clip_infeasible_actions"],
            state_time_features=e["state_time_features"],
        )
    except ValueError as exc:
        problems.append(f"[env] {exc}")

    t = values["train"]
    train_cfg = None
    try:
        train_cfg = TrainConfig(
            episodes=t["episodes"],
            gamma=t["gamma"],
            batch_size=t["batch_size"],
            learning_rate=t["learning_rate"],
            hidden_sizes=t["hidden_sizes"],
            soft_update_rate=t["soft_update_rate"],
            warmup_episodes=t["warmup_episodes"],
            updates_per_step=t["updates_per_step"],
            actor_delay=t["actor_delay"],
            replay_capacity=t["replay_capacity"],
            checkpoint_every=t["checkpoint_every"],
        )
    except ValueError as exc:
        problems.append(f"[train] {exc}")

    lag = None
    try:
        lag = LagrangeState(
            step_alpha=t["multiplier_rate"],
            step_lambda=t["multiplier_rate"],
            entropy_target=t["entropy_target"],
            cost_budget=t["cost_budget"],
            penalty_coeff=t["penalty_coeff"],
            literal_dual_signs=t["literal_dual_signs"],
        )
    except ValueError as exc:
        problems.append(f"[train] {exc}")

    m = values["method"]
    method = MethodSpec(
        name=m["name"],
        sigma=m["sigma"],
        price_error_fraction=m["price_error_fraction"],
        departure_mode=m["departure_mode"],
        resolve_each_step=m["resolve_each_step"],
        exploration_std_fraction=m["exploration_std_fraction"],
    )
    if method.sigma < 0:
        problems.append("[method] sigma must be >= 0")
    if method.price_error_fraction < 0:
        problems.append("[method] price_error_fraction must be >= 0")

    if problems:
        raise ConfigError(problems)
    return RunSpec(data=data, env=env_cfg, train=train_cfg, lag=lag,
                   method=method, seed=values["run"]["seed"])


def load_run_config(path) -> RunSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read config file {path}: {exc}"]) from exc
    return build_run_spec(parse_config_text(text, origin=str(path)))


def resolved_config_text(spec: RunSpec) -> str:
    """Canonical INI with every key explicit; the digest input for a run."""
    d = spec.data
    t = spec.train
    m = spec.method
    env = spec.env
    by_section = {
        "data": {
            "source": d.source, "path": d.path, "unit": d.unit,
            "pattern": d.pattern, "low": d.low, "high": d.high,
            "cheap_hours": d.cheap_hours, "noise": d.noise, "days": d.days,
            "data_seed": d.data_seed, "test_days": d.test_days,
        },
        "env": {
            "capacity": env.capacity, "soc_min": env.soc_min,
            "soc_target": env.soc_target, "max_charge": env.max_charge,
            "max_discharge": env.max_discharge, "anchor_hour": env.anchor_hour,
            "arrival_mean": env.arrival.mean, "arrival_std": env.arrival.std,
            "arrival_low": env.arrival.lower, "arrival_high": env.arrival.upper,
            "departure_mean": env.departure.mean, "departure_std": env.departure.std,
            "departure_low": env.departure.lower, "departure_high": env.departure.upper,
            "soc_frac_mean": env.initial_soc_fraction.mean,
            "soc_frac_std": env.initial_soc_fraction.std,
            "soc_frac_low": env.initial_soc_fraction.lower,
            "soc_frac_high": env.initial_soc_fraction.upper,
            "clip_infeasible_actions": env.clip_infeasible_actions,
            "state_time_features": env.state_time_features,
        },
        "train": {
            "episodes": t.episodes, "gamma": t.gamma, "batch_size": t.batch_size,
            "learning_rate": t.learning_rate, "multiplier_rate": spec.lag.step_lambda,
            "entropy_target": spec.lag.entropy_target, "cost_budget": spec.lag.cost_budget,
            "penalty_coeff": spec.lag.penalty_coeff,
            "literal_dual_signs": spec.lag.literal_dual_signs,
            "hidden_sizes": t.hidden_sizes, "soft_update_rate": t.soft_update_rate,
            "warmup_episodes": t.warmup_episodes, "updates_per_step": t.updates_per_step,
            "actor_delay": t.actor_delay, "replay_capacity": t.replay_capacity,
            "checkpoint_every": t.checkpoint_every,
        },
        "method": {
            "name": m.name, "sigma": m.sigma,
            "price_error_fraction": m.price_error_fraction,
            "departure_mode": m.departure_mode,
            "resolve_each_step": m.resolve_each_step,
            "exploration_std_fraction": m.exploration_std_fraction,
        },
        "run": {
            "seed": spec.seed,
        },
    }
    lines = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key in keys:
            lines.append(f"{key} = {_render_value(by_section[section][key])}")
        lines.append("")
    return "\n".join(lines)
