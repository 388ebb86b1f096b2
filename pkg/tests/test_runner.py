"""Run execution, artifact determinism, compare and trace plumbing."""

import json

import numpy as np
import pytest

from evsched.config import load_run_config
from evsched.errors import ConfigError
from evsched.prices import SyntheticPriceSpec, gen_synthetic
from evsched.runner import (METRICS_COLUMNS, compare_runs, eval_day_range,
                            execute_run, parse_day_span, run_from_config,
                            series_digest, trace_run)
from evsched.utils import write_csv

TINY_INI = """\
[data]
days = 8
test_days = 3

[train]
episodes = 2
batch_size = 16
hidden_sizes = 8
warmup_episodes = 1
checkpoint_every = 2
replay_capacity = 512

[method]
name = alsac

[run]
seed = 0
"""


def _config(tmp_path, text=TINY_INI):
    path = tmp_path / "run.ini"
    path.write_text(text, encoding="utf-8")
    return path


def test_execute_run_artifacts(tmp_path):
    spec = load_run_config(_config(tmp_path))
    outcome = execute_run(spec, tmp_path / "out")
    out = outcome.out_dir
    metrics = (out / "metrics.csv").read_text().strip().split("\n")
    assert tuple(metrics[0].split(",")) == METRICS_COLUMNS
    row = dict(zip(metrics[0].split(","), metrics[1].split(",")))
    assert row["method"] == "alsac"
    assert int(row["episodes"]) == 2
    # run.json repeats the metrics at full precision
    info = json.loads((out / "run.json").read_text())
    assert abs(info["metrics"]["mean_cost_eur"] - float(row["mean_cost_eur"])) < 5e-7
    assert info["env_steps"] == outcome.run_info["env_steps"] > 0
    log = (out / "log.csv").read_text().strip().split("\n")
    assert len(log) == 1 + 2  # header + one row per episode


def test_rerun_is_byte_identical(tmp_path):
    cfg = _config(tmp_path)
    run_from_config(cfg, tmp_path / "a")
    run_from_config(cfg, tmp_path / "b")
    for name in ("resolved.cfg", "log.csv", "metrics.csv", "checkpoint_best.ckpt"):
        assert (tmp_path / "a" / name).read_bytes() == \
               (tmp_path / "b" / name).read_bytes(), name
    info_a = json.loads((tmp_path / "a" / "run.json").read_text())
    info_b = json.loads((tmp_path / "b" / "run.json").read_text())
    info_a.pop("wall_clock_seconds")
    info_b.pop("wall_clock_seconds")
    assert info_a == info_b


def test_seed_override_changes_run(tmp_path):
    cfg = _config(tmp_path)
    a = run_from_config(cfg, tmp_path / "a")
    b = run_from_config(cfg, tmp_path / "b", seed=1)
    assert b.run_info["seed"] == 1
    assert a.run_info["config_digest"] != b.run_info["config_digest"]


def test_mpc_run_has_no_training_artifacts(tmp_path):
    text = TINY_INI.replace("name = alsac", "name = mpc")
    outcome = execute_run(load_run_config(_config(tmp_path, text)), tmp_path / "out")
    out = outcome.out_dir
    assert not (out / "checkpoint_best.ckpt").exists()
    log = (out / "log.csv").read_text().strip().split("\n")
    assert len(log) == 1  # header only
    assert outcome.run_info["env_steps"] == 0
    assert outcome.eval_result.mean_violation_kwh == 0.0


def test_eval_day_range():
    from evsched.env import EvEnvConfig
    series = gen_synthetic(SyntheticPriceSpec(), days=8)
    cfg = EvEnvConfig()
    days = eval_day_range(series, 3, cfg)
    assert days == range(5, 7)
    # a test window larger than the usable tail clamps to valid days
    assert eval_day_range(series, 7, cfg) == range(1, 7)


def test_series_digest_tracks_content():
    a = gen_synthetic(SyntheticPriceSpec(low=0.05), days=4)
    b = gen_synthetic(SyntheticPriceSpec(low=0.06), days=4)
    assert series_digest(a) == series_digest(a)
    assert series_digest(a) != series_digest(b)


def test_parse_day_span():
    assert parse_day_span("41") == [41]
    assert parse_day_span("41..45") == [41, 42, 43, 44, 45]
    assert parse_day_span("7..7") == [7]
    for bad in ("", "x", "5..", "6..5", "1..2..3"):
        with pytest.raises(ConfigError):
            parse_day_span(bad)


def _fake_run_dir(tmp_path, name, cost, violation, budget=0.024, digest="abc"):
    d = tmp_path / name
    d.mkdir()
    info = {"method": name, "seed": 0, "cost_budget": budget,
            "eval_data_digest": digest}
    (d / "run.json").write_text(json.dumps(info), encoding="utf-8")
    row = (name, "50", f"{cost:.6f}", f"{violation:.6f}", f"{violation:.6f}",
           "0", "24.000000")
    write_csv(d / "metrics.csv", METRICS_COLUMNS, [row])
    return d


def test_compare_picks_cheapest_feasible(tmp_path):
    a = _fake_run_dir(tmp_path, "alpha", cost=-1.0, violation=0.0)
    b = _fake_run_dir(tmp_path, "beta", cost=-2.0, violation=0.5)
    c = _fake_run_dir(tmp_path, "gamma", cost=-0.5, violation=0.01)
    result = compare_runs([a, b, c])
    assert result["best"] == "alpha"
    assert "*alpha" in result["text"]
    assert "within budget" in result["text"]


def test_compare_falls_back_to_least_violating(tmp_path):
    a = _fake_run_dir(tmp_path, "alpha", cost=-9.0, violation=2.0)
    b = _fake_run_dir(tmp_path, "beta", cost=-1.0, violation=0.3)
    result = compare_runs([a, b])
    assert result["best"] == "beta"
    assert "no method met the budget" in result["text"]


def test_compare_guards_data_and_budget(tmp_path):
    a = _fake_run_dir(tmp_path, "alpha", cost=-1.0, violation=0.0)
    b = _fake_run_dir(tmp_path, "beta", cost=-1.0, violation=0.0, digest="xyz")
    with pytest.raises(ConfigError, match="different data"):
        compare_runs([a, b])
    c = _fake_run_dir(tmp_path, "gamma", cost=-1.0, violation=0.0, budget=1.0)
    with pytest.raises(ConfigError, match="budget differs"):
        compare_runs([a, c])
    with pytest.raises(ConfigError, match="at least two"):
        compare_runs([a])


def test_compare_writes_csv(tmp_path):
    a = _fake_run_dir(tmp_path, "alpha", cost=-1.0, violation=0.0)
    b = _fake_run_dir(tmp_path, "beta", cost=-2.0, violation=0.5)
    out = tmp_path / "table.csv"
    compare_runs([a, b], out)
    lines = out.read_text().strip().split("\n")
    assert tuple(lines[0].split(",")) == METRICS_COLUMNS
    assert len(lines) == 3


def test_compare_rejects_incomplete_dir(tmp_path):
    d = tmp_path / "broken"
    d.mkdir()
    ok = _fake_run_dir(tmp_path, "alpha", cost=-1.0, violation=0.0)
    with pytest.raises(ConfigError, match="missing run.json"):
        compare_runs([ok, d])


def test_trace_rows_fill_the_anchored_day(tmp_path):
    outcome = run_from_config(_config(tmp_path), tmp_path / "out")
    day = outcome.run_info["eval_days"][0]
    result = trace_run(tmp_path / "out", days=[day])
    rows = result["rows"]
    assert len(rows) == 24
    statuses = [r[3] for r in rows]
    assert set(statuses) <= {"away", "parked", "departure", "gone"}
    assert statuses.count("departure") <= 1
    # hours wrap around midnight starting from the anchor
    hours = [int(r[2]) for r in rows]
    assert hours[0] == 12 and hours[12] == 0
    # once the car is gone it stays gone and the SOC column freezes
    if "gone" in statuses:
        first = statuses.index("gone")
        assert all(s == "gone" for s in statuses[first:])
        final_soc = rows[first - 1][5] if first else None
        assert all(r[6] == "" and r[7] == "" for r in rows[first:])
    t_vals = [int(r[1]) for r in rows]
    assert t_vals == list(range(24))


def test_trace_rejects_days_outside_eval(tmp_path):
    run_from_config(_config(tmp_path), tmp_path / "out")
    with pytest.raises(ConfigError, match="outside the evaluation range"):
        trace_run(tmp_path / "out", days=[1])


def test_trace_writes_csv(tmp_path):
    outcome = run_from_config(_config(tmp_path), tmp_path / "out")
    day = outcome.run_info["eval_days"][0]
    out_csv = tmp_path / "trace.csv"
    trace_run(tmp_path / "out", days=[day], out_path=out_csv)
    lines = out_csv.read_text().strip().split("\n")
    assert len(lines) == 25
    assert lines[0].startswith("day,t,hour,status")
