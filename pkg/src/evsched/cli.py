"""Command line front end: run, compare, trace.

Exit codes: 0 success, 2 configuration/usage problems, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, EvschedError
from .runner import compare_runs, parse_day_span, run_from_config, trace_run
from .utils import fmt_eur


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evsched",
        description="EV charge scheduling experiments over hourly prices",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="train and evaluate one method from an INI config")
    p_run.add_argument("--config", required=True, help="INI config path")
    p_run.add_argument("--out", required=True, help="output directory for run artifacts")
    p_run.add_argument("--seed", type=int, default=None, help="override the [run] seed")

    p_cmp = sub.add_parser("compare", help="tabulate metrics across finished runs")
    p_cmp.add_argument("--runs", nargs="+", required=True, help="run directories")
    p_cmp.add_argument("--out", default=None, help="also write the table as CSV here")

    p_tr = sub.add_parser("trace", help="replay evaluation days of a run hour by hour")
    p_tr.add_argument("--run", required=True, help="run directory")
    p_tr.add_argument("--days", default=None,
                      help="day index N or range N..M (default: first evaluation day)")
    p_tr.add_argument("--out", default=None, help="also write the trace as CSV here")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            outcome = run_from_config(args.config, args.out, seed=args.seed)
            info = outcome.run_info
            m = info["metrics"]
            print(f"method {info['method']}  seed {info['seed']}")
            if info["env_steps"]:
                print(f"trained: {info['env_steps']} env steps "
                      f"over {info['train_days']} candidate days")
            print(f"evaluated {m['episodes']} episodes: "
                  f"mean cost {fmt_eur(m['mean_cost_eur'])} EUR, "
                  f"mean violation {fmt_eur(m['mean_violation_kwh'])} kWh")
            print(f"artifacts in {outcome.out_dir}")
        elif args.command == "compare":
            result = compare_runs(args.runs, args.out)
            print(result["text"])
        else:
            days = parse_day_span(args.days) if args.days is not None else None
            result = trace_run(args.run, days, args.out)
            print(result["text"])
        return 0
    except ConfigError as exc:
        print(f"config error:\n{exc}", file=sys.stderr)
        return 2
    except (EvschedError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
