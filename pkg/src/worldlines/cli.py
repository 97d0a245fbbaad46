"""Command-line workbench.

Subcommands: plan, simulate, enumerate, power-curve, calibrate, serve,
analyze. Seeds are always explicit flags; the data directory comes from
--data-dir or the WORLDLINES_DATA_DIR environment variable.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import multiverse as mv
from . import stats
from .core import READER
from .dsl import parse_many
from .multiverse import EXTERNAL, WIGNER_RED_LIGHT, WIGNER_SPEECH
from .optics import DetectorConfig, SourceConfig, partner_calibrate
from .session import replay_footer


def _load_rules(paths):
    rules = []
    for p in paths or ():
        rules.extend(parse_many(Path(p).read_text("utf-8")))
    return rules


def _scenario_from_args(args):
    params = {}
    if args.scenario == "lottery":
        params["k"] = args.lottery_k
    if args.scenario == "wigner_friend" and args.channel:
        params["channel"] = {"speech": WIGNER_SPEECH, "red_light": WIGNER_RED_LIGHT}[args.channel]
    if args.scenario == "schrodinger_cat":
        params["dying_perceivable"] = not args.dying_imperceptible
    return mv.build_scenario(args.scenario, **params)


def cmd_plan(args) -> int:
    n = stats.plan_sample_size(args.f, args.alpha, args.fn)
    point = stats.false_negative_rate(args.f, n, args.alpha)
    print(
        json.dumps(
            {
                "f": args.f,
                "alpha": args.alpha,
                "fn_target": args.fn,
                "planned_n": n,
                "alpha_achieved": point.alpha_achieved,
                "fn_rate": point.fn_rate,
            }
        )
    )
    return 0


def cmd_simulate(args) -> int:
    scenario = _scenario_from_args(args)
    rules = _load_rules(args.rules)
    tally = mv.run_trials(scenario, rules, READER, args.trials, args.seed)
    out = {mv.sequence_key(seq): n for seq, n in sorted(tally.items(), key=lambda kv: mv.sequence_key(kv[0]))}
    print(json.dumps({"scenario": scenario.name, "trials": args.trials, "tally": out}))
    return 0


def cmd_enumerate(args) -> int:
    scenario = _scenario_from_args(args)
    rules = _load_rules(args.rules)
    frame = EXTERNAL if args.frame == "external" else READER
    dist = mv.enumerate_exact(scenario, rules, frame)
    print(dist.to_json())
    return 0


def cmd_power_curve(args) -> int:
    f_grid = [float(x) for x in args.f_grid.split(",")]
    n_grid = [int(x) for x in args.n_grid.split(",")]
    writer = csv.writer(sys.stdout)
    writer.writerow(["f", "N", "alpha_achieved", "fn_rate"])
    for row in stats.power_curve_rows(f_grid, n_grid, args.alpha):
        writer.writerow(row)
    return 0


def cmd_calibrate(args) -> int:
    theta, report = partner_calibrate(
        SourceConfig(split_angle=args.initial_angle),
        DetectorConfig(),
        tolerance=args.tolerance,
        seed=args.seed,
    )
    print(report.to_json())
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app
    from .session import SessionStore

    app = create_app(SessionStore(args.data_dir))
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def cmd_analyze(args) -> int:
    recomputed, stored = replay_footer(Path(args.log))
    ok = stored is None or recomputed == stored
    print(
        json.dumps(
            {
                "log": args.log,
                "recomputed": recomputed,
                "stored_footer_matches": ok if stored is not None else None,
            }
        )
    )
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="worldlines", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="minimal N for a false-negative target")
    p.add_argument("--f", type=float, required=True, help="true rule weight to detect")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--fn", type=float, default=0.05, help="false-negative target")
    p.set_defaults(func=cmd_plan)

    def add_scenario_args(q):
        q.add_argument("--scenario", required=True,
                       choices=["redness", "pain", "wigner_friend", "schrodinger_cat", "lottery", "pain_steering"])
        q.add_argument("--rules", nargs="*", help=".mwr rule files")
        q.add_argument("--lottery-k", type=int, default=10)
        q.add_argument("--channel", choices=["speech", "red_light"], default=None)
        q.add_argument("--dying-imperceptible", action="store_true")

    p = sub.add_parser("simulate", help="seeded Monte Carlo trials")
    add_scenario_args(p)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("enumerate", help="exact outcome distribution")
    add_scenario_args(p)
    p.add_argument("--frame", choices=["reader", "external"], default="reader")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("power-curve", help="CSV of (f, N, alpha_achieved, fn_rate)")
    p.add_argument("--f-grid", required=True, help="comma-separated weights")
    p.add_argument("--n-grid", required=True, help="comma-separated sample sizes")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_power_curve)

    p = sub.add_parser("calibrate", help="partner calibration simulation")
    p.add_argument("--tolerance", type=float, default=0.005)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--initial-angle", type=float, default=0.8)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("serve", help="run the HTTP session service")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data-dir", default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("analyze", help="replay a session log and verify its footer")
    p.add_argument("log")
    p.set_defaults(func=cmd_analyze)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
