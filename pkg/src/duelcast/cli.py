"""Command line interface: simulate, predict, backtest, sweep, serve.

Exit codes: 0 success, 1 argument/config validation, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import dynamics, harness
from .errors import ConfigError, DuelcastError, FormatError
from .inversion import InversionSettings
from .numerics import TimeGrid
from .predictor import ControlPlan, HorizonSpec, SurrogateSpec, estimate_horizon, predict
from .probes import canonical_probe_set, load_probe_set
from .selection import CandidateSet, CandidateLabel, select_best


class _CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route usage errors to exit code 1
        raise _CliError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="duelcast", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate a scenario and write a history CSV")
    sim.add_argument("--scenario", required=True)
    sim.add_argument("--h", type=float, required=True, help="grid step (seconds)")
    sim.add_argument("--steps", type=int, required=True, help="number of integration steps")
    sim.add_argument("--out", required=True)
    sim.add_argument("--t-start", type=float, default=0.0)
    sim.add_argument("--params", default=None, help="scenario parameters as JSON")
    sim.add_argument("--uo", default=None, help="constant intended control as JSON list")
    sim.add_argument("--phi0", default=None, help="initial state as JSON list")

    pre = sub.add_parser("predict", help="predict from a recorded history")
    pre.add_argument("--history", required=True)
    pre.add_argument("--scenario", required=True, help="scenario providing the state equation")
    pre.add_argument("--params", default=None)
    pre.add_argument("--t0", type=float, required=True)
    pre.add_argument("--dt", type=float, required=True)
    pre.add_argument("--blend", type=float, default=1.0)
    pre.add_argument("--horizon", type=float, required=True, help="prediction length T")
    pre.add_argument("--probes", default="canonical", help="'canonical' or a probe-set JSON file")
    pre.add_argument("--out", required=True)

    back = sub.add_parser("backtest", help="score candidate probe sets on a history window")
    back.add_argument("--history", required=True)
    back.add_argument("--scenario", required=True)
    back.add_argument("--params", default=None)
    back.add_argument("--t0", type=float, required=True)
    back.add_argument("--dt", type=float, required=True)
    back.add_argument("--blend", type=float, default=1.0)
    back.add_argument("--candidates", required=True, help="directory of probe-set JSON files")

    swp = sub.add_parser("sweep", help="run a full experiment config")
    swp.add_argument("--config", required=True)

    srv = sub.add_parser("serve", help="run the live session service")
    srv.add_argument("--port", type=int, required=True)
    srv.add_argument("--host", default="127.0.0.1")
    return parser


def _json_arg(raw, name):
    if raw is None:
        return None
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise _CliError(f"--{name} is not valid JSON: {exc}") from None


def _cmd_simulate(args) -> int:
    params = _json_arg(args.params, "params") or {}
    game, reactions = dynamics.scenario(args.scenario, params)
    uo = _json_arg(args.uo, "uo")
    if uo is None:
        uo = list(dynamics.DEFAULT_INTENDED[args.scenario])
    phi0 = _json_arg(args.phi0, "phi0")
    if phi0 is None:
        phi0 = list(dynamics.DEFAULT_PHI0[args.scenario])
    if args.steps < 1:
        raise _CliError("--steps must be at least 1")
    grid = TimeGrid(args.t_start, args.h, args.steps + 1)
    history = dynamics.simulate(
        game, reactions, dynamics.constant_schedule(uo), grid, np.asarray(phi0, float)
    )
    harness.save_history(history, args.out)
    print(f"wrote {args.out} ({grid.count} samples)")
    return 0


def _load_game(args):
    params = _json_arg(args.params, "params") or {}
    game, _ = dynamics.scenario(args.scenario, params)
    return game


def _cmd_predict(args) -> int:
    history = harness.load_history(args.history)
    game = _load_game(args)
    if args.probes == "canonical":
        pset = canonical_probe_set(history.d, history.m)
    else:
        pset = load_probe_set(args.probes)
    spec = SurrogateSpec(
        probe_set=pset,
        dt=args.dt,
        blend=args.blend,
        plan=ControlPlan.hold_last(),
        inversion=InversionSettings(),
    )
    prediction = predict(game, history, args.t0, spec, args.horizon)
    harness._write_prediction(prediction, args.out)
    print(f"wrote {args.out} ({prediction.steps_completed} steps, {prediction.status.kind})")
    return 0


def _cmd_backtest(args) -> int:
    history = harness.load_history(args.history)
    game = _load_game(args)
    files = sorted(
        f for f in os.listdir(args.candidates) if f.endswith(".json")
    )
    if not files:
        raise _CliError(f"no candidate .json files in {args.candidates}")
    candidates = [
        CandidateSet(
            CandidateLabel.finite(i),
            load_probe_set(os.path.join(args.candidates, name)),
        )
        for i, name in enumerate(files)
    ]
    template = SurrogateSpec(
        probe_set=candidates[0].pset,
        dt=args.dt,
        blend=args.blend,
        plan=ControlPlan.hold_last(),
        inversion=InversionSettings(),
    )
    report = select_best(game, history, candidates, args.t0, template)
    print("label,file,score,status")
    for i, name in enumerate(files):
        score = report.scores[i]
        print(f"{report.labels[i]},{name},{score:.17g},{report.statuses[i]}")
    print(f"best: {report.best_label} ({files[report.best_index]})")
    return 0


def _cmd_sweep(args) -> int:
    config = harness.load_config(args.config)
    rows = harness.run_experiment(config)
    failures = sum(1 for r in rows if r["status"].startswith("error"))
    print(f"wrote {len(rows)} summary rows to {config.output_dir} ({failures} failed)")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="warning")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "predict": _cmd_predict,
    "backtest": _cmd_backtest,
    "sweep": _cmd_sweep,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DuelcastError as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())
