"""Command-line front end: score transcripts, simulate, solve, print bounds,
and run sweeps.  Exit codes: 0 success, 1 validation/usage error, 2 resource
limit."""

from __future__ import annotations

import argparse
import json
import sys

from .bounds import bound_report, value_within_main_bound
from .errors import ResourceLimitError
from .fmt import fmt12, format_value, is_rational, parse_number
from .harness import ExperimentConfig, run_experiment, sweep, write_sweep_csv
from .induction import backward_induction, exploitability
from .markov import MarkovTable, MoveOrder
from .scoring import make_grid, read_transcript_csv, score_report
from .strategies import (
    BestResponse,
    ConstantForecast,
    CounterForecast,
    GapChaser,
    IID,
    MarkovForecaster,
    PlaybackProb,
    RevealedUniform,
    spec_from_json,
)


def parse_rainmaker(text: str):
    if text.lstrip().startswith("{"):
        return spec_from_json(json.loads(text))
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    if name == "iid":
        return IID(p=parse_number(arg))
    if name == "revealed-uniform":
        return RevealedUniform()
    if name == "playback":
        return PlaybackProb(probs=tuple(parse_number(x) for x in arg.split(",")))
    if name == "gap-chaser":
        return GapChaser()
    if name == "counter-forecast":
        return CounterForecast()
    raise ValueError(f"unknown rainmaker spec {text!r}")


def parse_forecaster(text: str):
    if text.lstrip().startswith("{"):
        return spec_from_json(json.loads(text))
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    if name == "best-response":
        return BestResponse()
    if name == "constant":
        return ConstantForecast(point=parse_number(arg))
    if name == "markov":
        with open(arg) as fh:
            data = json.load(fh)
        if "player" not in data and "forecaster" in data:
            data = data["forecaster"]
        return MarkovForecaster(table=MarkovTable.from_json_dict(data))
    raise ValueError(f"unknown forecaster spec {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="caliblab",
        description="Finite calibration game laboratory: scoring, simulation, "
        "exact solving, bounds, and sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score a transcript CSV against a grid")
    p.add_argument("--transcript", required=True, help="CSV with header t,a,c[,p]")
    p.add_argument("--grid", type=int, required=True, help="number of grid points N")
    p.add_argument("--float", dest="float_mode", action="store_true",
                   help="score in float arithmetic instead of exact rationals")

    p = sub.add_parser("simulate", help="run a Monte Carlo experiment")
    p.add_argument("--grid", type=int, required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--rainmaker", required=True,
                   help="iid:P | revealed-uniform | playback:P1,P2,... | "
                        "gap-chaser | counter-forecast | JSON")
    p.add_argument("--forecaster", required=True,
                   help="best-response | constant:D | markov:FILE | JSON")
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--order", default="simultaneous",
                   help="simultaneous (default) or forecast-first")
    p.add_argument("--mode", default="float", choices=["float", "exact", "exhaustive"])
    p.add_argument("--out", help="write the summary JSON here as well")
    p.add_argument("--per-rep", dest="per_rep", help="write per-replication scores CSV")

    p = sub.add_parser("solve", help="exact value of the T-period game")
    p.add_argument("--grid", type=int, required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--order", default="simultaneous")
    p.add_argument("--exact", action="store_true", help="force exact rationals")
    p.add_argument("--float", dest="float_mode", action="store_true",
                   help="force float arithmetic")
    p.add_argument("--certify", action="store_true",
                   help="also compute best-response exploitability")
    p.add_argument("--strategy-out", dest="strategy_out",
                   help="write the solved strategies (JSON)")

    p = sub.add_parser("bounds", help="bound values and thresholds at (N, T)")
    p.add_argument("--grid", type=int, required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--csv", help="also write the table as CSV")
    p.add_argument("--json", dest="json_out", help="also write the table as JSON")

    p = sub.add_parser("sweep", help="experiments over horizon/grid lists")
    p.add_argument("--grid", type=int, required=True, help="base grid size N")
    p.add_argument("--horizons", required=True, help="comma-separated T list")
    p.add_argument("--grids", help="optional comma-separated N list")
    p.add_argument("--rainmaker", required=True)
    p.add_argument("--forecaster", required=True)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--order", default="simultaneous")
    p.add_argument("--mode", default="float", choices=["float", "exact"])
    p.add_argument("--csv", help="write per-cell rows as CSV")

    return parser


def _cmd_score(args) -> int:
    grid = make_grid(args.grid)
    transcript = read_transcript_csv(args.transcript)
    transcript.validate_on_grid(grid)
    mode = "float" if args.float_mode else "exact"
    report = score_report(transcript, grid, mode=mode)
    json.dump(report.to_json_dict(), sys.stdout, indent=2)
    print()
    return 0


def _cmd_simulate(args) -> int:
    config = ExperimentConfig(
        n_points=args.grid,
        horizon=args.horizon,
        rainmaker=parse_rainmaker(args.rainmaker),
        forecaster=parse_forecaster(args.forecaster),
        replications=args.reps,
        master_seed=args.seed,
        order=MoveOrder.parse(args.order),
        mode=args.mode,
        summary_path=args.out,
        per_rep_path=args.per_rep,
    )
    stats = run_experiment(config)
    json.dump(stats.to_json_dict(), sys.stdout, indent=2)
    print()
    return 0


def _cmd_solve(args) -> int:
    if args.exact and args.float_mode:
        raise ValueError("choose at most one of --exact / --float")
    mode = "exact" if args.exact else ("float" if args.float_mode else None)
    grid = make_grid(args.grid)
    order = MoveOrder.parse(args.order)
    table = backward_induction(
        grid, args.horizon, order, mode=mode, verbose=True
    )
    report = bound_report(args.grid, args.horizon)
    print(f"value: {format_value(table.value)}")
    print(f"main bound 1/(2N) + (1/2)sqrt(N/T): {fmt12(report.main_bound)}")
    if is_rational(table.value):
        ok = value_within_main_bound(table.value, args.grid, args.horizon)
    else:
        ok = table.value <= report.main_bound + 1e-9
    print(f"value <= main bound: {ok}")
    print(f"main threshold (T certifying score <= 1/N): {report.main_threshold}")
    if args.certify:
        cert = exploitability(table)
        print(f"rainmaker best-response gain: {format_value(cert.rain_gain)}")
        print(f"forecaster best-response gain: {format_value(cert.fore_gain)}")
    if args.strategy_out:
        with open(args.strategy_out, "w") as fh:
            json.dump(table.to_json_dict(include_values=False), fh, indent=2)
        print(f"strategies written to {args.strategy_out}")
    return 0


def _cmd_bounds(args) -> int:
    report = bound_report(args.grid, args.horizon)
    rows = report.rows()
    width = max(len(r["bound"]) for r in rows)
    print(f"N={args.grid} T={args.horizon}  target 1/N = {fmt12(1 / args.grid)}")
    for row in rows:
        print(f"  {row['bound']:<{width}}  value={row['value']:<18} "
              f"threshold T>={row['threshold']}")
    if args.csv:
        import csv as _csv

        with open(args.csv, "w", newline="") as fh:
            writer = _csv.DictWriter(fh, fieldnames=["N", "T", "bound", "value", "threshold"])
            writer.writeheader()
            writer.writerows(rows)
    if args.json_out:
        with open(args.json_out, "w") as fh:
            json.dump(report.to_json_dict(), fh, indent=2)
    return 0


def _cmd_sweep(args) -> int:
    horizons = [int(x) for x in args.horizons.split(",") if x.strip()]
    grids = None
    if args.grids:
        grids = [int(x) for x in args.grids.split(",") if x.strip()]
    base = ExperimentConfig(
        n_points=args.grid,
        horizon=horizons[0] if horizons else 1,
        rainmaker=parse_rainmaker(args.rainmaker),
        forecaster=parse_forecaster(args.forecaster),
        replications=args.reps,
        master_seed=args.seed,
        order=MoveOrder.parse(args.order),
        mode=args.mode,
    )
    result = sweep(base, horizons, grids)
    for row in result.rows:
        kt = "" if row.mean_k_tilde is None else f"  mean_Kt={fmt12(row.mean_k_tilde)}"
        print(f"N={row.n_points} T={row.horizon}  mean_K={fmt12(row.mean_k)}"
              f" (se {fmt12(row.se_k)}){kt}")
    for fit in result.fits:
        print(f"slope[N={fit.n_points}, {fit.metric}]: {fmt12(fit.slope)} "
              f"(se {fmt12(fit.stderr)}, {fit.points} points)")
    if args.csv:
        write_sweep_csv(result, args.csv)
    return 0


_HANDLERS = {
    "score": _cmd_score,
    "simulate": _cmd_simulate,
    "solve": _cmd_solve,
    "bounds": _cmd_bounds,
    "sweep": _cmd_sweep,
}


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse prints usage itself; --help exits 0, anything else is a
        # usage error and maps to 1.
        return 0 if exc.code == 0 else 1
    try:
        return _HANDLERS[args.command](args)
    except ResourceLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))
