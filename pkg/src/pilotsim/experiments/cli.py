"""Command-line front end for the sweep runners.

Subcommands: nmse-sweep, tradeoff, scaling, contamination, pilot-table.
Exit codes: 0 success, 2 configuration error, 1 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from pilotsim.linalg import NumericalError
from pilotsim.pilot import (DOWNLINK, REGIME_BOTH_INF, REGIME_FINITE, REGIME_M_INF,
                            REGIME_N_INF, SCENARIOS, UPLINK, min_pilot_count)
from pilotsim.experiments.config import (ConfigError, apply_overrides,
                                         config_from_dict)
from pilotsim.experiments.engine import run_experiment, write_csv

_REGIME_LABELS = (
    (REGIME_FINITE, "N,M finite"),
    (REGIME_N_INF, "N->inf"),
    (REGIME_M_INF, "M->inf"),
    (REGIME_BOTH_INF, "N,M->inf"),
)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", required=True, help="JSON experiment configuration")
    sub.add_argument("--out", help="CSV output path (overrides config output)")
    sub.add_argument("--seed", type=int, help="master seed (overrides config)")
    sub.add_argument("--workers", type=int, help="parallel workers (overrides config)")
    sub.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                     help="dotted-path config override, repeatable (e.g. arrays.M=128)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pilotsim",
        description="Uplink pilot precoding/combining sweeps for multiuser MIMO "
                    "channel estimation and rate evaluation.")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
            ("nmse-sweep", "closed-form and Monte Carlo NMSE over array/path sweeps"),
            ("tradeoff", "spectral efficiency over the pilot/data energy split"),
            ("scaling", "optimal pilot energy and peak rate versus antenna count"),
            ("contamination", "PC-scenario NMSE versus number of UEs")):
        _add_common(subs.add_parser(name, help=doc))
    table = subs.add_parser("pilot-table",
                            help="minimum unique pilot counts per scenario/regime")
    table.add_argument("--K", type=int, required=True, help="number of UEs")
    table.add_argument("--N", type=int, required=True, help="UE antennas")
    table.add_argument("--M", type=int, required=True, help="BS antennas")
    table.add_argument("--L", type=int, required=True, help="paths per UE")
    table.add_argument("--csv", help="also write the table as CSV")
    return parser


def _load(args: argparse.Namespace):
    with open(args.config, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{args.config}: not valid JSON ({exc})"]) from None
    if not isinstance(raw, dict):
        raise ConfigError([f"{args.config}: top level must be a JSON object"])
    raw.setdefault("experiment", args.command)
    apply_overrides(raw, args.override)
    if args.seed is not None:
        raw.setdefault("mc", {})["seed"] = args.seed
    if args.workers is not None:
        raw["workers"] = args.workers
    config = config_from_dict(raw)
    if config.experiment != args.command:
        raise ConfigError(
            [f"experiment: config says {config.experiment!r} but subcommand is "
             f"{args.command!r}"])
    return config


def _run_sweep(args: argparse.Namespace) -> int:
    config = _load(args)
    rows = run_experiment(config)
    out = args.out or config.output
    if out:
        write_csv(rows, out)
        print(f"{len(rows)} rows -> {out}")
    else:
        for r in rows:
            db = "" if r.value_db is None else f" ({r.value_db:.2f} dB)"
            print(f"{r.scenario} M={r.m} N={r.n} L={r.l} K={r.k} T_tau={r.t_tau} "
                  f"rho_tau={r.rho_tau:g}: {r.metric} = {r.value:.6g}{db}")
    return 0


def _pilot_table(args: argparse.Namespace) -> int:
    header = f"{'regime':<12}{'direction':<11}" + "".join(f"{s:>8}" for s in SCENARIOS)
    lines = [f"Minimum unique pilots (K={args.K}, N={args.N}, M={args.M}, L={args.L})",
             header, "-" * len(header)]
    csv_lines = ["regime,direction," + ",".join(SCENARIOS)]
    for direction in (UPLINK, DOWNLINK):
        for regime, label in _REGIME_LABELS:
            counts = [min_pilot_count(s, direction, regime, args.K, args.N,
                                      args.M, args.L) for s in SCENARIOS]
            lines.append(f"{label:<12}{direction:<11}" +
                         "".join(f"{c:>8}" for c in counts))
            csv_lines.append(f"{regime},{direction}," + ",".join(str(c) for c in counts))
    print("\n".join(lines))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(csv_lines) + "\n")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "pilot-table":
            return _pilot_table(args)
        return _run_sweep(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
