"""Command-line interface: optimize, sweep, compare, simulate.

Each command loads a scenario file, computes everything first, then writes
its CSV artifacts and a ``manifest.json`` into the output directory. Re-runs
with identical inputs and seed overwrite the CSV files byte for byte; the
manifest records wall time and is the one file excluded from that guarantee.

Exit codes: 0 success, 2 validation failure, 3 I/O failure, 4 internal
consistency failure (simulated latency disagreeing with the closed form).

Weight precedence: ``--weights`` beats the scenario file's sections, which
beat the built-in mode defaults; equal weights are used when nothing else
applies.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import __version__, dpos_sim, metrics, optimizer, qos
from .model import (
    DEFAULT_GRID_CAP,
    BlockchainConfig,
    ConstraintError,
    DataClass,
    ParseError,
    QosWeights,
    ScenarioParams,
    load_scenario,
)
from .dpos_sim import JitterSpec, ModelMismatchError, SimConfig

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_CONSISTENCY = 4

OUT_DIR_ENV = "BCCONF_OUT"


@dataclass(frozen=True)
class RunManifest:
    command: str
    scenario_path: str
    output_dir: str
    seed: int
    tool_version: str
    wall_time_s: float


def _parse_weights_flag(text: str) -> QosWeights:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated weights, e.g. 0.3,0.3,0.4")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"weights must be numbers, got {text!r}") from None
    return QosWeights(*values)


def _parse_qos_class_flag(text: str) -> tuple[str, str]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected priority,security_need, e.g. high,low")
    return (parts[0], parts[1])


def _parse_jitter_flag(text: str) -> JitterSpec:
    if text == "none":
        return JitterSpec(distribution="none", spread_fraction=0.0)
    kind, sep, spread = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError("expected kind:spread, e.g. uniform:0.1, or 'none'")
    try:
        return JitterSpec(distribution=kind, spread_fraction=float(spread))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bcconf",
        description="Verifier-count and block-size tuning plus a round simulator for permissioned ledgers.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    def add_common(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--scenario", required=True, help="path to a scenario file")
        sub.add_argument(
            "--out",
            default=None,
            help=f"output directory (default: ${OUT_DIR_ENV} or the working directory)",
        )
        sub.add_argument("--seed", type=int, default=0, help="seed recorded in the manifest and used by simulate")
        sub.add_argument(
            "--weights",
            type=_parse_weights_flag,
            default=None,
            metavar="L,S,C",
            help="latency,security,cost weights; overrides the scenario file and mode defaults",
        )
        sub.add_argument(
            "--qos-class",
            type=_parse_qos_class_flag,
            default=None,
            metavar="P,S",
            help="priority,security_need pair mapped to a mode directive (overrides the file's qos_class)",
        )
        sub.add_argument(
            "--grid-cap",
            type=int,
            default=DEFAULT_GRID_CAP,
            help="refuse grids larger than this many configurations",
        )

    sub_optimize = subparsers.add_parser("optimize", help="greedy search; writes result.csv and trace.csv")
    add_common(sub_optimize)

    sub_sweep = subparsers.add_parser("sweep", help="evaluate the whole grid; writes surface.csv")
    add_common(sub_sweep)

    sub_compare = subparsers.add_parser(
        "compare", help="greedy vs exhaustive; writes compare.csv and summary.csv"
    )
    add_common(sub_compare)

    sub_simulate = subparsers.add_parser(
        "simulate", help="discrete-event round simulation; writes events.csv, events.ndjson, sim_report.csv"
    )
    add_common(sub_simulate)
    sub_simulate.add_argument("--m", type=int, default=None, help="verifier count (default: prior result.csv)")
    sub_simulate.add_argument(
        "--theta", type=int, default=None, help="transactions per block (default: prior result.csv)"
    )
    sub_simulate.add_argument("--rounds", type=int, default=1, help="number of verification rounds")
    sub_simulate.add_argument(
        "--jitter",
        type=_parse_jitter_flag,
        default=JitterSpec(distribution="none", spread_fraction=0.0),
        metavar="KIND:SPREAD",
        help="service-time jitter, e.g. uniform:0.1 (default: none)",
    )
    sub_simulate.add_argument(
        "--rotate-bm",
        action="store_true",
        help="rotate the block-manager role round-robin through the selected verifiers",
    )
    return parser


def _resolve_out_dir(args: argparse.Namespace) -> Path:
    out = args.out or os.environ.get(OUT_DIR_ENV) or "."
    return Path(out)


def _resolve_directive_and_weights(
    scenario: ScenarioParams, args: argparse.Namespace
) -> tuple[ScenarioParams, QosWeights]:
    """Apply any qos-class directive, then pick weights by precedence."""
    qos_pair = args.qos_class
    data_class: Optional[DataClass] = None
    if qos_pair is not None:
        data_class = DataClass(priority=qos_pair[0], security_need=qos_pair[1])
    elif scenario.qos_class is not None:
        data_class = scenario.qos_class

    directive = qos.map_class(data_class, scenario) if data_class is not None else None
    effective = qos.apply_directive(scenario, directive) if directive is not None else scenario

    if args.weights is not None:
        weights = args.weights
    elif directive is not None:
        weights = directive.weights
    elif scenario.weights is not None:
        weights = scenario.weights
    else:
        weights = QosWeights(1 / 3, 1 / 3, 1 / 3)
    return effective, weights


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_manifest(out_dir: Path, args: argparse.Namespace, started: float) -> None:
    manifest = RunManifest(
        command=args.command,
        scenario_path=str(args.scenario),
        output_dir=str(out_dir),
        seed=args.seed,
        tool_version=__version__,
        wall_time_s=time.perf_counter() - started,
    )
    payload = {
        "command": manifest.command,
        "scenario_path": manifest.scenario_path,
        "output_dir": manifest.output_dir,
        "seed": manifest.seed,
        "tool_version": manifest.tool_version,
        "wall_time_s": manifest.wall_time_s,
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")


_BREAKDOWN_COLUMNS = [
    "latency_s",
    "downlink_s",
    "verify_s",
    "broadcast_s",
    "feedback_s",
    "security",
    "cost",
    "latency_ratio",
    "security_ratio",
    "cost_ratio",
]


def _breakdown_cells(breakdown: metrics.MetricBreakdown) -> list:
    terms = breakdown.latency_terms
    norm = breakdown.normalized
    return [
        breakdown.latency_s,
        terms.downlink_s,
        terms.verify_s,
        terms.broadcast_s,
        terms.feedback_s,
        breakdown.security,
        breakdown.cost,
        norm.latency_ratio,
        norm.security_ratio,
        norm.cost_ratio,
    ]


def _cmd_optimize(args: argparse.Namespace, scenario: ScenarioParams, out_dir: Path) -> None:
    effective, weights = _resolve_directive_and_weights(scenario, args)
    result = optimizer.solve_greedy(effective, weights)
    breakdown = metrics.utility(effective, weights, result.best_config)
    _write_csv(
        out_dir / "result.csv",
        ["m", "theta", "utility", *_BREAKDOWN_COLUMNS, "solver", "evaluations"],
        [
            [
                result.best_config.num_verifiers,
                result.best_config.txns_per_block,
                result.best_utility,
                *_breakdown_cells(breakdown),
                result.solver_name,
                result.trace.evaluations,
            ]
        ],
    )
    _write_csv(
        out_dir / "trace.csv",
        ["iteration", "m", "theta", "utility", "best_so_far"],
        optimizer.trace_rows(result.trace),
    )


def _cmd_sweep(args: argparse.Namespace, scenario: ScenarioParams, out_dir: Path) -> None:
    effective, weights = _resolve_directive_and_weights(scenario, args)
    if effective.grid_size > args.grid_cap:
        raise optimizer.GridCapError(
            f"feasible grid has {effective.grid_size} points, above the cap of {args.grid_cap}"
        )
    rows = []
    for m in range(effective.min_verifiers, effective.max_verifiers + 1):
        for theta in range(effective.min_txn_per_block, effective.max_txn_per_block + 1):
            breakdown = metrics.utility(effective, weights, BlockchainConfig(m, theta))
            rows.append([m, theta, *_breakdown_cells(breakdown), breakdown.utility])
    _write_csv(out_dir / "surface.csv", ["m", "theta", *_BREAKDOWN_COLUMNS, "utility"], rows)


def _cmd_compare(args: argparse.Namespace, scenario: ScenarioParams, out_dir: Path) -> None:
    effective, weights = _resolve_directive_and_weights(scenario, args)
    report = optimizer.compare(effective, weights, grid_cap=args.grid_cap)
    length = max(len(report.greedy_best_so_far), len(report.exhaustive_best_so_far))
    rows = []
    for i in range(length):
        rows.append(
            [
                i + 1,
                report.greedy_best_so_far[i] if i < len(report.greedy_best_so_far) else "",
                report.exhaustive_best_so_far[i] if i < len(report.exhaustive_best_so_far) else "",
            ]
        )
    _write_csv(out_dir / "compare.csv", ["iteration", "greedy_best_so_far", "exhaustive_best_so_far"], rows)
    _write_csv(
        out_dir / "summary.csv",
        [
            "greedy_m",
            "greedy_theta",
            "greedy_best_utility",
            "greedy_evaluations",
            "exhaustive_m",
            "exhaustive_theta",
            "exhaustive_best_utility",
            "exhaustive_evaluations",
            "utility_gap",
            "greedy_suboptimal",
        ],
        [
            [
                report.greedy.best_config.num_verifiers,
                report.greedy.best_config.txns_per_block,
                report.greedy.best_utility,
                report.greedy.trace.evaluations,
                report.exhaustive.best_config.num_verifiers,
                report.exhaustive.best_config.txns_per_block,
                report.exhaustive.best_utility,
                report.exhaustive.trace.evaluations,
                report.utility_gap,
                "true" if report.greedy_suboptimal else "false",
            ]
        ],
    )


def _prior_result_config(out_dir: Path) -> BlockchainConfig:
    result_path = out_dir / "result.csv"
    if not result_path.is_file():
        raise ConstraintError(
            "no --m/--theta given and no prior result.csv in the output directory; "
            "run 'optimize' first or pass the configuration explicitly"
        )
    with open(result_path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        row = next(reader, None)
    if row is None or "m" not in row or "theta" not in row:
        raise ParseError(f"{result_path} does not look like an optimize result")
    return BlockchainConfig(int(row["m"]), int(row["theta"]))


def _cmd_simulate(args: argparse.Namespace, scenario: ScenarioParams, out_dir: Path) -> None:
    effective, _ = _resolve_directive_and_weights(scenario, args)
    if args.m is not None and args.theta is not None:
        config = BlockchainConfig(args.m, args.theta)
    elif args.m is None and args.theta is None:
        config = _prior_result_config(out_dir)
    else:
        raise ConstraintError("--m and --theta must be given together")
    report = dpos_sim.run(
        SimConfig(
            scenario=effective,
            config=config,
            rounds=args.rounds,
            jitter=args.jitter,
            rng_seed=args.seed,
            rotate_bm=args.rotate_bm,
        )
    )
    analytic = report.analytic_latency_s
    deviations = [abs(l - analytic) / analytic for l in report.per_round_latency_s]
    if not args.jitter.active and max(deviations) > dpos_sim.SIM_REL_TOL:
        raise ModelMismatchError(
            f"config (m={config.num_verifiers}, theta={config.txns_per_block}): simulated latency "
            f"deviates from the closed form by {max(deviations):.3e}"
        )
    with open(out_dir / "events.csv", "w", encoding="utf-8", newline="") as handle:
        handle.write(dpos_sim.events_to_csv(report.events))
    with open(out_dir / "events.ndjson", "w", encoding="utf-8", newline="") as handle:
        handle.write(dpos_sim.events_to_ndjson(report.events))
    _write_csv(
        out_dir / "sim_report.csv",
        ["round", "latency_s", "analytic_latency_s", "abs_rel_deviation"],
        [
            [k, latency, analytic, deviations[k]]
            for k, latency in enumerate(report.per_round_latency_s)
        ],
    )


_COMMANDS = {
    "optimize": _cmd_optimize,
    "sweep": _cmd_sweep,
    "compare": _cmd_compare,
    "simulate": _cmd_simulate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the message
        return int(exc.code or 0)
    started = time.perf_counter()
    try:
        scenario = load_scenario(Path(args.scenario))
        out_dir = _resolve_out_dir(args)
        out_dir.mkdir(parents=True, exist_ok=True)
        _COMMANDS[args.command](args, scenario, out_dir)
        _write_manifest(out_dir, args, started)
    except ModelMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except ValueError as exc:
        # ParseError, ValidationError, ConstraintError, GridCapError and
        # malformed numeric content all count as validation failures.
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
