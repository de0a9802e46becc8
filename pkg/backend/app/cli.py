"""Command-line entry point: ``python -m app <command>`` or ``sparse-market <command>``.

Every randomized command requires ``--seed``; the same command line always
writes byte-identical files, whatever ``--workers`` is. Exit status is 0 on
success, 2 on usage or input errors and 1 on runtime failures.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from collections.abc import Sequence
from pathlib import Path

from pydantic import ValidationError

from app import __version__
from app.config import OutputFormat, Settings, configure_logging, get_settings
from app.exceptions import SimulationError
from app.models.experiment import Table, ThresholdKind, ThresholdSpec
from app.models.market import MarketConfig
from app.repositories.rosters import load_programs, load_roster
from app.repositories.tables import render_table
from app.repositories.traces import trace_to_table
from app.services import counterfactual, experiments, oracle, theory
from app.services.seeding import derive_seed, replication_seed

logger = logging.getLogger(__name__)


class UsageError(ValueError):
    """Arguments that parse but do not make sense together."""


# ---------------------------------------------------------------------------
# Argument types
# ---------------------------------------------------------------------------


def int_list(text: str) -> list[int]:
    """``"1,3,5"`` or an inclusive range ``"5:150:5"`` (step optional)."""
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) not in (2, 3) or (len(parts) == 3 and parts[2] < 1):
                raise ValueError
            start, stop = parts[0], parts[1]
            step = parts[2] if len(parts) == 3 else 1
            values = list(range(start, stop + 1, step))
        else:
            values = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected '1,3,5' or 'start:stop[:step]', got {text!r}"
        ) from None
    if not values:
        raise argparse.ArgumentTypeError(f"empty list {text!r}")
    return values


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def worker_count(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be at least 0, got {value}")
    return value or (os.cpu_count() or 1)


def seed_value(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be in [0, 2^64), got {value}")
    return value


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _output_flags(parser: argparse.ArgumentParser, settings: Settings) -> None:
    parser.add_argument("--out", type=Path, help="Output file (stdout when omitted).")
    parser.add_argument(
        "--format",
        choices=[f.value for f in OutputFormat],
        default=settings.OUTPUT_FORMAT.value,
        help="Table format (default: %(default)s).",
    )


def _seed_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--seed", type=seed_value, required=True, help="Master seed (required for reproducibility)."
    )


def _cell_flags(parser: argparse.ArgumentParser, *, with_d: bool = True) -> None:
    parser.add_argument("--n", type=positive_int, required=True, help="Number of women.")
    parser.add_argument("--k", type=int, default=0, help="Imbalance: the market has n+k men.")
    if with_d:
        parser.add_argument(
            "--d", type=positive_int, required=True, help="Length of each man's list."
        )


def _engine_flags(parser: argparse.ArgumentParser, settings: Settings) -> None:
    parser.add_argument("--reps", type=positive_int, default=500, help="Replications per cell.")
    parser.add_argument(
        "--workers",
        type=worker_count,
        default=None,
        help="Worker processes (default: WORKERS setting); 0 means all CPUs.",
    )
    parser.add_argument(
        "--lazy",
        action="store_true",
        help=(
            "Coin-flipping engine that never builds the lists; worth it once "
            f"n*sqrt(d) exceeds about {settings.LAZY_SUGGEST_BUDGET:.0e} proposals."
        ),
    )


def build_parser(settings: Settings) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparse-market",
        description="Stable matching simulations for random markets with short preference lists.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = commands.add_parser("simulate", help="Replicate one (n, k, d) cell.")
    _cell_flags(p)
    _engine_flags(p, settings)
    _seed_flag(p)
    _output_flags(p, settings)
    p.add_argument("--wosm", action="store_true", help="Also report woman-optimal ranks.")
    p.add_argument(
        "--record-trace", action="store_true", help="Also write the trajectory of replication 0."
    )
    p.add_argument("--trace-out", type=Path, help="Trajectory file for --record-trace.")

    p = commands.add_parser("sweep-degree", help="One cell per list length d.")
    _cell_flags(p, with_d=False)
    p.add_argument("--d-values", type=int_list, required=True, help="'5:150:5' or '5,10,20'.")
    _engine_flags(p, settings)
    _seed_flag(p)
    _output_flags(p, settings)
    p.add_argument("--wosm", action="store_true", help="Also report woman-optimal ranks.")

    p = commands.add_parser("sweep-imbalance", help="One cell per imbalance k.")
    p.add_argument("--n", type=positive_int, required=True)
    p.add_argument("--d", type=positive_int, required=True)
    p.add_argument("--k-values", type=int_list, required=True, help="'-10:10' or '-1,0,1'.")
    _engine_flags(p, settings)
    _seed_flag(p)
    _output_flags(p, settings)

    p = commands.add_parser("threshold", help="Bisect the degree of a phase transition.")
    p.add_argument(
        "--kind",
        required=True,
        choices=[kind.value.replace("_", "-") for kind in ThresholdKind],
    )
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--n", type=positive_int)
    group.add_argument("--n-values", type=int_list, help="Threshold curve over several n.")
    p.add_argument("--k", type=int, default=-1)
    p.add_argument("--reps", type=positive_int, default=500)
    p.add_argument("--d-lo", type=positive_int, default=1)
    p.add_argument("--d-hi", type=positive_int, default=None, help="Default: n.")
    p.add_argument("--target", type=float, default=None, help="Override the kind's target.")
    p.add_argument("--workers", type=worker_count, default=None)
    _seed_flag(p)
    _output_flags(p, settings)

    p = commands.add_parser("hopstats", help="Within-h-hop fractions of agent pairs.")
    p.add_argument("--roster", type=Path, help="Measure a roster instead of random markets.")
    p.add_argument("--n", type=positive_int)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--d", type=positive_int)
    p.add_argument("--reps", type=positive_int, default=500, help="Random markets to average.")
    p.add_argument("--sample", type=positive_int, default=None, help="Source agents (default all).")
    p.add_argument("--max-hops", type=positive_int, default=3)
    _seed_flag(p)
    _output_flags(p, settings)

    p = commands.add_parser("counterfactual", help="Perturbed school-choice assignments.")
    p.add_argument("--roster", type=Path, required=True)
    p.add_argument("--programs", type=Path, required=True)
    p.add_argument("--delta", type=int_list, default=[0], help="Students to drop (<0) or add.")
    p.add_argument("--reps", type=positive_int, default=1, help="Seeds per delta.")
    p.add_argument("--randomize", action="store_true", help="Popularity-weighted random lists.")
    p.add_argument("--ks", type=int_list, default=[1, 3], help="Top-k columns, e.g. '1,3'.")
    p.add_argument("--workers", type=worker_count, default=None)
    _seed_flag(p)
    _output_flags(p, settings)

    p = commands.add_parser("oracle-check", help="Engines against brute-force enumeration.")
    p.add_argument("--instances", type=positive_int, default=500)
    p.add_argument("--max-n", type=positive_int, default=5)
    p.add_argument("--max-imbalance", type=int, default=2)
    _seed_flag(p)

    p = commands.add_parser("predict", help="Closed-form curves for a degree sweep.")
    _cell_flags(p, with_d=False)
    p.add_argument("--d-values", type=int_list, required=True)
    _output_flags(p, settings)

    p = commands.add_parser("trace", help="One delta trajectory of man-proposing DA.")
    _cell_flags(p)
    p.add_argument("--decimation", type=positive_int, default=settings.TRACE_DECIMATION)
    p.add_argument("--lazy", action="store_true")
    _seed_flag(p)
    _output_flags(p, settings)

    p = commands.add_parser("serve", help="Run the HTTP API with uvicorn.")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=settings.API_PORT)
    return parser


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _emit(table: Table, args: argparse.Namespace, settings: Settings) -> None:
    fmt = OutputFormat(args.format)
    if args.out is None:
        sys.stdout.write(render_table(table, fmt, settings.FLOAT_SIG_DIGITS))
    else:
        experiments.emit_table(table, args.out, fmt)


def _suggest_lazy(n: int, d_values: Sequence[int], lazy: bool, settings: Settings) -> None:
    budget = n * math.sqrt(max(d_values))
    if not lazy and budget > settings.LAZY_SUGGEST_BUDGET:
        logger.warning(
            "About %.3g proposals per run; consider --lazy to skip building the lists", budget
        )


def _cmd_simulate(args: argparse.Namespace, settings: Settings) -> str:
    if args.record_trace and args.trace_out is None:
        raise UsageError("--record-trace needs --trace-out")
    if args.lazy and args.wosm:
        raise UsageError("--wosm needs the eager engine (drop --lazy)")
    cfg = MarketConfig(n=args.n, k=args.k, d=args.d)
    _suggest_lazy(args.n, [args.d], args.lazy, settings)
    stats = experiments.run_replications(
        cfg, args.reps, args.seed, lazy=args.lazy, include_wosm=args.wosm, workers=args.workers
    )
    _emit(experiments.summary_table([stats]), args, settings)
    if args.record_trace:
        seed = replication_seed(args.seed, args.n, args.k, args.d, 0)
        first = cfg.model_copy(update={"seed": seed})
        trace = experiments.sample_trajectory(
            first, decimation=settings.TRACE_DECIMATION, lazy=args.lazy
        )
        experiments.emit_table(trace_to_table(trace), args.trace_out, OutputFormat(args.format))
    return (
        f"n={stats.n} k={stats.k} d={stats.d} reps={stats.reps} "
        f"r_men={stats.mean('r_men'):.4g} r_women={stats.mean('r_women'):.4g} "
        f"delta_m={stats.mean('delta_m'):.4g} delta_w={stats.mean('delta_w'):.4g}"
    )


def _cmd_sweep_degree(args: argparse.Namespace, settings: Settings) -> str:
    if args.lazy and args.wosm:
        raise UsageError("--wosm needs the eager engine (drop --lazy)")
    _suggest_lazy(args.n, args.d_values, args.lazy, settings)
    cells = experiments.sweep_degree(
        args.n,
        args.k,
        args.d_values,
        args.reps,
        args.seed,
        lazy=args.lazy,
        include_wosm=args.wosm,
        workers=args.workers,
    )
    _emit(experiments.summary_table(cells), args, settings)
    return f"{len(cells)} degree cells, {args.reps} replications each"


def _cmd_sweep_imbalance(args: argparse.Namespace, settings: Settings) -> str:
    _suggest_lazy(args.n, [args.d], args.lazy, settings)
    cells = experiments.sweep_imbalance(
        args.n, args.d, args.k_values, args.reps, args.seed, lazy=args.lazy, workers=args.workers
    )
    _emit(experiments.summary_table(cells), args, settings)
    return f"{len(cells)} imbalance cells, {args.reps} replications each"


def _cmd_threshold(args: argparse.Namespace, settings: Settings) -> str:
    kind = ThresholdKind(args.kind.replace("-", "_"))
    n_values = args.n_values if args.n is None else [args.n]
    results = [
        experiments.find_threshold(
            ThresholdSpec(
                kind=kind,
                n=n,
                k=args.k,
                reps=args.reps,
                d_lo=args.d_lo,
                d_hi=args.d_hi,
                target=args.target,
            ),
            args.seed,
            workers=args.workers,
        )
        for n in n_values
    ]
    _emit(experiments.threshold_table(results), args, settings)
    return " ".join(f"n={r.n} d*={r.d_star}" for r in results)


def _cmd_hopstats(args: argparse.Namespace, settings: Settings) -> str:
    if args.roster is not None:
        roster = load_roster(args.roster)
        sample = len(roster) if args.sample is None else args.sample
        fractions = counterfactual.roster_hop_fractions(roster, sample, args.max_hops, args.seed)
        table = Table(columns=("h", "fraction"))
        table.rows.extend({"h": h, "fraction": f} for h, f in enumerate(fractions, start=1))
        _emit(table, args, settings)
        return " ".join(f"{h}:{f:.3f}" for h, f in enumerate(fractions, start=1))
    if args.n is None or args.d is None:
        raise UsageError("hopstats needs --roster or both --n and --d")
    table = experiments.hop_statistics(
        MarketConfig(n=args.n, k=args.k, d=args.d),
        args.reps,
        args.seed,
        sample=args.sample,
        max_hops=args.max_hops,
    )
    _emit(table, args, settings)
    return " ".join(f"{row['h']}:{row['mean']:.3f}" for row in table.rows)


def _cmd_counterfactual(args: argparse.Namespace, settings: Settings) -> str:
    programs = load_programs(args.programs)
    roster = load_roster(args.roster, programs)
    seeds = [derive_seed(args.seed, rep) for rep in range(args.reps)]
    table = counterfactual.run_counterfactual(
        roster,
        programs,
        args.delta,
        seeds,
        randomize=args.randomize,
        ks=args.ks,
        workers=args.workers,
    )
    _emit(table, args, settings)
    return f"{len(table.rows)} counterfactual cells over {len(roster)} students"


def _cmd_oracle_check(args: argparse.Namespace, settings: Settings) -> str:
    report = oracle.check_small_instances(
        args.instances, args.max_n, args.seed, max_imbalance=args.max_imbalance
    )
    for failure in report.failures:
        logger.error("Oracle disagreement %s", failure)
    if not report.ok:
        raise SimulationError(f"{len(report.failures)} of {report.instances} instances failed")
    return f"{report.instances} instances agree with enumeration"


def _cmd_predict(args: argparse.Namespace, settings: Settings) -> str:
    table = theory.prediction_table(args.n, args.k, args.d_values)
    _emit(table, args, settings)
    return f"{len(table.rows)} prediction rows"


def _cmd_trace(args: argparse.Namespace, settings: Settings) -> str:
    cfg = MarketConfig(n=args.n, k=args.k, d=args.d, seed=args.seed)
    trace = experiments.sample_trajectory(cfg, decimation=args.decimation, lazy=args.lazy)
    _emit(trace_to_table(trace), args, settings)
    return f"tau={trace.tau} delta_m={trace.final_delta_m} delta_w={trace.final_delta_w}"


def _cmd_serve(args: argparse.Namespace, settings: Settings) -> str:
    import uvicorn

    uvicorn.run(
        "app.main:app",
        host=args.host,
        port=args.port,
        log_level=settings.LOG_LEVEL.value.lower(),
    )
    return "server stopped"


COMMANDS = {
    "simulate": _cmd_simulate,
    "sweep-degree": _cmd_sweep_degree,
    "sweep-imbalance": _cmd_sweep_imbalance,
    "threshold": _cmd_threshold,
    "hopstats": _cmd_hopstats,
    "counterfactual": _cmd_counterfactual,
    "oracle-check": _cmd_oracle_check,
    "predict": _cmd_predict,
    "trace": _cmd_trace,
    "serve": _cmd_serve,
}


def dispatch(argv: Sequence[str] | None = None) -> int:
    """Parse ``argv``, run the command and return its exit status."""
    settings = get_settings()
    configure_logging(settings)
    parser = build_parser(settings)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        summary = COMMANDS[args.command](args, settings)
    except (ValueError, ValidationError) as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (SimulationError, OSError) as exc:
        logger.error("%s failed: %s", args.command, exc)
        print(f"{parser.prog} {args.command}: {exc}", file=sys.stderr)
        return 1
    _report(summary, args)
    return 0


def _report(summary: str, args: argparse.Namespace) -> None:
    # keep stdout clean when it carries the table itself
    stream = sys.stderr if getattr(args, "out", "") is None else sys.stdout
    print(summary, file=stream)


def main() -> None:
    sys.exit(dispatch())
