"""Monte Carlo harness: replications, degree and imbalance sweeps, threshold search.

Replication r of market cell (n, k, d) always draws from the stream seeded by
``replication_seed(master_seed, n, k, d, r)`` and results are reduced in
replication order, so every table is identical for any worker count.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import repeat
from pathlib import Path

import numpy as np

from app.config import OutputFormat, get_settings
from app.exceptions import BracketError, InvalidConfigError
from app.models.experiment import Table, ThresholdKind, ThresholdResult, ThresholdSpec
from app.models.market import MarketConfig
from app.models.matching import RunTrace
from app.models.stats import MetricSummary, SummaryStats
from app.repositories.tables import write_table
from app.services.da_core import run_mosm, run_wosm
from app.services.da_lazy import run_mosm_lazy
from app.services.market_gen import generate_market
from app.services.seeding import make_rng, replication_seed, split
from app.services.stats import count_components, hop_fractions, summarize_result

logger = logging.getLogger(__name__)

METRIC_ORDER = (
    "r_men",
    "r_women",
    "delta_m",
    "delta_w",
    "tau",
    "components",
    "r_men_wosm",
    "r_women_wosm",
    "r_men_norm",
)
SUMMARY_COLUMNS = ("n", "k", "d", "reps", "metric", "mean", "std", "p10", "p90")
THRESHOLD_COLUMNS = ("kind", "n", "reps", "d_star", "probes")


@dataclass(frozen=True)
class ReplicationPlan:
    """Everything a worker needs to run replications of one market cell."""

    n: int
    k: int
    d: int
    master_seed: int
    lazy: bool = False
    include_wosm: bool = False
    include_components: bool = True
    simulate_matching: bool = True
    normalize: bool = False

    def config(self, rep: int) -> MarketConfig:
        seed = replication_seed(self.master_seed, self.n, self.k, self.d, rep)
        return MarketConfig(n=self.n, k=self.k, d=self.d, seed=seed)


def run_one(plan: ReplicationPlan, rep: int) -> dict[str, float]:
    """Metrics of a single replication."""
    cfg = plan.config(rep)
    rng = make_rng(cfg.seed)
    values: dict[str, float] = {}

    if plan.lazy:
        result = run_mosm_lazy(cfg, rng)
    else:
        market = generate_market(cfg, rng)
        if plan.include_components:
            values["components"] = count_components(market)
        if not plan.simulate_matching:
            return values
        result = run_mosm(market)
        if plan.include_wosm:
            wosm = summarize_result(run_wosm(market))
            values["r_men_wosm"] = wosm.r_men
            values["r_women_wosm"] = wosm.r_women

    summary = summarize_result(result)
    values["r_men"] = summary.r_men
    values["r_women"] = summary.r_women
    values["delta_m"] = summary.delta_m
    values["delta_w"] = summary.delta_w
    values["tau"] = result.trace.tau
    if plan.normalize:
        values["r_men_norm"] = summary.r_men / plan.d
    return values


def _run_block(plan: ReplicationPlan, reps: Sequence[int]) -> list[dict[str, float]]:
    return [run_one(plan, rep) for rep in reps]


def _blocks(reps: int, workers: int) -> list[range]:
    size = max(1, math.ceil(reps / (workers * 4)))
    return [range(start, min(start + size, reps)) for start in range(0, reps, size)]


def replicate(plan: ReplicationPlan, reps: int, workers: int) -> list[dict[str, float]]:
    """Run ``reps`` replications and return their metrics in replication order."""
    if workers <= 1 or reps < 2:
        return _run_block(plan, range(reps))
    blocks = _blocks(reps, workers)
    with ProcessPoolExecutor(max_workers=min(workers, len(blocks))) as pool:
        results = pool.map(_run_block, repeat(plan), blocks)
        return [values for block in results for values in block]


def summarize_metric(values: Sequence[float]) -> MetricSummary:
    """Mean, sample standard deviation and nearest-rank 10th/90th percentiles."""
    data = np.asarray(values, dtype=float)
    ordered = np.sort(data)
    count = data.size

    def nearest_rank(p: float) -> float:
        return float(ordered[max(math.ceil(p * count / 100), 1) - 1])

    return MetricSummary(
        mean=float(data.mean()),
        std=float(data.std(ddof=1)) if count > 1 else 0.0,
        p10=nearest_rank(10),
        p90=nearest_rank(90),
        count=count,
    )


def aggregate(
    plan: ReplicationPlan, rows: Sequence[dict[str, float]], engine: str
) -> SummaryStats:
    metrics: dict[str, MetricSummary] = {}
    for name in METRIC_ORDER:
        if rows and name in rows[0]:
            summary = summarize_metric([row[name] for row in rows])
            if not math.isnan(summary.mean) and not summary.p10 <= summary.mean <= summary.p90:
                logger.warning(
                    "Skewed metric %s at n=%d k=%d d=%d: mean %.6g outside [p10, p90]"
                    " = [%.6g, %.6g]",
                    name,
                    plan.n,
                    plan.k,
                    plan.d,
                    summary.mean,
                    summary.p10,
                    summary.p90,
                )
            metrics[name] = summary
    return SummaryStats(
        n=plan.n, k=plan.k, d=plan.d, reps=len(rows), engine=engine, metrics=metrics
    )


def _resolve_workers(workers: int | None) -> int:
    return get_settings().effective_workers if workers is None else max(1, workers)


def run_replications(
    cfg: MarketConfig,
    reps: int,
    master_seed: int,
    *,
    lazy: bool = False,
    include_wosm: bool = False,
    include_components: bool = True,
    simulate_matching: bool = True,
    normalize: bool = False,
    workers: int | None = None,
) -> SummaryStats:
    """Replicate the market cell of ``cfg`` (its own seed is ignored) ``reps`` times."""
    if reps < 1:
        raise InvalidConfigError(f"reps must be at least 1, got {reps}")
    if lazy and include_wosm:
        raise InvalidConfigError("the lazy engine only computes the man-optimal matching")
    plan = ReplicationPlan(
        n=cfg.n,
        k=cfg.k,
        d=cfg.d,
        master_seed=master_seed,
        lazy=lazy,
        include_wosm=include_wosm,
        include_components=include_components and not lazy,
        simulate_matching=simulate_matching,
        normalize=normalize,
    )
    n_workers = _resolve_workers(workers)
    logger.info(
        "Running %d replications of n=%d k=%d d=%d (%s engine, %d workers)",
        reps,
        cfg.n,
        cfg.k,
        cfg.d,
        "lazy" if lazy else "eager",
        n_workers,
    )
    rows = replicate(plan, reps, n_workers)
    return aggregate(plan, rows, "lazy" if lazy else "eager")


def sweep_degree(
    n: int,
    k: int,
    d_values: Iterable[int],
    reps: int,
    master_seed: int,
    *,
    lazy: bool = False,
    include_wosm: bool = False,
    workers: int | None = None,
) -> list[SummaryStats]:
    """One summary per degree; cells are seed-disjoint through their (n, k, d) key."""
    cells = list(d_values)
    bad = [d for d in cells if not 1 <= d <= n]
    if bad:
        raise InvalidConfigError(f"degrees outside [1, {n}]: {bad}")
    return [
        run_replications(
            MarketConfig(n=n, k=k, d=d),
            reps,
            master_seed,
            lazy=lazy,
            include_wosm=include_wosm,
            workers=workers,
        )
        for d in cells
    ]


def sweep_imbalance(
    n: int,
    d: int,
    k_values: Iterable[int],
    reps: int,
    master_seed: int,
    *,
    lazy: bool = False,
    workers: int | None = None,
) -> list[SummaryStats]:
    """One summary per imbalance, including the normalized rank ``r_men_norm = R_MEN / d``."""
    cells = list(k_values)
    bad = [k for k in cells if n + k < 1]
    if bad:
        raise InvalidConfigError(f"imbalances leaving no men for n={n}: {bad}")
    return [
        run_replications(
            MarketConfig(n=n, k=k, d=d),
            reps,
            master_seed,
            lazy=lazy,
            normalize=True,
            workers=workers,
        )
        for k in cells
    ]


def _threshold_statistic(
    spec: ThresholdSpec, d: int, master_seed: int, workers: int | None
) -> float:
    connectivity = spec.kind is ThresholdKind.CONNECTIVITY
    stats = run_replications(
        MarketConfig(n=spec.n, k=spec.k, d=d),
        spec.reps,
        master_seed,
        include_components=connectivity,
        simulate_matching=not connectivity,
        workers=workers,
    )
    if spec.kind is ThresholdKind.RANK_GAP:
        return stats.mean("r_women") / stats.mean("r_men")
    if spec.kind is ThresholdKind.UNMATCHED_MEN:
        return stats.mean("delta_m")
    return stats.mean("components")


def find_threshold(
    spec: ThresholdSpec, master_seed: int, *, workers: int | None = None
) -> ThresholdResult:
    """Smallest integer d in [d_lo, d_hi] whose Monte Carlo estimate meets the target.

    Each probed d is simulated once and cached.
    """
    target = spec.resolved_target
    estimates: dict[int, float] = {}

    def estimate(d: int) -> float:
        if d not in estimates:
            estimates[d] = _threshold_statistic(spec, d, master_seed, workers)
            logger.info("Probe %s n=%d d=%d: %.6g", spec.kind.value, spec.n, d, estimates[d])
        return estimates[d]

    def holds(d: int) -> bool:
        value = estimate(d)
        return value >= target if spec.kind is ThresholdKind.RANK_GAP else value <= target

    lo, hi = spec.d_lo, spec.upper
    if holds(lo) or not holds(hi):
        raise BracketError(spec.kind.value, lo, hi, estimate(lo), estimate(hi))
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if holds(mid):
            hi = mid
        else:
            lo = mid

    logger.info(
        "Threshold %s for n=%d: d*=%d after %d probes",
        spec.kind.value,
        spec.n,
        hi,
        len(estimates),
    )
    return ThresholdResult(
        kind=spec.kind,
        n=spec.n,
        reps=spec.reps,
        d_star=hi,
        probes=len(estimates),
        estimates=dict(sorted(estimates.items())),
    )


def threshold_curve(
    kind: ThresholdKind,
    n_values: Iterable[int],
    reps: int,
    master_seed: int,
    *,
    workers: int | None = None,
) -> list[ThresholdResult]:
    """Threshold degree as a function of market size, one search per n."""
    return [
        find_threshold(ThresholdSpec(kind=kind, n=n, reps=reps), master_seed, workers=workers)
        for n in n_values
    ]


def hop_statistics(
    cfg: MarketConfig,
    reps: int,
    master_seed: int,
    *,
    sample: int | None = None,
    max_hops: int = 3,
) -> Table:
    """Mean within-h-hop fractions of man pairs over ``reps`` random markets.

    Columns ``h,mean,std``. ``sample`` source men per market (default all).
    """
    if reps < 1:
        raise InvalidConfigError(f"reps must be at least 1, got {reps}")
    n_sources = cfg.n_men if sample is None else sample
    runs = np.empty((reps, max_hops))
    for rep in range(reps):
        seed = replication_seed(master_seed, cfg.n, cfg.k, cfg.d, rep)
        market_rng, source_rng = split(seed, 2)
        market = generate_market(cfg.model_copy(update={"seed": seed}), market_rng)
        runs[rep] = hop_fractions(market, n_sources, max_hops, source_rng)
    logger.info("Hop statistics over %d markets n=%d k=%d d=%d", reps, cfg.n, cfg.k, cfg.d)

    table = Table(columns=("h", "mean", "std"))
    for h in range(max_hops):
        column = runs[:, h]
        table.rows.append(
            {
                "h": h + 1,
                "mean": float(column.mean()),
                "std": float(column.std(ddof=1)) if reps > 1 else 0.0,
            }
        )
    return table


def sample_trajectory(cfg: MarketConfig, *, decimation: int = 1, lazy: bool = False) -> RunTrace:
    """One delta-trajectory of man-proposing DA for the market seeded by ``cfg.seed``."""
    rng = make_rng(cfg.seed)
    if lazy:
        return run_mosm_lazy(cfg, rng, decimation=decimation).trace
    settings = get_settings()
    result = run_mosm(
        generate_market(cfg, rng),
        decimation=decimation,
        record_acceptance_prob=settings.RECORD_ACCEPTANCE_PROB,
    )
    return result.trace


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


def summary_table(stats: Iterable[SummaryStats]) -> Table:
    """Long format: one row per (cell, metric)."""
    table = Table(columns=SUMMARY_COLUMNS)
    for cell in stats:
        for metric, summary in cell.metrics.items():
            table.rows.append(
                {
                    "n": cell.n,
                    "k": cell.k,
                    "d": cell.d,
                    "reps": cell.reps,
                    "metric": metric,
                    "mean": summary.mean,
                    "std": summary.std,
                    "p10": summary.p10,
                    "p90": summary.p90,
                }
            )
    return table


def threshold_table(results: Iterable[ThresholdResult]) -> Table:
    table = Table(columns=THRESHOLD_COLUMNS)
    for result in results:
        table.rows.append(
            {
                "kind": result.kind.value,
                "n": result.n,
                "reps": result.reps,
                "d_star": result.d_star,
                "probes": result.probes,
            }
        )
    return table


def emit_table(table: Table, path: Path | str, fmt: OutputFormat | str = OutputFormat.CSV) -> Path:
    """Write ``table`` with deterministic column order and formatting."""
    settings = get_settings()
    return write_table(table, path, OutputFormat(fmt), settings.FLOAT_SIG_DIGITS)
