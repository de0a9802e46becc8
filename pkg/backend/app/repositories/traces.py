"""Persistence of single-run delta trajectories."""

from __future__ import annotations

from pathlib import Path

from app.config import OutputFormat
from app.models.experiment import Table
from app.models.matching import RunTrace
from app.repositories.tables import write_table


def trace_to_table(trace: RunTrace) -> Table:
    """Columns ``t,delta_m,delta_w`` plus ``p_t`` when the acceptance series was recorded.

    ``p_t`` belongs to the proposal ending at ``t``, so time 0 has none.
    """
    with_p = trace.acceptance_prob_series is not None
    columns = ("t", "delta_m", "delta_w", "p_t") if with_p else ("t", "delta_m", "delta_w")
    table = Table(columns=columns)
    series = trace.acceptance_prob_series
    p_series = series.tolist() if series is not None else []
    for s, t in enumerate(trace.times.tolist()):
        row: dict[str, int | float] = {
            "t": t,
            "delta_m": int(trace.delta_m_series[s]),
            "delta_w": int(trace.delta_w_series[s]),
        }
        if with_p:
            row["p_t"] = float(p_series[s - 1]) if s else float("nan")
        table.rows.append(row)
    return table


def write_trace(
    trace: RunTrace,
    path: Path | str,
    fmt: OutputFormat = OutputFormat.CSV,
    sig_digits: int = 6,
) -> Path:
    return write_table(trace_to_table(trace), path, fmt, sig_digits)
