"""Pydantic schemas for rank statistics and replication summaries."""

from __future__ import annotations

import math

from pydantic import BaseModel, Field, field_serializer


class RankSummary(BaseModel):
    """Average ranks and unmatched counts of one matching.

    Unmatched men count as rank d+1 and unmatched women as |M_j|+1.
    """

    r_men: float = Field(..., description="Men's average rank of wives.", examples=[4.47])
    r_women: float = Field(..., description="Women's average rank of husbands.", examples=[4.51])
    delta_m: int = Field(..., ge=0, description="Number of unmatched men.")
    delta_w: int = Field(..., ge=0, description="Number of unmatched women.")


class RankGap(BaseModel):
    """How much worse each side fares under WOSM than under MOSM (men) and vice versa."""

    men: float = Field(..., description="R_MEN(WOSM) - R_MEN(MOSM); never negative.")
    women: float = Field(..., description="R_WOMEN(MOSM) - R_WOMEN(WOSM); never negative.")


class MetricSummary(BaseModel):
    """Mean, spread and nearest-rank 10th/90th percentiles over replications."""

    mean: float
    std: float
    p10: float
    p90: float
    count: int = Field(..., ge=1)

    @field_serializer("mean", "std", "p10", "p90", when_used="json")
    def nan_as_null(self, value: float) -> float | None:
        # r_men of a cell without men
        return None if math.isnan(value) else value


class SummaryStats(BaseModel):
    """Aggregated replication metrics for one market cell."""

    n: int
    k: int
    d: int
    reps: int
    engine: str = Field(default="eager", examples=["eager", "lazy"])
    metrics: dict[str, MetricSummary]

    def mean(self, metric: str) -> float:
        return self.metrics[metric].mean
