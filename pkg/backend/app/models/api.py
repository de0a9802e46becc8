"""Request and response schemas of the HTTP API."""

from __future__ import annotations

from pydantic import BaseModel, Field, model_validator

from app.models.experiment import ThresholdKind, ThresholdSpec
from app.models.market import SEED_MAX
from app.models.theory import Prediction, Regime


class ErrorResponse(BaseModel):
    error: str = Field(..., examples=["d=0 is outside [1, n]"])


class SimulateRequest(BaseModel):
    """Replicate one market cell."""

    n: int = Field(..., ge=1, examples=[1001])
    k: int = Field(default=0, examples=[-1])
    d: int = Field(..., ge=1, examples=[20])
    reps: int = Field(default=100, ge=1, examples=[500])
    seed: int = Field(..., ge=0, le=SEED_MAX, description="Master seed of the replications.")
    lazy: bool = Field(default=False, description="Use the coin-flipping engine.")
    include_wosm: bool = Field(default=False, description="Also report woman-optimal ranks.")

    @model_validator(mode="after")
    def check_cell(self) -> SimulateRequest:
        if self.d > self.n:
            raise ValueError(f"d={self.d} exceeds n={self.n}")
        if self.n + self.k < 0:
            raise ValueError(f"n+k={self.n + self.k} men is negative")
        if self.lazy and self.include_wosm:
            raise ValueError("the lazy engine only computes the man-optimal matching")
        return self


class ThresholdRequest(ThresholdSpec):
    seed: int = Field(..., ge=0, le=SEED_MAX, description="Master seed of every probe.")


class ThresholdResponse(BaseModel):
    kind: ThresholdKind
    n: int
    d_star: int
    probes: int
    estimates: dict[int, float]


class PredictResponse(BaseModel):
    """Regime chosen for (n, k, d) with its prediction, plus both curves for overlay."""

    regime: Regime
    prediction: Prediction
    moderate: Prediction
    dense: Prediction | None = Field(
        default=None, description="Present when n >= 2 and d >= 2."
    )
