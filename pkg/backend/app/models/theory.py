"""Schemas for closed-form predictions."""

from __future__ import annotations

from enum import Enum

from pydantic import BaseModel, Field


class Regime(str, Enum):
    """Connectivity regime a prediction applies to."""

    MODERATE = "moderate"
    DENSE = "dense"
    COMPLETE = "complete"


class Prediction(BaseModel):
    """Predicted ranks and unmatched count, with optional error envelopes."""

    regime: Regime
    r_men_pred: float = Field(..., description="Predicted men's average rank of wives.")
    r_women_pred: float = Field(..., description="Predicted women's average rank of husbands.")
    delta_pred: float = Field(..., description="Predicted number of unmatched agents per side.")
    band: float | None = Field(
        default=None, description="Asymptotic +/- envelope on the ranks (e.g. d^0.3)."
    )
    delta_m_band_factor: float | None = Field(
        default=None, description="Multiplicative envelope on the unmatched men count."
    )
    delta_w_band_factor: float | None = Field(
        default=None, description="Multiplicative envelope on the unmatched women count."
    )
    r_men_range: tuple[float, float] | None = Field(
        default=None, description="Quantitative bounds on the men's average rank."
    )
    r_women_range: tuple[float, float] | None = Field(
        default=None, description="Quantitative bounds on the women's average rank."
    )
