"""Simulation router: replications, predictions and threshold searches.

Handlers only translate between HTTP schemas and the service layer. The
compute-bound endpoints are plain ``def`` so FastAPI runs them in its
threadpool instead of blocking the event loop.
"""

from __future__ import annotations

import logging

from fastapi import APIRouter, Query

from app.config import get_settings
from app.exceptions import InvalidConfigError
from app.models.api import (
    ErrorResponse,
    PredictResponse,
    SimulateRequest,
    ThresholdRequest,
    ThresholdResponse,
)
from app.models.market import MarketConfig
from app.models.stats import SummaryStats
from app.services.experiments import find_threshold, run_replications
from app.services.theory import predict, predict_dense, predict_moderate

logger = logging.getLogger(__name__)

router = APIRouter(tags=["simulations"])

_ERRORS = {422: {"model": ErrorResponse, "description": "Invalid parameters"}}


def _check_reps(reps: int) -> None:
    limit = get_settings().MAX_API_REPS
    if reps > limit:
        raise InvalidConfigError(f"reps={reps} exceeds the per-request limit of {limit}")


@router.post(
    "/simulate",
    response_model=SummaryStats,
    summary="Replicate one random market cell",
    responses=_ERRORS,
)
def simulate(body: SimulateRequest) -> SummaryStats:
    _check_reps(body.reps)
    logger.info("API simulate n=%d k=%d d=%d reps=%d", body.n, body.k, body.d, body.reps)
    return run_replications(
        MarketConfig(n=body.n, k=body.k, d=body.d),
        body.reps,
        body.seed,
        lazy=body.lazy,
        include_wosm=body.include_wosm,
    )


@router.get(
    "/predict",
    response_model=PredictResponse,
    summary="Closed-form rank and unmatched-count predictions",
    responses=_ERRORS,
)
async def prediction(
    n: int = Query(..., ge=1),
    k: int = Query(default=0),
    d: int = Query(..., ge=1),
) -> PredictResponse:
    chosen = predict(n, k, d)
    return PredictResponse(
        regime=chosen.regime,
        prediction=chosen,
        moderate=predict_moderate(n, d),
        dense=predict_dense(n, k, d) if n >= 2 and d >= 2 else None,
    )


@router.post(
    "/threshold",
    response_model=ThresholdResponse,
    summary="Bisect the threshold degree of a phase transition",
    responses=_ERRORS,
)
def threshold(body: ThresholdRequest) -> ThresholdResponse:
    _check_reps(body.reps)
    result = find_threshold(body, body.seed)
    return ThresholdResponse(
        kind=result.kind,
        n=result.n,
        d_star=result.d_star,
        probes=result.probes,
        estimates=result.estimates,
    )
