import numpy as np
from fastapi import APIRouter

from app.models import EstimateRequest, EstimateResult
from app.routers.common import service_errors
from app.services.estimate import est_cc, est_maxcut, gamma_original
from app.services.graph import graph_from_payload

router = APIRouter()


def _gamma(g, request: EstimateRequest) -> np.ndarray:
    if request.gamma is not None:
        return np.asarray(request.gamma, dtype=float)
    if g.n < 2 or g.avg_degree <= 0:
        return np.ones(g.n)
    return gamma_original(g.n, request.epsilon, g.avg_degree)


@router.post("/maxcut", response_model=EstimateResult)
def estimate_maxcut(request: EstimateRequest):
    with service_errors():
        g = graph_from_payload(request.graph)
        return est_maxcut(g, _gamma(g, request), request.rng_seed, mode=request.mode, samples=request.samples)


@router.post("/cc", response_model=EstimateResult)
def estimate_cc(request: EstimateRequest):
    with service_errors():
        g = graph_from_payload(request.graph)
        return est_cc(
            g, _gamma(g, request), request.k, request.rng_seed, mode=request.mode, samples=request.samples
        )
