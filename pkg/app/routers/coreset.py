from fastapi import APIRouter

from app.models import CoresetRequest, CoresetResponse
from app.routers.common import service_errors
from app.services.graph import graph_from_payload, graph_to_payload
from app.services.sampling import build_coreset, importance_params

router = APIRouter()


@router.post("", response_model=CoresetResponse)
def create_coreset(request: CoresetRequest):
    """Importance-sampled core-set (vertex sample, then optional edge sample)"""
    with service_errors():
        g = graph_from_payload(request.graph)
        params = importance_params(g, request.epsilon, request.c_const)
        coreset = build_coreset(g, params, request.rng_seed, edge_sampling=request.edge_sampling)
        return CoresetResponse(graph=graph_to_payload(coreset.graph), metadata=coreset.metadata())
