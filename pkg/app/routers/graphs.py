from fastapi import APIRouter

from app.models import GraphPayload, PlantedCCRequest, RandomGraphRequest
from app.routers.common import service_errors
from app.services.graph import gen_planted_cc, gen_random_graph, graph_to_payload

router = APIRouter()


@router.post("/random", response_model=GraphPayload)
def random_graph(request: RandomGraphRequest):
    """Erdos-Renyi graph with expected average degree n^delta_exp"""
    with service_errors():
        return graph_to_payload(gen_random_graph(request.n, request.delta_exp, request.rng_seed))


@router.post("/planted-cc", response_model=GraphPayload)
def planted_cc(request: PlantedCCRequest):
    """Complete signed graph around a planted k-clustering"""
    with service_errors():
        return graph_to_payload(gen_planted_cc(request.n, request.k, request.noise, request.rng_seed))
