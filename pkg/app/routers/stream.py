from fastapi import APIRouter

from app.models import StreamReport, StreamRunRequest
from app.routers.common import service_errors
from app.services.common import derive_seed
from app.services.graph import graph_from_payload, to_stream
from app.services.streaming import two_pass_run

router = APIRouter()


@router.post("/run", response_model=StreamReport)
def run_stream(request: StreamRunRequest):
    """Stream the graph in the requested order and run both passes plus the solver"""
    with service_errors():
        g = graph_from_payload(request.graph)
        stream = to_stream(g, request.order, derive_seed(request.rng_seed, 3))
        return two_pass_run(
            stream, g.n, g.avg_degree, request.epsilon, request.solver, request.rng_seed,
            k=request.k, c_const=request.c_const,
        )
