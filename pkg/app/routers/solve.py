from fastapi import APIRouter, HTTPException, status

from app.models import SolutionRecord, SolveRequest, SolverKind
from app.routers.common import service_errors
from app.services.graph import graph_from_payload
from app.services.solvers import (
    cc_exact,
    cc_local_search,
    maxcut_exact,
    maxcut_local_search,
    solution_record,
)

router = APIRouter()


def _check_solver(request: SolveRequest) -> None:
    if request.solver == SolverKind.EST:
        raise HTTPException(
            status_code=status.HTTP_400_BAD_REQUEST,
            detail="the est solver returns an estimate, not an assignment; use /api/estimate",
        )


@router.post("/maxcut", response_model=SolutionRecord)
def solve_maxcut(request: SolveRequest):
    _check_solver(request)
    with service_errors():
        g = graph_from_payload(request.graph)
        if request.solver == SolverKind.EXACT:
            side, value = maxcut_exact(g)
            return solution_record(side, value, request.solver.value)
        side, value = maxcut_local_search(g, request.restarts, request.rng_seed)
        return solution_record(side, value, request.solver.value, request.rng_seed)


@router.post("/cc", response_model=SolutionRecord)
def solve_cc(request: SolveRequest):
    _check_solver(request)
    with service_errors():
        g = graph_from_payload(request.graph)
        if request.solver == SolverKind.EXACT:
            labels, value = cc_exact(g, request.k)
            return solution_record(labels, value, request.solver.value)
        labels, value = cc_local_search(g, request.k, request.restarts, request.rng_seed)
        return solution_record(labels, value, request.solver.value, request.rng_seed)
