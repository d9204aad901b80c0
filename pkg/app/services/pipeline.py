"""
Solver dispatch shared by the offline and streaming pipelines
"""
import logging
from typing import Optional, Tuple, Union

from app.config import settings
from app.errors import InputValidationError
from app.models import EstimateMode, Problem, SolverKind
from app.services.estimate import est_cc, est_maxcut, gamma_coreset, gamma_original
from app.services.graph import AnyGraph, SignedGraph
from app.services.sampling import CoresetGraph, build_coreset, importance_params
from app.services.solvers import cc_exact, cc_local_search, maxcut_exact, maxcut_local_search

logger = logging.getLogger(__name__)


def problem_of(view) -> Problem:
    graph = view.graph if isinstance(view, CoresetGraph) else view
    return Problem.CC if isinstance(graph, SignedGraph) else Problem.MAXCUT


def solve_value(
    view: Union[AnyGraph, CoresetGraph],
    solver: SolverKind,
    rng_seed: int,
    k: int = 2,
    restarts: int = 20,
    epsilon: Optional[float] = None,
    est_mode: EstimateMode = EstimateMode.EXHAUSTIVE,
) -> float:
    """Objective value found by the chosen solver, on the scale of view

    est draws its seed with gamma_coreset on core-sets and gamma_original on graphs.
    """
    solver = SolverKind(solver)
    problem = problem_of(view)
    graph = view.graph if isinstance(view, CoresetGraph) else view

    if solver == SolverKind.EXACT:
        if problem == Problem.CC:
            return cc_exact(graph, k)[1]
        return maxcut_exact(graph)[1]
    if solver == SolverKind.LOCAL_SEARCH:
        if problem == Problem.CC:
            return cc_local_search(graph, k, restarts, rng_seed)[1]
        return maxcut_local_search(graph, restarts, rng_seed)[1]

    epsilon = settings.default_epsilon if epsilon is None else epsilon
    if isinstance(view, CoresetGraph):
        gamma = gamma_coreset(view, epsilon, view.delta, view.n_original)
    else:
        if graph.avg_degree <= 0:
            return 0.0 if problem == Problem.MAXCUT else graph.C_minus
        gamma = gamma_original(graph.n, epsilon, graph.avg_degree)
    if problem == Problem.CC:
        return est_cc(graph, gamma, k, rng_seed, mode=est_mode).value
    return est_maxcut(graph, gamma, rng_seed, mode=est_mode).value


def offline_pipeline(
    g: AnyGraph,
    epsilon: float,
    solver: SolverKind,
    rng_seed: int,
    c_const: Optional[float] = None,
    k: int = 2,
    restarts: int = 20,
    edge_sampling: bool = True,
) -> Tuple[CoresetGraph, float]:
    """Core-set of g and the solver's value on it, scaled back to g"""
    if g.n < 2:
        raise InputValidationError("the offline pipeline needs at least two vertices")
    params = importance_params(g, epsilon, c_const)
    coreset = build_coreset(g, params, rng_seed, edge_sampling=edge_sampling)
    value = solve_value(coreset, solver, rng_seed, k=k, restarts=restarts, epsilon=epsilon)
    logger.debug("offline pipeline value %.6g on %d core-set vertices", value * coreset.scale, coreset.n)
    return coreset, value * coreset.scale
