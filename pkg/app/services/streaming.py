"""
Two-pass streaming core-sets

Pass 1 picks a vertex set with importance-score estimates from a pre-drawn
low-score sample, a bank of l1 samplers over the degree vector and a CountMin
sketch for heavy vertices. Pass 2 keeps a reweighted, edge-sampled copy of the
graph induced on that set.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from app.config import settings
from app.errors import InputValidationError, LimitExceededError
from app.models import (
    ImportanceParams,
    KeepRule,
    Problem,
    SamplerBackend,
    SolverKind,
    StreamReport,
)
from app.services.common import derive_seed, hash_pair, log, make_rng, to_unit
from app.services.graph import EdgeStream, Graph, SignedGraph, StreamEvent
from app.services.pipeline import solve_value
from app.services.sampling import CoresetGraph
from app.services.sketch import CountMinSketch, make_sampler_bank

logger = logging.getLogger(__name__)

LOW_SAMPLE_SALT = 0x51
COUNTMIN_SALT = 0xC3
SAMPLER_SALT = 0xB7
COIN_SALT = 0xE5
RESCALED_CONSTANT = 8.0


@dataclass(eq=False)
class Pass1State:
    n: int
    params: ImportanceParams
    rng_seed: int
    low_mask: np.ndarray
    low_score: float
    cm: CountMinSketch
    bank: object
    r0: int
    total: float = 0.0
    events: int = 0

    @property
    def delta(self) -> float:
        return self.params.delta

    @property
    def zeta(self) -> float:
        return self.params.alpha_eps


@dataclass(frozen=True, eq=False)
class Pass1Output:
    """Vertex ids (ascending) with score estimates v_i and estimated inclusion probabilities

    sampled marks entries that came from a sampler draw or the CountMin threshold.
    """

    ids: np.ndarray
    scores: np.ndarray
    inclusion: np.ndarray
    sampled: np.ndarray
    low_count: int
    mid_count: int
    high_count: int
    space: Dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.ids)

    def as_dict(self) -> Dict[int, float]:
        return {int(i): float(v) for i, v in zip(self.ids, self.scores)}


@dataclass(eq=False)
class Pass2State:
    n: int
    delta: float
    epsilon: float
    ids: np.ndarray
    weights: np.ndarray
    keep_rule: KeepRule
    rng_seed: int
    problem: Problem
    kept: Dict[Tuple[int, int], Tuple[float, ...]] = field(default_factory=dict)
    peak: int = 0


# Pass 1
def pass1_init(
    n: int,
    delta: float,
    epsilon: float,
    rng_seed: int,
    problem: Problem = Problem.MAXCUT,
    c_const: Optional[float] = None,
    backend: SamplerBackend = SamplerBackend.SKETCH,
    floor_divisor: int = 1,
) -> Pass1State:
    """Allocate the sketches and draw the low-score sample S_l before any event"""
    if n < 2:
        raise InputValidationError("streaming needs n >= 2")
    if delta <= 0:
        raise InputValidationError("streaming needs a positive average degree")
    params = ImportanceParams(
        epsilon=epsilon,
        c_const=settings.default_c_const if c_const is None else c_const,
        problem=problem,
        n=n,
        delta=delta,
        floor_divisor=floor_divisor,
    )
    alpha = params.alpha_eps
    low_score = min(1.0, params.floor / params.heavy_threshold)
    low_mask = make_rng(derive_seed(rng_seed, LOW_SAMPLE_SALT)).random(n) < low_score

    cm = CountMinSketch.for_accuracy(
        n, n / (delta * alpha ** 2), settings.sketch_failure,
        derive_seed(rng_seed, COUNTMIN_SALT), max_width=settings.countmin_width_factor * n,
    )
    # S_l already holds every vertex when its score saturates
    r0 = 1 if low_score >= 1 else math.ceil(n / (delta * alpha))
    r = math.ceil(settings.sampler_constant * r0)
    if r > settings.max_samplers:
        raise LimitExceededError(
            f"{r} samplers exceed the limit {settings.max_samplers}; raise c_const or epsilon"
        )
    bank = make_sampler_bank(backend, n, r, derive_seed(rng_seed, SAMPLER_SALT))
    logger.debug(
        "pass 1: |S_l|=%d, CountMin %dx%d, %d samplers (%s), seed=%d",
        int(low_mask.sum()), cm.depth, cm.width, r, SamplerBackend(backend).value, rng_seed,
    )
    return Pass1State(
        n=n, params=params, rng_seed=rng_seed, low_mask=low_mask,
        low_score=low_score, cm=cm, bank=bank, r0=r0,
    )


def pass1_feed_many(state: Pass1State, chunk: EdgeStream) -> None:
    """Two index updates per event, one per endpoint; deletes subtract"""
    if len(chunk) == 0:
        return
    weights = chunk.sign * chunk.magnitudes
    items = np.concatenate([chunk.u, chunk.v])
    both = np.concatenate([weights, weights])
    state.cm.update_many(items, both)
    state.bank.update_many(items, both)
    state.total += float(both.sum())
    state.events += len(chunk)


def pass1_feed(state: Pass1State, event: StreamEvent) -> None:
    pass1_feed_many(state, EdgeStream.from_events(state.n, [event]))


def _union_max(scores: Dict[int, float], ids: np.ndarray, values: np.ndarray) -> None:
    for i, v in zip(ids, values):
        i = int(i)
        scores[i] = max(scores.get(i, 0.0), float(v))


def pass1_finalize(state: Pass1State) -> Pass1Output:
    """S_l, then one draw per successful sampler up to r0, then CountMin heavy vertices, merged by max"""
    params = state.params
    heavy = params.heavy_threshold

    low_ids = np.flatnonzero(state.low_mask)
    scores: Dict[int, float] = {}
    _union_max(scores, low_ids, np.full(len(low_ids), state.low_score))

    items, values, ok = state.bank.sample_all()
    drawn = np.flatnonzero(ok)[:state.r0]
    mid_ids, mid_degree = items[drawn], values[drawn]
    mid_scores = np.minimum(1.0, np.maximum(mid_degree, params.floor) / heavy)
    _union_max(scores, mid_ids, mid_scores)

    estimates = state.cm.query_many(np.arange(state.n))
    high_ids = np.flatnonzero(estimates >= (1 - state.zeta) * heavy)
    _union_max(scores, high_ids, np.ones(len(high_ids)))

    ids = np.array(sorted(scores), dtype=np.int64)
    out_scores = np.array([scores[int(i)] for i in ids])
    sampled = np.zeros(len(ids), dtype=bool)
    sampled[np.isin(ids, mid_ids) | np.isin(ids, high_ids)] = True

    degree = estimates[ids].astype(float)
    sampler_degree = dict(zip((int(i) for i in mid_ids), mid_degree))
    for pos, i in enumerate(ids):
        if int(i) in sampler_degree:
            degree[pos] = sampler_degree[int(i)]
    share = np.clip(degree / state.total, 0.0, 1.0) if state.total > 0 else np.zeros(len(ids))
    inclusion = 1.0 - (1.0 - state.low_score) * (1.0 - share) ** len(drawn)
    inclusion[np.isin(ids, high_ids)] = 1.0
    inclusion = np.maximum(inclusion, 1e-12)

    pairs = len(low_ids) + len(drawn) + len(high_ids)
    space = {
        "pass1_counters": int(state.cm.counter_count + state.bank.counter_count),
        "pass1_pairs": int(pairs),
        "random_table_entries": int(state.bank.table_entries),
    }
    logger.debug(
        "pass 1 done: |S_l|=%d, |S_m|=%d (of %d samplers), |S_h|=%d, |S|=%d",
        len(low_ids), len(drawn), state.bank.r, len(high_ids), len(ids),
    )
    return Pass1Output(
        ids=ids,
        scores=out_scores,
        inclusion=inclusion,
        sampled=sampled,
        low_count=len(low_ids),
        mid_count=len(drawn),
        high_count=len(high_ids),
        space=space,
    )


# Pass 2
def pass2_init(
    output: Pass1Output,
    n: int,
    delta: float,
    epsilon: float,
    rng_seed: int,
    problem: Problem = Problem.MAXCUT,
    keep_rule: KeepRule = KeepRule.LOG,
    calibrated: bool = True,
) -> Pass2State:
    """Vertices weigh by their inclusion probability, or by the score v_i when not calibrated"""
    weights = output.inclusion if calibrated else output.scores
    return Pass2State(
        n=n,
        delta=delta,
        epsilon=epsilon,
        ids=output.ids,
        weights=np.asarray(weights, dtype=float),
        keep_rule=KeepRule(keep_rule),
        rng_seed=rng_seed,
        problem=problem,
    )


def keep_probabilities(state: Pass2State, w: np.ndarray) -> np.ndarray:
    if state.keep_rule == KeepRule.LOG:
        return np.minimum(1.0, w * log(state.n) / state.epsilon ** 2)
    expected_total = state.n / (2 * state.delta)
    return np.minimum(
        1.0, RESCALED_CONSTANT * len(state.ids) * w / (state.epsilon ** 2 * expected_total)
    )


def pass2_feed_many(state: Pass2State, chunk: EdgeStream) -> None:
    """Only edges inside S count; a hashed coin per edge decides keep/drop on every encounter"""
    if len(chunk) == 0 or len(state.ids) == 0:
        return
    ids = state.ids
    pu = np.minimum(np.searchsorted(ids, chunk.u), len(ids) - 1)
    pv = np.minimum(np.searchsorted(ids, chunk.v), len(ids) - 1)
    inside = (ids[pu] == chunk.u) & (ids[pv] == chunk.v)
    if not inside.any():
        return
    a = np.minimum(pu, pv)[inside]
    b = np.maximum(pu, pv)[inside]
    base = 1.0 / (state.weights[a] * state.weights[b] * state.delta ** 2)
    prob = keep_probabilities(state, base * chunk.magnitudes[inside])
    lo = np.minimum(chunk.u, chunk.v)[inside]
    hi = np.maximum(chunk.u, chunk.v)[inside]
    coin = to_unit(hash_pair(derive_seed(state.rng_seed, COIN_SALT), lo, hi)) < prob
    sign = chunk.sign[inside]
    first = chunk.w[inside]
    second = None if chunk.c_minus is None else chunk.c_minus[inside]

    for e in np.flatnonzero(coin):
        key = (int(a[e]), int(b[e]))
        if sign[e] < 0:
            state.kept.pop(key, None)
            continue
        factor = base[e] / prob[e]
        if second is None:
            state.kept[key] = (float(first[e] * factor),)
        else:
            state.kept[key] = (float(first[e] * factor), float(second[e] * factor))
        state.peak = max(state.peak, len(state.kept))


def pass2_feed(state: Pass2State, event: StreamEvent) -> None:
    pass2_feed_many(state, EdgeStream.from_events(state.n, [event]))


def pass2_finalize(state: Pass2State) -> CoresetGraph:
    size = len(state.ids)
    keys = sorted(state.kept)
    u = np.array([k[0] for k in keys], dtype=np.int64)
    v = np.array([k[1] for k in keys], dtype=np.int64)
    if state.problem == Problem.CC:
        graph = SignedGraph.from_edges(
            size, u=u, v=v,
            c_plus=np.array([state.kept[k][0] for k in keys], dtype=float),
            c_minus=np.array([state.kept[k][1] for k in keys], dtype=float),
            max_weight=np.inf,
        )
    else:
        graph = Graph.from_edges(size, u=u, v=v, w=np.array([state.kept[k][0] for k in keys], dtype=float))
    return CoresetGraph(
        graph=graph,
        original_ids=state.ids,
        probabilities=state.weights,
        delta=state.delta,
        n_original=state.n,
        problem=state.problem,
        epsilon=state.epsilon,
        rng_seed=state.rng_seed,
        edge_sampled=True,
        keep_rule=state.keep_rule,
    )


# Driver
def default_backend(stream: EdgeStream) -> SamplerBackend:
    """Exact reservoirs for insert-only streams, the linear sketch once deletes appear"""
    if len(stream) and np.any(stream.sign < 0):
        return SamplerBackend.SKETCH
    return SamplerBackend.RESERVOIR


def build_stream_coreset(
    stream: EdgeStream,
    n: int,
    delta: float,
    epsilon: float,
    rng_seed: int,
    problem: Optional[Problem] = None,
    c_const: Optional[float] = None,
    backend: Optional[SamplerBackend] = None,
    keep_rule: KeepRule = KeepRule.LOG,
    calibrated: bool = True,
    chunk: Optional[int] = None,
) -> Tuple[CoresetGraph, Pass1Output, Dict[str, int]]:
    """Both passes over a replayable stream; returns the core-set, Pass 1 output and space counters"""
    problem = Problem(problem) if problem is not None else (Problem.CC if stream.signed else Problem.MAXCUT)
    if (problem == Problem.CC) != stream.signed:
        raise InputValidationError(f"{problem.value} needs a {'signed' if problem == Problem.CC else 'plain'} stream")
    backend = default_backend(stream) if backend is None else SamplerBackend(backend)
    chunk = chunk or settings.stream_chunk

    first = pass1_init(n, delta, epsilon, rng_seed, problem, c_const, backend)
    for part in stream.chunks(chunk):
        pass1_feed_many(first, part)
    output = pass1_finalize(first)

    second = pass2_init(output, n, delta, epsilon, derive_seed(rng_seed, 2), problem, keep_rule, calibrated)
    for part in stream.chunks(chunk):
        pass2_feed_many(second, part)
    coreset = pass2_finalize(second)

    space = dict(output.space)
    space["pass2_vertices"] = len(output)
    space["pass2_peak_edges"] = second.peak
    space["peak_stored_items"] = max(space["pass1_pairs"], len(output) + second.peak)
    return coreset, output, space


def two_pass_run(
    stream: EdgeStream,
    n: int,
    delta: float,
    epsilon: float,
    solver: SolverKind,
    rng_seed: int,
    problem: Optional[Problem] = None,
    k: int = 2,
    c_const: Optional[float] = None,
    restarts: int = 20,
    backend: Optional[SamplerBackend] = None,
    keep_rule: KeepRule = KeepRule.LOG,
    calibrated: bool = True,
) -> StreamReport:
    """Pass 1, Pass 2, then the solver on the core-set; the value is scaled back by delta**2"""
    backend = default_backend(stream) if backend is None else SamplerBackend(backend)
    coreset, output, space = build_stream_coreset(
        stream, n, delta, epsilon, rng_seed, problem, c_const, backend, keep_rule, calibrated
    )
    value = solve_value(coreset, solver, rng_seed, k=k, restarts=restarts, epsilon=epsilon) * coreset.scale

    budget = (n / delta) * math.log(n) ** 3
    logger.info(
        "two-pass %s: |S|=%d |E'|=%d value=%.6g stored=%d (%.3g x (n/Delta) ln^3 n), seed=%d",
        coreset.problem.value, coreset.n, coreset.m, value,
        space["peak_stored_items"], space["peak_stored_items"] / budget, rng_seed,
    )
    return StreamReport(
        problem=coreset.problem,
        solver=SolverKind(solver),
        value=float(value),
        coreset_vertices=coreset.n,
        coreset_edges=coreset.m,
        low_count=output.low_count,
        mid_count=output.mid_count,
        high_count=output.high_count,
        sampler_backend=backend,
        space=space,
        rng_seed=rng_seed,
    )
