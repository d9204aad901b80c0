"""
Importance scores, the vertex-sample / edge-sample core-set procedures and
the two equivalent double-sampling strategies
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.errors import DomainError, InputValidationError, LimitExceededError
from app.models import CoresetMetadata, ImportanceParams, KeepRule, Problem, Strategy
from app.services.common import derive_seed, make_rng
from app.services.graph import AnyGraph, Graph, SignedGraph

logger = logging.getLogger(__name__)

BAND_TOLERANCE = 1e-12
WEIGHT_TOLERANCE = 1e-9
PAIR_TABLE_LIMIT = 12


@dataclass(frozen=True, eq=False)
class CoresetGraph:
    """Vertex-sampled, reweighted graph

    graph is indexed 0..len(original_ids)-1; local vertex i stands for original_ids[i].
    Objective values on graph estimate the original ones divided by delta**2.
    """

    graph: AnyGraph
    original_ids: np.ndarray
    probabilities: np.ndarray
    delta: float
    n_original: int
    problem: Problem = Problem.MAXCUT
    epsilon: Optional[float] = None
    rng_seed: Optional[int] = None
    edge_sampled: bool = False
    keep_rule: Optional[KeepRule] = None

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def m(self) -> int:
        return self.graph.m

    @property
    def total_weight(self) -> float:
        """W, the sum of edge weights (|eta| for signed core-sets)"""
        return self.graph.total_weight

    @property
    def scale(self) -> float:
        """Factor mapping a core-set objective back to the original graph's scale"""
        return self.delta ** 2

    def base_weights(self) -> np.ndarray:
        """1 / (p_u p_v delta^2) for every edge"""
        p = self.probabilities
        return 1.0 / (p[self.graph.u] * p[self.graph.v] * self.delta ** 2)

    def check_weights(self, original: AnyGraph, tol: float = WEIGHT_TOLERANCE) -> None:
        """Every edge weight equals base weight times the original edge weight"""
        ids = self.original_ids
        lookup = {(int(a), int(b)): i for i, (a, b) in enumerate(zip(original.u, original.v))}
        base = self.base_weights()
        for e in range(self.m):
            key = (int(ids[self.graph.u[e]]), int(ids[self.graph.v[e]]))
            if key not in lookup:
                raise InputValidationError(f"core-set edge {key} is not an edge of the original graph")
            j = lookup[key]
            if isinstance(self.graph, SignedGraph):
                expected = np.array([original.c_plus[j], original.c_minus[j]]) * base[e]
                actual = np.array([self.graph.c_plus[e], self.graph.c_minus[e]])
            else:
                expected = np.array([original.w[j] * base[e]])
                actual = np.array([self.graph.w[e]])
            if not np.allclose(actual, expected, rtol=tol, atol=tol):
                raise InputValidationError(f"core-set edge {key} has weight {actual}, expected {expected}")

    def metadata(self) -> CoresetMetadata:
        return CoresetMetadata(
            problem=self.problem,
            n_original=self.n_original,
            original_ids=[int(i) for i in self.original_ids],
            probabilities=[float(p) for p in self.probabilities],
            delta=self.delta,
            epsilon=self.epsilon,
            rng_seed=self.rng_seed,
            edge_sampled=self.edge_sampled,
            keep_rule=self.keep_rule,
        )


@dataclass(frozen=True)
class PairSample:
    S: frozenset
    S_prime: frozenset

    def __post_init__(self):
        if not self.S <= self.S_prime:
            raise InputValidationError("S must be a subset of S_prime")


@dataclass(frozen=True, eq=False)
class PairDistribution:
    """Exact joint law of (S, S') as parallel arrays of bitmasks and probabilities

    Rows are enumerated in a fixed order, so tables built for the same n align entrywise.
    """

    n: int
    s_mask: np.ndarray
    s_prime_mask: np.ndarray
    prob: np.ndarray = field(repr=False)

    def as_dict(self) -> Dict[Tuple[int, int], float]:
        return {
            (int(a), int(b)): float(p) for a, b, p in zip(self.s_mask, self.s_prime_mask, self.prob)
        }

    def probability(self, S: Sequence[int], S_prime: Sequence[int]) -> float:
        a = sum(1 << int(i) for i in S)
        b = sum(1 << int(i) for i in S_prime)
        hit = (self.s_mask == a) & (self.s_prime_mask == b)
        return float(self.prob[hit].sum())

    def max_difference(self, other: "PairDistribution") -> float:
        if self.n != other.n:
            raise InputValidationError("tables over different vertex counts")
        return float(np.max(np.abs(self.prob - other.prob)))


# Importance scores
def importance_params(
    g: AnyGraph,
    epsilon: float,
    c_const: Optional[float] = None,
    problem: Optional[Problem] = None,
    floor_divisor: int = 1,
) -> ImportanceParams:
    if problem is None:
        problem = Problem.CC if isinstance(g, SignedGraph) else Problem.MAXCUT
    delta = g.avg_degree
    if delta <= 0:
        raise InputValidationError("importance scores need a graph with positive average degree")
    return ImportanceParams(
        epsilon=epsilon,
        c_const=settings.default_c_const if c_const is None else c_const,
        problem=problem,
        n=g.n,
        delta=delta,
        floor_divisor=floor_divisor,
    )


def importance_score(d_i: float, params: ImportanceParams) -> float:
    """h_i = min(1, max(d_i, eps*Delta) / (Delta^2 alpha_eps))"""
    if d_i < 0:
        raise DomainError(f"degree must be nonnegative, got {d_i}")
    return min(1.0, max(d_i, params.floor) / params.heavy_threshold)


def importance_scores(g: AnyGraph, params: ImportanceParams) -> np.ndarray:
    return np.minimum(1.0, np.maximum(g.degrees, params.floor) / params.heavy_threshold)


def retention_probabilities(h: np.ndarray, inflate: float = 1.0) -> np.ndarray:
    if not 1.0 <= inflate <= 2.0:
        raise DomainError(f"inflate must lie in [1, 2], got {inflate}")
    return np.minimum(1.0, inflate * np.asarray(h, dtype=float))


def check_band(p: np.ndarray, h: np.ndarray) -> None:
    """h_i <= p_i <= min(1, 2 h_i) for every vertex"""
    low = p < h - BAND_TOLERANCE
    high = p > np.minimum(1.0, 2 * h) + BAND_TOLERANCE
    bad = np.flatnonzero(low | high)
    if len(bad):
        i = int(bad[0])
        raise InputValidationError(
            f"p[{i}]={p[i]:.6g} outside [{h[i]:.6g}, {min(1.0, 2 * h[i]):.6g}]"
        )


# Core-set procedures
def vertex_sample(
    g: AnyGraph,
    p: Sequence[float],
    rng_seed: int,
    params: Optional[ImportanceParams] = None,
    unchecked: bool = False,
) -> CoresetGraph:
    """Keep vertex i with probability p_i; reweight induced edges by 1 / (p_u p_v Delta^2)"""
    p = np.asarray(p, dtype=float)
    if len(p) != g.n:
        raise InputValidationError(f"expected {g.n} probabilities, got {len(p)}")
    delta = g.avg_degree if params is None else params.delta
    if delta <= 0:
        raise InputValidationError("vertex_sample needs positive average degree")
    if np.any(p <= 0) or np.any(p > 1):
        raise InputValidationError("retention probabilities must lie in (0, 1]")
    if not unchecked:
        if params is None:
            params = importance_params(g, settings.default_epsilon)
        check_band(p, importance_scores(g, params))

    rng = make_rng(rng_seed)
    keep = rng.random(g.n) < p
    ids = np.flatnonzero(keep)
    local = np.full(g.n, -1, dtype=np.int64)
    local[ids] = np.arange(len(ids))
    inside = keep[g.u] & keep[g.v]
    u, v = local[g.u[inside]], local[g.v[inside]]
    base = 1.0 / (p[g.u[inside]] * p[g.v[inside]] * delta ** 2)
    if isinstance(g, SignedGraph):
        sub = SignedGraph.from_edges(
            len(ids), u=u, v=v,
            c_plus=g.c_plus[inside] * base, c_minus=g.c_minus[inside] * base,
            max_weight=np.inf,
        )
        problem = Problem.CC
    else:
        sub = Graph.from_edges(len(ids), u=u, v=v, w=g.w[inside] * base)
        problem = Problem.MAXCUT
    logger.debug("vertex_sample kept %d/%d vertices, %d edges, seed=%d", len(ids), g.n, sub.m, rng_seed)
    return CoresetGraph(
        graph=sub,
        original_ids=ids,
        probabilities=p[ids],
        delta=delta,
        n_original=g.n,
        problem=problem,
        epsilon=None if params is None else params.epsilon,
        rng_seed=rng_seed,
    )


def _with_weights(h: CoresetGraph, keep: np.ndarray, factor: np.ndarray, **changes) -> CoresetGraph:
    g = h.graph
    if isinstance(g, SignedGraph):
        sub = SignedGraph.from_edges(
            g.n, u=g.u[keep], v=g.v[keep],
            c_plus=g.c_plus[keep] * factor, c_minus=g.c_minus[keep] * factor,
            max_weight=np.inf,
        )
    else:
        sub = Graph.from_edges(g.n, u=g.u[keep], v=g.v[keep], w=g.w[keep] * factor)
    fields = dict(
        graph=sub,
        original_ids=h.original_ids,
        probabilities=h.probabilities,
        delta=h.delta,
        n_original=h.n_original,
        problem=h.problem,
        epsilon=h.epsilon,
        rng_seed=h.rng_seed,
        edge_sampled=h.edge_sampled,
        keep_rule=h.keep_rule,
    )
    fields.update(changes)
    return CoresetGraph(**fields)


def edge_keep_probabilities(h: CoresetGraph, epsilon: float, constant: float = 8.0) -> np.ndarray:
    """min(1, constant * w_e / eps^2) after rescaling weights to sum to |S'|"""
    w = h.graph.abs_weights
    total = w.sum()
    if total <= 0:
        return np.ones(len(w))
    rescaled = w * (h.n / total)
    return np.minimum(1.0, constant * rescaled / epsilon ** 2)


def edge_sample(h: CoresetGraph, epsilon: float, rng_seed: int, constant: float = 8.0) -> CoresetGraph:
    """Sparsify a core-set: keep edge e w.p. p_e and reweight it to w_e / p_e"""
    if h.n == 0:
        raise InputValidationError("edge_sample needs a nonempty core-set")
    if not 0 < epsilon:
        raise DomainError("epsilon must be positive")
    pe = edge_keep_probabilities(h, epsilon, constant)
    rng = make_rng(rng_seed)
    keep = rng.random(len(pe)) < pe
    logger.debug("edge_sample kept %d/%d edges, seed=%d", int(keep.sum()), len(pe), rng_seed)
    return _with_weights(h, keep, 1.0 / pe[keep], edge_sampled=True, epsilon=epsilon)


def build_coreset(
    g: AnyGraph,
    params: ImportanceParams,
    rng_seed: int,
    edge_sampling: bool = True,
    inflate: float = 1.0,
) -> CoresetGraph:
    """Importance scores, vertex sample, then (optionally) edge sample"""
    h = importance_scores(g, params)
    p = retention_probabilities(h, inflate)
    coreset = vertex_sample(g, p, rng_seed, params=params)
    if edge_sampling and coreset.n > 0:
        coreset = edge_sample(coreset, params.epsilon, derive_seed(rng_seed, 1))
    logger.info(
        "core-set: %d of %d vertices, %d edges, W=%.6g (seed=%d)",
        coreset.n, g.n, coreset.m, coreset.total_weight, rng_seed,
    )
    return coreset


# Double sampling
def _check_pq(p: np.ndarray, q: np.ndarray) -> None:
    if p.shape != q.shape:
        raise InputValidationError("p and q differ in length")
    if np.any(q < 0) or np.any(p > 1):
        raise DomainError("need 0 <= q <= p <= 1")
    bad = np.flatnonzero(q > p)
    if len(bad):
        i = int(bad[0])
        raise DomainError(f"q[{i}]={q[i]} exceeds p[{i}]={p[i]}")


def p_star(p_v: float, q_v: float) -> float:
    """Probability that strategy B adds v to S' given v is not in S"""
    if not 0 <= q_v <= p_v <= 1:
        raise DomainError(f"need 0 <= q <= p <= 1, got p={p_v} q={q_v}")
    if q_v == 1:
        return 1.0
    return (p_v - q_v) / (1 - q_v)


def _p_star_vector(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    out = np.ones_like(p)
    open_ = q < 1
    out[open_] = (p[open_] - q[open_]) / (1 - q[open_])
    return out


def double_sample(strategy: Strategy, p: Sequence[float], q: Sequence[float], rng_seed: int) -> PairSample:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    _check_pq(p, q)
    rng = make_rng(rng_seed)
    n = len(p)
    if Strategy(strategy) == Strategy.A:
        in_prime = rng.random(n) < p
        ratio = np.divide(q, p, out=np.zeros_like(p), where=p > 0)
        in_s = in_prime & (rng.random(n) < ratio)
    else:
        in_s = rng.random(n) < q
        in_prime = in_s | (rng.random(n) < _p_star_vector(p, q))
    return PairSample(
        S=frozenset(int(i) for i in np.flatnonzero(in_s)),
        S_prime=frozenset(int(i) for i in np.flatnonzero(in_prime)),
    )


def pair_distribution_exact(strategy: Strategy, p: Sequence[float], q: Sequence[float]) -> PairDistribution:
    """Exact joint probabilities of (S, S') from per-vertex independence"""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    _check_pq(p, q)
    n = len(p)
    if n > PAIR_TABLE_LIMIT:
        raise LimitExceededError(f"pair tables are limited to n <= {PAIR_TABLE_LIMIT}, got {n}")
    # per vertex: (out, out), (out of S, in S'), (in both)
    if Strategy(strategy) == Strategy.A:
        ratio = np.divide(q, p, out=np.zeros_like(p), where=p > 0)
        states = np.stack([1 - p, p * (1 - ratio), p * ratio], axis=1)
    else:
        ps = _p_star_vector(p, q)
        states = np.stack([(1 - q) * (1 - ps), (1 - q) * ps, q], axis=1)
    in_s = np.array([0, 0, 1], dtype=np.int64)
    in_prime = np.array([0, 1, 1], dtype=np.int64)

    prob = np.ones(1)
    s_mask = np.zeros(1, dtype=np.int64)
    s_prime_mask = np.zeros(1, dtype=np.int64)
    for v in range(n):
        prob = np.multiply.outer(prob, states[v]).reshape(-1)
        s_mask = (s_mask[:, None] | (in_s << v)[None, :]).reshape(-1)
        s_prime_mask = (s_prime_mask[:, None] | (in_prime << v)[None, :]).reshape(-1)
    return PairDistribution(n=n, s_mask=s_mask, s_prime_mask=s_prime_mask, prob=prob)


def merge_by_coloring(labels: Sequence[int], t: int, rng_seed: int) -> np.ndarray:
    """Colour each cluster with one of t colours uniformly and merge equal colours

    Labels are renumbered by first occurrence.
    """
    if t < 1:
        raise DomainError("t must be at least 1")
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        return labels
    clusters, inverse = np.unique(labels, return_inverse=True)
    rng = make_rng(rng_seed)
    colour = rng.integers(0, t, len(clusters))[inverse]
    _, first = np.unique(colour, return_index=True)
    order = np.argsort(first)
    remap = np.empty(len(first), dtype=np.int64)
    remap[order] = np.arange(len(first))
    _, dense = np.unique(colour, return_inverse=True)
    return remap[dense]
