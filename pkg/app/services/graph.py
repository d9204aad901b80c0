"""
Graph and stream representations shared by every other service
"""
import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterator, List, Optional, Tuple, Union

import networkx as nx
import numpy as np
from scipy import sparse

from app.errors import DomainError, InputValidationError
from app.models import GraphKind, GraphPayload, StreamOrder
from app.services.common import make_rng

logger = logging.getLogger(__name__)

DEGREE_TOLERANCE = 1e-9


def _canonical_edges(n: int, u, v, *weights) -> Tuple[np.ndarray, ...]:
    """Validate an edge list and return it with u < v, sorted by (u, v)"""
    u = np.asarray(u, dtype=np.int64).reshape(-1)
    v = np.asarray(v, dtype=np.int64).reshape(-1)
    weights = [np.asarray(w, dtype=np.float64).reshape(-1) for w in weights]
    if any(len(w) != len(u) for w in weights) or len(u) != len(v):
        raise InputValidationError("edge arrays differ in length")
    if len(u) and (min(u.min(), v.min()) < 0 or max(u.max(), v.max()) >= n):
        raise InputValidationError(f"edge endpoint outside 0..{n - 1}")
    if np.any(u == v):
        i = int(np.flatnonzero(u == v)[0])
        raise InputValidationError(f"self-loop at vertex {int(u[i])}")
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    order = np.lexsort((hi, lo))
    lo, hi = lo[order], hi[order]
    if len(lo) > 1:
        dup = (lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1])
        if np.any(dup):
            i = int(np.flatnonzero(dup)[0])
            raise InputValidationError(f"duplicate edge ({int(lo[i])}, {int(hi[i])})")
    return (lo, hi, *[w[order] for w in weights])


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph on vertices 0..n-1 with nonnegative edge weights"""

    n: int
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    @classmethod
    def from_edges(cls, n: int, edges=(), u=None, v=None, w=None) -> "Graph":
        if n < 0:
            raise InputValidationError("vertex count must be nonnegative")
        if u is None:
            edges = list(edges)
            u = [e[0] for e in edges]
            v = [e[1] for e in edges]
            w = [e[2] if len(e) > 2 else 1.0 for e in edges]
        elif w is None:
            w = np.ones(len(u))
        lo, hi, weight = _canonical_edges(n, u, v, w)
        if np.any(weight < 0) or not np.all(np.isfinite(weight)):
            raise InputValidationError("edge weights must be finite and nonnegative")
        return cls(n=int(n), u=lo, v=hi, w=weight)

    @property
    def kind(self) -> GraphKind:
        return GraphKind.GRAPH

    @property
    def m(self) -> int:
        return len(self.u)

    @property
    def edges(self) -> List[Tuple[int, int, float]]:
        return [(int(a), int(b), float(c)) for a, b, c in zip(self.u, self.v, self.w)]

    @property
    def abs_weights(self) -> np.ndarray:
        return self.w

    @cached_property
    def degrees(self) -> np.ndarray:
        d = np.zeros(self.n)
        np.add.at(d, self.u, self.w)
        np.add.at(d, self.v, self.w)
        return d

    @property
    def total_weight(self) -> float:
        return float(self.w.sum())

    @property
    def avg_degree(self) -> float:
        return avg_degree(self)

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric weighted adjacency matrix"""
        return _symmetric(self.n, self.u, self.v, self.w)

    def validate(self) -> None:
        recomputed = np.bincount(self.u, self.w, self.n) + np.bincount(self.v, self.w, self.n)
        if not np.allclose(self.degrees, recomputed, rtol=0, atol=DEGREE_TOLERANCE):
            raise InputValidationError("cached degrees disagree with edge weights")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Graph)
            and self.n == other.n
            and np.array_equal(self.u, other.u)
            and np.array_equal(self.v, other.v)
            and np.array_equal(self.w, other.w)
        )

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"


@dataclass(frozen=True, eq=False)
class SignedGraph:
    """Graph whose edges carry an agreement weight c_plus and a disagreement weight c_minus

    Input graphs keep both weights in [0, 1]; reweighted core-sets raise max_weight.
    """

    n: int
    u: np.ndarray
    v: np.ndarray
    c_plus: np.ndarray
    c_minus: np.ndarray
    max_weight: float = 1.0

    @classmethod
    def from_edges(
        cls, n: int, edges=(), u=None, v=None, c_plus=None, c_minus=None, max_weight: float = 1.0
    ) -> "SignedGraph":
        if n < 0:
            raise InputValidationError("vertex count must be nonnegative")
        if u is None:
            edges = list(edges)
            u = [e[0] for e in edges]
            v = [e[1] for e in edges]
            c_plus = [e[2] for e in edges]
            c_minus = [e[3] for e in edges]
        lo, hi, cp, cm = _canonical_edges(n, u, v, c_plus, c_minus)
        if np.any(cp < 0) or np.any(cm < 0) or np.any(cp > max_weight) or np.any(cm > max_weight):
            raise InputValidationError(f"signed weights must lie in [0, {max_weight}]")
        both = (cp > 0) & (cm > 0)
        if np.any(both):
            i = int(np.flatnonzero(both)[0])
            raise InputValidationError(f"edge ({int(lo[i])}, {int(hi[i])}) has both signs")
        return cls(n=int(n), u=lo, v=hi, c_plus=cp, c_minus=cm, max_weight=float(max_weight))

    @property
    def kind(self) -> GraphKind:
        return GraphKind.SIGNED

    @property
    def m(self) -> int:
        return len(self.u)

    @property
    def edges(self) -> List[Tuple[int, int, float, float]]:
        return [
            (int(a), int(b), float(p), float(q))
            for a, b, p, q in zip(self.u, self.v, self.c_plus, self.c_minus)
        ]

    @property
    def eta(self) -> np.ndarray:
        return self.c_plus - self.c_minus

    @property
    def abs_weights(self) -> np.ndarray:
        return np.abs(self.eta)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.bincount(self.u, self.abs_weights, self.n) + np.bincount(self.v, self.abs_weights, self.n)

    @cached_property
    def d_minus(self) -> np.ndarray:
        """Per-vertex disagreement mass, sum of incident c_minus"""
        return np.bincount(self.u, self.c_minus, self.n) + np.bincount(self.v, self.c_minus, self.n)

    @property
    def C_plus(self) -> float:
        return float(self.c_plus.sum())

    @property
    def C_minus(self) -> float:
        return float(self.c_minus.sum())

    @property
    def total_weight(self) -> float:
        return float(self.abs_weights.sum())

    @property
    def avg_degree(self) -> float:
        return avg_degree(self)

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric matrix of eta"""
        return _symmetric(self.n, self.u, self.v, self.eta)

    def validate(self) -> None:
        if self.C_plus < 0 or self.C_minus < 0:
            raise InputValidationError("negative total weight")
        recomputed = np.bincount(self.u, self.abs_weights, self.n) + np.bincount(
            self.v, self.abs_weights, self.n
        )
        if not np.allclose(self.degrees, recomputed, rtol=0, atol=DEGREE_TOLERANCE):
            raise InputValidationError("cached degrees disagree with edge weights")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SignedGraph)
            and self.n == other.n
            and np.array_equal(self.u, other.u)
            and np.array_equal(self.v, other.v)
            and np.array_equal(self.c_plus, other.c_plus)
            and np.array_equal(self.c_minus, other.c_minus)
        )

    def __repr__(self) -> str:
        return f"SignedGraph(n={self.n}, m={self.m})"


AnyGraph = Union[Graph, SignedGraph]


def _symmetric(n: int, u: np.ndarray, v: np.ndarray, w: np.ndarray) -> sparse.csr_matrix:
    rows = np.concatenate([u, v])
    cols = np.concatenate([v, u])
    data = np.concatenate([w, w])
    return sparse.csr_matrix((data, (rows, cols)), shape=(n, n))


def as_graph(g) -> AnyGraph:
    """Unwrap a core-set to the weighted graph it carries"""
    return getattr(g, "graph", g)


def avg_degree(g) -> float:
    """(sum of degrees) / n; zero for the empty vertex set"""
    g = as_graph(g)
    if g.n == 0:
        return 0.0
    return float(g.degrees.sum()) / g.n


# Generators
def gen_random_graph(n: int, delta_exp: float, rng_seed: int) -> Graph:
    """Erdős–Rényi graph whose expected average degree is n ** delta_exp"""
    if not 0 < delta_exp <= 1:
        raise DomainError(f"delta_exp must lie in (0, 1], got {delta_exp}")
    if n < 2:
        raise InputValidationError("gen_random_graph needs n >= 2")
    p = min(1.0, n ** delta_exp / (n - 1))
    nx_graph = nx.fast_gnp_random_graph(n, p, seed=int(rng_seed))
    logger.debug("gen_random_graph n=%d p=%.6f seed=%d", n, p, rng_seed)
    edges = np.array(list(nx_graph.edges()), dtype=np.int64).reshape(-1, 2)
    return Graph.from_edges(n, u=edges[:, 0], v=edges[:, 1])


def _draw_labels(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    if not 1 <= k <= n:
        raise InputValidationError(f"need 1 <= k <= n, got k={k} n={n}")
    return rng.permutation(np.arange(n) % k)


def planted_partition(n: int, k: int, rng_seed: int) -> np.ndarray:
    """Ground-truth labels of gen_planted_cc: every one of the k clusters is nonempty"""
    return _draw_labels(n, k, make_rng(rng_seed))


def gen_planted_cc(n: int, k: int, noise: float, rng_seed: int) -> SignedGraph:
    """Complete signed graph agreeing with a planted k-partition, each sign flipped w.p. noise"""
    if not 0 <= noise <= 1:
        raise DomainError(f"noise must lie in [0, 1], got {noise}")
    rng = make_rng(rng_seed)
    labels = _draw_labels(n, k, rng)
    u, v = np.triu_indices(n, 1)
    same = labels[u] == labels[v]
    flip = rng.random(len(u)) < noise
    positive = same ^ flip
    return SignedGraph.from_edges(
        n, u=u, v=v, c_plus=positive.astype(float), c_minus=(~positive).astype(float)
    )


# Payload conversion for the HTTP surface
def graph_from_payload(payload: GraphPayload) -> AnyGraph:
    width = 3 if payload.kind == GraphKind.GRAPH else 4
    for row in payload.edges:
        if len(row) != width:
            raise InputValidationError(f"{payload.kind.value} edges need {width} fields, got {row}")
    rows = np.array(payload.edges, dtype=np.float64).reshape(-1, width)
    ends = rows[:, :2]
    if np.any(ends != np.round(ends)):
        raise InputValidationError("edge endpoints must be integers")
    ends = ends.astype(np.int64)
    if payload.kind == GraphKind.GRAPH:
        return Graph.from_edges(payload.n, u=ends[:, 0], v=ends[:, 1], w=rows[:, 2])
    return SignedGraph.from_edges(
        payload.n, u=ends[:, 0], v=ends[:, 1], c_plus=rows[:, 2], c_minus=rows[:, 3]
    )


def graph_to_payload(g: AnyGraph) -> GraphPayload:
    return GraphPayload(kind=g.kind, n=g.n, edges=[list(e) for e in g.edges])


# Streams
class EventOp(str, Enum):
    INSERT = "I"
    DELETE = "D"


@dataclass(frozen=True)
class StreamEvent:
    """One edge update; c_minus is set only for signed streams (w is then c_plus)"""

    op: EventOp
    u: int
    v: int
    w: float = 1.0
    c_minus: Optional[float] = None

    @property
    def signed(self) -> bool:
        return self.c_minus is not None

    @property
    def magnitude(self) -> float:
        """|eta| for signed events, the weight otherwise"""
        if self.signed:
            return abs(self.w - self.c_minus)
        return self.w


@dataclass(frozen=True, eq=False)
class EdgeStream:
    """Array-backed event sequence; iterating yields StreamEvent objects

    sign is +1 for inserts and -1 for deletes.
    """

    n: int
    sign: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    c_minus: Optional[np.ndarray] = None

    @classmethod
    def from_events(cls, n: int, events) -> "EdgeStream":
        events = list(events)
        signed = bool(events) and events[0].signed
        if any(e.signed != signed for e in events):
            raise InputValidationError("stream mixes signed and unsigned events")
        return cls(
            n=n,
            sign=np.array([1 if e.op == EventOp.INSERT else -1 for e in events], dtype=np.int64),
            u=np.array([e.u for e in events], dtype=np.int64),
            v=np.array([e.v for e in events], dtype=np.int64),
            w=np.array([e.w for e in events], dtype=np.float64),
            c_minus=np.array([e.c_minus for e in events], dtype=np.float64) if signed else None,
        )

    @property
    def signed(self) -> bool:
        return self.c_minus is not None

    @property
    def magnitudes(self) -> np.ndarray:
        if self.signed:
            return np.abs(self.w - self.c_minus)
        return self.w

    def __len__(self) -> int:
        return len(self.u)

    def __getitem__(self, index: int) -> StreamEvent:
        return StreamEvent(
            op=EventOp.INSERT if self.sign[index] > 0 else EventOp.DELETE,
            u=int(self.u[index]),
            v=int(self.v[index]),
            w=float(self.w[index]),
            c_minus=float(self.c_minus[index]) if self.signed else None,
        )

    def __iter__(self) -> Iterator[StreamEvent]:
        for i in range(len(self)):
            yield self[i]

    def chunks(self, size: int) -> Iterator["EdgeStream"]:
        """Contiguous slices of at most size events, in stream order"""
        for start in range(0, len(self), size):
            part = slice(start, start + size)
            yield EdgeStream(
                n=self.n,
                sign=self.sign[part],
                u=self.u[part],
                v=self.v[part],
                w=self.w[part],
                c_minus=None if self.c_minus is None else self.c_minus[part],
            )


def _edge_arrays(g: AnyGraph) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    if isinstance(g, SignedGraph):
        return g.c_plus, g.c_minus
    return g.w, None


def _non_edges(g: AnyGraph, count: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Up to count distinct vertex pairs that are not edges of g"""
    n = g.n
    if n < 2 or count <= 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    existing = g.u * n + g.v
    found = np.empty(0, dtype=np.int64)
    for _ in range(8):
        a = rng.integers(0, n, 4 * count + 16)
        b = rng.integers(0, n, 4 * count + 16)
        keep = a != b
        lo, hi = np.minimum(a, b)[keep], np.maximum(a, b)[keep]
        keys = lo * n + hi
        keys = keys[~np.isin(keys, existing)]
        found = np.unique(np.concatenate([found, keys]))
        if len(found) >= count:
            break
    found = rng.permutation(found)[:count]
    return found // n, found % n


def to_stream(g: AnyGraph, order: StreamOrder, rng_seed: int) -> EdgeStream:
    """Turn g into an insert (and optionally delete) stream whose net effect is g"""
    order = StreamOrder(order)
    rng = make_rng(rng_seed)
    first, second = _edge_arrays(g)
    m = g.m
    if order == StreamOrder.SORTED:
        idx = np.arange(m)
    else:
        idx = rng.permutation(m)
    if order != StreamOrder.INSERT_DELETE_MIX:
        return EdgeStream(
            n=g.n,
            sign=np.ones(m, dtype=np.int64),
            u=g.u[idx],
            v=g.v[idx],
            w=first[idx],
            c_minus=None if second is None else second[idx],
        )

    # extra edges are inserted then deleted; some real edges are deleted and reinserted
    fake_u, fake_v = _non_edges(g, max(1, m // 2) if m else 0, rng)
    f = len(fake_u)
    if second is None:
        fake_first, fake_second = np.ones(f), None
    else:
        positive = rng.random(f) < 0.5
        fake_first, fake_second = positive.astype(float), (~positive).astype(float)
    churn = rng.random(m) < 0.25
    c = int(churn.sum())

    t_real = rng.random(m)
    t_fake = np.sort(rng.random((f, 2)), axis=1)
    t_churn = np.sort(rng.random((c, 3)), axis=1)
    real_idx = np.arange(m)
    churn_idx = real_idx[churn]
    # churned edges use three times instead of one
    times = np.concatenate([t_real[~churn], t_fake[:, 0], t_fake[:, 1], t_churn.reshape(-1)])
    sign = np.concatenate(
        [np.ones(m - c), np.ones(f), -np.ones(f), np.tile([1, -1, 1], c)]
    ).astype(np.int64)
    src_u = np.concatenate([g.u[~churn], fake_u, fake_u, np.repeat(g.u[churn_idx], 3)])
    src_v = np.concatenate([g.v[~churn], fake_v, fake_v, np.repeat(g.v[churn_idx], 3)])
    src_w = np.concatenate([first[~churn], fake_first, fake_first, np.repeat(first[churn_idx], 3)])
    if second is None:
        src_c = None
    else:
        src_c = np.concatenate(
            [second[~churn], fake_second, fake_second, np.repeat(second[churn_idx], 3)]
        )
    perm = np.argsort(times, kind="stable")
    return EdgeStream(
        n=g.n,
        sign=sign[perm],
        u=src_u[perm],
        v=src_v[perm],
        w=src_w[perm],
        c_minus=None if src_c is None else src_c[perm],
    )


def replay(stream: EdgeStream, n: Optional[int] = None) -> AnyGraph:
    """Apply every event in order and return the final graph"""
    n = stream.n if n is None else n
    live = {}
    for i in range(len(stream)):
        a, b = int(stream.u[i]), int(stream.v[i])
        key = (min(a, b), max(a, b))
        payload = (float(stream.w[i]),) if not stream.signed else (float(stream.w[i]), float(stream.c_minus[i]))
        if stream.sign[i] > 0:
            if key in live:
                raise InputValidationError(f"event {i}: edge {key} inserted twice")
            live[key] = payload
        else:
            if live.get(key) != payload:
                raise InputValidationError(f"event {i}: delete of {key} matches no live edge")
            del live[key]
    edges = [(*key, *payload) for key, payload in live.items()]
    if stream.signed:
        return SignedGraph.from_edges(n, edges)
    return Graph.from_edges(n, edges)


def measure_delta(stream: EdgeStream, n: int) -> float:
    """Exact average degree of the stream's final graph using O(1) counters"""
    if n <= 0:
        raise InputValidationError("n must be positive")
    total = float(np.dot(stream.sign, stream.magnitudes)) if len(stream) else 0.0
    return 2.0 * total / n
