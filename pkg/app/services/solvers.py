"""
Objective evaluators, exhaustive oracles and local-search heuristics for
MaxCut and MAX-AGREE correlation clustering
"""
import logging
import math
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from app.config import settings
from app.errors import DomainError, InputValidationError, LimitExceededError
from app.models import SolutionRecord
from app.services.common import derive_seed, make_rng
from app.services.graph import Graph, SignedGraph, as_graph

logger = logging.getLogger(__name__)

IMPROVEMENT_EPS = 1e-12
ENUMERATION_CHUNK = 1 << 12


def _check_length(g, assignment) -> np.ndarray:
    assignment = np.asarray(assignment, dtype=np.int64).reshape(-1)
    if len(assignment) != g.n:
        raise InputValidationError(f"assignment has {len(assignment)} entries, graph has {g.n} vertices")
    return assignment


# Evaluators
def cut_value(g, cut) -> float:
    """Total weight of edges whose endpoints sit on different sides"""
    g = as_graph(g)
    side = _check_length(g, cut)
    return float(g.w[side[g.u] != side[g.v]].sum())


def cc_value(sg, labels) -> float:
    """C^- plus eta summed over edges inside clusters"""
    sg = as_graph(sg)
    labels = _check_length(sg, labels)
    inside = labels[sg.u] == labels[sg.v]
    return sg.C_minus + float(sg.eta[inside].sum())


def cc_value_definition(sg, labels) -> float:
    """Agreements: c_plus inside clusters plus c_minus across them"""
    sg = as_graph(sg)
    labels = _check_length(sg, labels)
    inside = labels[sg.u] == labels[sg.v]
    return float(sg.c_plus[inside].sum() + sg.c_minus[~inside].sum())


def cc_trivial_bound(sg) -> float:
    """max(C^+, C^-): one cluster or all singletons"""
    sg = as_graph(sg)
    return max(sg.C_plus, sg.C_minus)


def flip_gains(g: Graph, cut) -> np.ndarray:
    """Change in cut value from moving each vertex to the other side"""
    side = np.asarray(cut, dtype=float)
    inflow = g.adjacency @ side
    cross = np.where(side == 1, g.degrees - inflow, inflow)
    return g.degrees - 2 * cross


def relabel_gains(sg: SignedGraph, labels, k: int) -> np.ndarray:
    """n x k matrix: change in cc_value from moving vertex i to label l"""
    labels = np.asarray(labels, dtype=np.int64)
    onehot = np.zeros((sg.n, k))
    onehot[np.arange(sg.n), labels] = 1.0
    pull = sg.adjacency @ onehot
    return pull - pull[np.arange(sg.n), labels][:, None]


def is_local_optimum_cut(g, cut) -> bool:
    g = as_graph(g)
    return bool(np.all(flip_gains(g, _check_length(g, cut)) <= IMPROVEMENT_EPS))


def is_local_optimum_clustering(sg, labels, k: int) -> bool:
    sg = as_graph(sg)
    return bool(np.all(relabel_gains(sg, _check_length(sg, labels), k) <= IMPROVEMENT_EPS))


# MaxCut
def _side_matrix(count_bits: int) -> np.ndarray:
    masks = np.arange(1 << count_bits, dtype=np.int64)
    return ((masks[:, None] >> np.arange(count_bits)) & 1).astype(float)


def maxcut_exact(g, limit: Optional[int] = None) -> Tuple[np.ndarray, float]:
    """Exhaustive MaxCut with vertex 0 on side 0; ties go to the smallest bitmask

    The vertex set is split in two halves so values come from block matrix products.
    """
    g = as_graph(g)
    limit = settings.maxcut_exact_limit if limit is None else limit
    n = g.n
    if n > limit:
        raise LimitExceededError(f"maxcut_exact is limited to n <= {limit}, got {n}")
    if n <= 1:
        return np.zeros(n, dtype=np.int64), 0.0
    W = g.adjacency.toarray()
    d = g.degrees
    p = (n + 1) // 2
    low = _side_matrix(p - 1)
    low = np.hstack([np.zeros((len(low), 1)), low])  # vertex 0 fixed
    high = _side_matrix(n - p)
    W_ll, W_hh, W_lh = W[:p, :p], W[p:, p:], W[:p, p:]
    f_low = low @ d[:p] - np.einsum("ai,ij,aj->a", low, W_ll, low)
    f_high = high @ d[p:] - np.einsum("bi,ij,bj->b", high, W_hh, high)
    coupling = W_lh @ high.T

    best_value, best_code = -np.inf, None
    rows = max(1, (1 << 22) // len(high))
    for start in range(0, len(low), rows):
        block = low[start:start + rows]
        values = f_low[start:start + len(block), None] + f_high[None, :] - 2 * (block @ coupling)
        top = values.max()
        if top < best_value:
            continue
        a, b = np.nonzero(values == top)
        codes = ((start + a) << 1) | (b << p)
        code = int(codes.min())
        if top > best_value or code < best_code:
            best_value, best_code = top, code
    side = (best_code >> np.arange(n)) & 1
    value = cut_value(g, side)
    logger.debug("maxcut_exact n=%d value=%.6g", n, value)
    return side.astype(np.int64), value


def _climb_cut(g: Graph, side: np.ndarray) -> np.ndarray:
    adj = g.adjacency
    gains = flip_gains(g, side)
    while True:
        i = int(np.argmax(gains)) if len(gains) else 0
        if len(gains) == 0 or gains[i] <= IMPROVEMENT_EPS:
            return side
        start, end = adj.indptr[i], adj.indptr[i + 1]
        nbrs, w = adj.indices[start:end], adj.data[start:end]
        # edges to i's old side become cut, edges to its new side stop being cut
        same = side[nbrs] == side[i]
        gains[nbrs] += np.where(same, -2 * w, 2 * w)
        side[i] ^= 1
        gains[i] = -gains[i]


def maxcut_local_search(g, restarts: int, rng_seed: int) -> Tuple[np.ndarray, float]:
    """Best over restarts of best-improvement single-flip hill climbing"""
    g = as_graph(g)
    if restarts < 1:
        raise DomainError("restarts must be at least 1")
    best_side, best_value = np.zeros(g.n, dtype=np.int64), -np.inf
    for r in range(restarts):
        rng = make_rng(derive_seed(rng_seed, r))
        side = _climb_cut(g, rng.integers(0, 2, g.n).astype(np.int64))
        value = cut_value(g, side)
        logger.debug("maxcut restart %d value=%.6g", r, value)
        if value > best_value:
            best_side, best_value = side.copy(), value
    return best_side, float(max(best_value, 0.0))


# Correlation clustering
@lru_cache(maxsize=None)
def labeling_count(n: int, k: int) -> int:
    """Number of restricted-growth labelings of n vertices with labels < k"""
    if n == 0:
        return 1
    # stirling[j] = partitions of the first i vertices into exactly j blocks
    stirling = [1] + [0] * k
    for _ in range(n):
        nxt = [0] * (k + 1)
        for j in range(1, k + 1):
            nxt[j] = j * stirling[j] + stirling[j - 1]
        stirling = nxt
    return sum(stirling)


def restricted_growth_labelings(n: int, k: int) -> np.ndarray:
    """All labelings whose labels first appear in increasing order, lexicographically sorted"""
    if n == 0:
        return np.zeros((1, 0), dtype=np.int64)
    labels = np.zeros((1, 1), dtype=np.int64)
    top = np.zeros(1, dtype=np.int64)
    for _ in range(1, n):
        options = np.minimum(top + 1, k - 1) + 1
        parent = np.repeat(np.arange(len(labels)), options)
        offsets = np.repeat(np.cumsum(options) - options, options)
        new = np.arange(len(parent)) - offsets
        labels = np.hstack([labels[parent], new[:, None]])
        top = np.maximum(top[parent], new)
    return labels


def check_labeling_limit(n: int, k: int, limit: Optional[int] = None) -> None:
    limit = settings.cc_partition_limit if limit is None else limit
    count = labeling_count(n, min(k, n) if n else k)
    if count > limit:
        raise LimitExceededError(
            f"{count} labelings of {n} vertices into <= {k} clusters exceed the limit {limit}"
        )


def cc_exact(sg, k: int, limit: Optional[int] = None) -> Tuple[np.ndarray, float]:
    """Exhaustive MAX-AGREE over labelings with at most k clusters"""
    sg = as_graph(sg)
    if k < 1:
        raise DomainError("k must be at least 1")
    n = sg.n
    check_labeling_limit(n, k, limit)
    all_labels = restricted_growth_labelings(n, min(k, max(n, 1)))
    best_value, best_labels = -np.inf, None
    for start in range(0, len(all_labels), ENUMERATION_CHUNK * 16):
        block = all_labels[start:start + ENUMERATION_CHUNK * 16]
        inside = block[:, sg.u] == block[:, sg.v]
        values = sg.C_minus + inside.astype(float) @ sg.eta
        i = int(np.argmax(values))
        if values[i] > best_value:
            best_value, best_labels = values[i], block[i]
    value = cc_value(sg, best_labels)
    logger.debug("cc_exact n=%d k=%d value=%.6g", n, k, value)
    return best_labels.astype(np.int64), value


def _climb_clustering(sg: SignedGraph, labels: np.ndarray, k: int) -> np.ndarray:
    adj = sg.adjacency
    onehot = np.zeros((sg.n, k))
    onehot[np.arange(sg.n), labels] = 1.0
    pull = adj @ onehot
    while True:
        gains = pull - pull[np.arange(sg.n), labels][:, None]
        flat = int(np.argmax(gains)) if gains.size else 0
        if gains.size == 0 or gains.flat[flat] <= IMPROVEMENT_EPS:
            return labels
        i, target = divmod(flat, k)
        start, end = adj.indptr[i], adj.indptr[i + 1]
        nbrs, eta = adj.indices[start:end], adj.data[start:end]
        pull[nbrs, labels[i]] -= eta
        pull[nbrs, target] += eta
        labels[i] = target


def cc_local_search(sg, k: int, restarts: int, rng_seed: int) -> Tuple[np.ndarray, float]:
    """Best over restarts of best-improvement single-vertex relabelling"""
    sg = as_graph(sg)
    if k < 1 or restarts < 1:
        raise DomainError("k and restarts must be at least 1")
    best_labels, best_value = np.zeros(sg.n, dtype=np.int64), -np.inf
    for r in range(restarts):
        rng = make_rng(derive_seed(rng_seed, r))
        labels = _climb_clustering(sg, rng.integers(0, k, sg.n).astype(np.int64), k)
        value = cc_value(sg, labels)
        logger.debug("cc restart %d value=%.6g", r, value)
        if value > best_value:
            best_labels, best_value = labels.copy(), value
    if sg.n == 0:
        best_value = 0.0
    return best_labels, float(best_value)


def k_restriction_check(sg, epsilon: float, limit: Optional[int] = None) -> Tuple[float, float, float]:
    """Optimum over all clusterings, optimum over ceil(1/eps) clusters, and their ratio"""
    sg = as_graph(sg)
    if not 0 < epsilon <= 1:
        raise DomainError(f"epsilon must lie in (0, 1], got {epsilon}")
    k = math.ceil(1 / epsilon - 1e-12)
    _, opt = cc_exact(sg, max(sg.n, 1), limit)
    _, opt_k = cc_exact(sg, k, limit)
    ratio = 1.0 if opt <= 0 else opt_k / opt
    return opt, opt_k, ratio


def solution_record(assignment, value: float, solver: str, seed: Optional[int] = None) -> SolutionRecord:
    return SolutionRecord(
        assignment=[int(a) for a in assignment], value=float(value), solver=solver, seed=seed
    )
