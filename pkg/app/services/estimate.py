"""
LP-based estimation of the MaxCut / MAX-AGREE value from a small seed set
"""
import logging
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.errors import DomainError, InputValidationError, LimitExceededError
from app.models import EstimateMode, EstimateResult, Problem
from app.services.common import derive_seed, log, make_rng
from app.services.graph import Graph, SignedGraph, as_graph
from app.services.lp import build_cc_lp, build_maxcut_lp, solve_or_raise
from app.services.sampling import CoresetGraph
from app.services.solvers import check_labeling_limit, restricted_growth_labelings

logger = logging.getLogger(__name__)

GAMMA_CONSTANT = 16.0
CONDITION_CONSTANT = 8.0


@dataclass(frozen=True, eq=False)
class SeedSet:
    ids: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        if len(np.unique(self.ids)) != len(self.ids):
            raise InputValidationError("seed ids must be distinct")
        if len(self.ids) and np.any(self.gamma[self.ids] <= 0):
            raise InputValidationError("seed contains a vertex with zero sampling probability")

    def __len__(self) -> int:
        return len(self.ids)


def _gamma_vector(gamma, n: int) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float).reshape(-1)
    if len(gamma) != n:
        raise InputValidationError(f"gamma has {len(gamma)} entries, graph has {n} vertices")
    if np.any(gamma < 0) or np.any(gamma > 1):
        raise DomainError("gamma entries must lie in [0, 1]")
    return gamma


def draw_seed(gamma, rng_seed: int) -> SeedSet:
    """Include each vertex independently with probability gamma_i"""
    gamma = _gamma_vector(gamma, len(np.asarray(gamma).reshape(-1)))
    rng = make_rng(rng_seed)
    ids = np.flatnonzero(rng.random(len(gamma)) < gamma)
    return SeedSet(ids=ids, gamma=gamma)


def _scaled_indicator(n: int, members, gamma: np.ndarray) -> np.ndarray:
    members = np.asarray(list(members), dtype=np.int64)
    if len(members) and np.any(gamma[members] <= 0):
        raise InputValidationError("partition contains a vertex with zero sampling probability")
    out = np.zeros(n)
    out[members] = 1.0 / gamma[members]
    return out


def rho_from_partition(view, A, gamma) -> np.ndarray:
    """rho_i = sum over neighbours j in A of w_ij / gamma_j

    For a signed view, A is a sequence of k parts and the result is n x k.
    """
    view = as_graph(view)
    gamma = _gamma_vector(gamma, view.n)
    if isinstance(view, SignedGraph):
        columns = [_scaled_indicator(view.n, part, gamma) for part in A]
        B = np.stack(columns, axis=1) if columns else np.zeros((view.n, 0))
        return np.asarray(view.adjacency @ B)
    return view.adjacency @ _scaled_indicator(view.n, A, gamma)


def _maxcut_partitions(s: int, mode: EstimateMode, samples: int, rng_seed: int) -> Iterator[int]:
    """Bitmasks over the seed with bit 0 (the first seed vertex) always in A"""
    if s == 0:
        yield 0
        return
    if mode == EstimateMode.EXHAUSTIVE:
        for rest in range(1 << (s - 1)):
            yield 1 | (rest << 1)
        return
    rng = make_rng(derive_seed(rng_seed, 1))
    for _ in range(samples):
        rest = rng.integers(0, 2, s - 1) if s > 1 else np.zeros(0, dtype=np.int64)
        yield 1 | sum(int(b) << (j + 1) for j, b in enumerate(rest))


def est_maxcut(
    view,
    gamma,
    rng_seed: int,
    mode: EstimateMode = EstimateMode.EXHAUSTIVE,
    samples: int = 64,
    seed: Optional[SeedSet] = None,
) -> EstimateResult:
    """Max over seed partitions (A, S minus A) of the MaxCut LP built from their rho"""
    view = as_graph(view)
    if not isinstance(view, Graph):
        raise InputValidationError("est_maxcut needs an unsigned graph")
    mode = EstimateMode(mode)
    seed = seed if seed is not None else draw_seed(_gamma_vector(gamma, view.n), rng_seed)
    s = len(seed)
    if mode == EstimateMode.EXHAUSTIVE and s > settings.exhaustive_seed_limit:
        raise LimitExceededError(
            f"seed of size {s} exceeds the exhaustive limit {settings.exhaustive_seed_limit}"
        )
    logger.debug("est_maxcut seed size %d (%s, seed=%d)", s, mode.value, rng_seed)

    best_value, best_mask, evaluated = -np.inf, 0, 0
    for mask in _maxcut_partitions(s, mode, samples, rng_seed):
        in_a = [(mask >> j) & 1 == 1 for j in range(s)]
        A = seed.ids[np.array(in_a, dtype=bool)] if s else seed.ids
        rho = rho_from_partition(view, A, seed.gamma)
        value = solve_or_raise(build_maxcut_lp(view, rho).model).objective
        evaluated += 1
        if value > best_value or (value == best_value and mask < best_mask):
            best_value, best_mask = value, mask
    labels = [0 if (best_mask >> j) & 1 else 1 for j in range(s)]
    return EstimateResult(
        value=float(best_value),
        best_partition=labels,
        seed_ids=[int(i) for i in seed.ids],
        partitions_evaluated=evaluated,
        mode=mode,
        rng_seed=rng_seed,
        problem=Problem.MAXCUT,
    )


def _cc_labelings(s: int, k: int, mode: EstimateMode, samples: int, rng_seed: int) -> Iterator[np.ndarray]:
    if mode == EstimateMode.EXHAUSTIVE:
        yield from restricted_growth_labelings(s, min(k, max(s, 1)))
        return
    rng = make_rng(derive_seed(rng_seed, 1))
    for _ in range(samples):
        labels = rng.integers(0, k, s)
        if s:
            labels[0] = 0
        yield labels


def est_cc(
    view,
    gamma,
    k: int,
    rng_seed: int,
    mode: EstimateMode = EstimateMode.EXHAUSTIVE,
    samples: int = 64,
    seed: Optional[SeedSet] = None,
) -> EstimateResult:
    """Max over k-labelings of the seed of the correlation-clustering LP"""
    view = as_graph(view)
    if not isinstance(view, SignedGraph):
        raise InputValidationError("est_cc needs a signed graph")
    if k < 1:
        raise DomainError("k must be at least 1")
    mode = EstimateMode(mode)
    seed = seed if seed is not None else draw_seed(_gamma_vector(gamma, view.n), rng_seed)
    s = len(seed)
    if mode == EstimateMode.EXHAUSTIVE:
        check_labeling_limit(s, k)
    logger.debug("est_cc seed size %d k=%d (%s, seed=%d)", s, k, mode.value, rng_seed)

    best_value, best_labels, evaluated = -np.inf, None, 0
    for labels in _cc_labelings(s, k, mode, samples, rng_seed):
        parts = [seed.ids[labels == l] for l in range(k)]
        rho = rho_from_partition(view, parts, seed.gamma)
        value = solve_or_raise(build_cc_lp(view, k, rho).model).objective
        evaluated += 1
        key = tuple(int(x) for x in labels)
        if value > best_value or (value == best_value and key < best_labels):
            best_value, best_labels = value, key
    return EstimateResult(
        value=float(best_value),
        best_partition=list(best_labels),
        seed_ids=[int(i) for i in seed.ids],
        partitions_evaluated=evaluated,
        mode=mode,
        rng_seed=rng_seed,
        problem=Problem.CC,
    )


# Sampling probabilities
def gamma_original(n: int, epsilon: float, delta: float) -> np.ndarray:
    """Uniform min(1, 16 log n / (eps^2 Delta))"""
    if delta <= 0:
        raise InputValidationError("delta must be positive")
    if n < 2:
        return np.ones(max(n, 0))
    return np.full(n, min(1.0, GAMMA_CONSTANT * log(n) / (epsilon ** 2 * delta)))


def gamma_coreset(coreset: CoresetGraph, epsilon: float, delta: float, n: int) -> np.ndarray:
    """min(1, 16 log n / (eps^2 Delta p_i)) for every core-set vertex"""
    p = np.asarray(coreset.probabilities, dtype=float)
    if np.any(p <= 0):
        raise InputValidationError("core-set probabilities must be positive")
    if delta <= 0:
        raise InputValidationError("delta must be positive")
    base = GAMMA_CONSTANT * log(max(n, 2)) / (epsilon ** 2 * delta)
    return np.minimum(1.0, base / p)


def check_condition(view, gamma, epsilon: float, k: int = 1, n: Optional[int] = None) -> Tuple[bool, Optional[Tuple[int, int]]]:
    """w_ij <= W eps^2 / (8 log n) * gamma_i gamma_j / (sum gamma) / k^2 on every edge

    Returns (holds, first violating edge or None).
    """
    view = as_graph(view)
    gamma = _gamma_vector(gamma, view.n)
    if view.m == 0:
        return True, None
    n = view.n if n is None else n
    total = gamma.sum()
    if total <= 0:
        return False, (int(view.u[0]), int(view.v[0]))
    W = view.total_weight
    bound = W * epsilon ** 2 / (CONDITION_CONSTANT * log(max(n, 2)) * k ** 2)
    limits = bound * gamma[view.u] * gamma[view.v] / total
    bad = np.flatnonzero(view.abs_weights > limits)
    if len(bad):
        i = int(bad[0])
        return False, (int(view.u[i]), int(view.v[i]))
    return True, None
