import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from app.errors import DomainError, InputValidationError, LimitExceededError
from app.services.graph import Graph, SignedGraph, gen_planted_cc, planted_partition
from app.services.graph_io import read_edge_list
from app.services.solvers import (
    cc_exact,
    cc_local_search,
    cc_trivial_bound,
    cc_value,
    cc_value_definition,
    check_labeling_limit,
    cut_value,
    is_local_optimum_clustering,
    is_local_optimum_cut,
    k_restriction_check,
    labeling_count,
    maxcut_exact,
    maxcut_local_search,
    restricted_growth_labelings,
    solution_record,
)

from conftest import random_graph, random_signed


def _fixtures(fixtures_dir, problem):
    expected = json.loads((fixtures_dir / "expected.json").read_text())
    return [
        (read_edge_list(fixtures_dir / name), entry)
        for name, entry in sorted(expected.items())
        if entry["problem"] == problem
    ]


def _brute_force_cut(g):
    best = 0.0
    for mask in range(1 << g.n):
        best = max(best, cut_value(g, [(mask >> i) & 1 for i in range(g.n)]))
    return best


def test_cut_value_examples(triangle):
    assert cut_value(triangle, [0, 0, 0]) == 0.0
    assert cut_value(triangle, [1, 0, 0]) == 2.0
    assert cut_value(triangle, [0, 1, 1]) == 2.0


def test_cut_value_checks_length(triangle):
    with pytest.raises(InputValidationError):
        cut_value(triangle, [0, 1])


def test_maxcut_exact_examples(k4, path3):
    assert maxcut_exact(k4)[1] == 4.0
    side, value = maxcut_exact(path3)
    assert value == 2.0
    assert side[0] == 0
    assert cut_value(path3, side) == value


def test_maxcut_exact_on_five_cycle():
    c5 = Graph.from_edges(5, [(i, (i + 1) % 5) for i in range(5)])
    assert maxcut_exact(c5)[1] == 4.0


def test_maxcut_exact_tie_break_is_smallest_mask(k4):
    side, _ = maxcut_exact(k4)
    # the smallest bitmask with vertex 0 on side 0 cutting 4 edges puts vertices 1 and 2 on side 1
    assert list(side) == [0, 1, 1, 0]


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(1, 9), weighted=st.booleans())
def test_maxcut_exact_matches_brute_force(seed, n, weighted):
    g = random_graph(seed, n, 0.5, weighted)
    side, value = maxcut_exact(g)
    assert value == pytest.approx(_brute_force_cut(g))
    assert cut_value(g, side) == value


def test_maxcut_exact_limit():
    g = Graph.from_edges(30, [(0, 1)])
    with pytest.raises(LimitExceededError):
        maxcut_exact(g)
    assert maxcut_exact(Graph.from_edges(5, [(0, 1)]), limit=5)[1] == 1.0


def test_local_search_matches_exact_on_fixtures(fixtures_dir):
    for g, entry in _fixtures(fixtures_dir, "maxcut"):
        side, value = maxcut_local_search(g, restarts=50, rng_seed=0)
        assert value == entry["value"]
        assert is_local_optimum_cut(g, side)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(2, 12))
def test_local_search_is_locally_optimal_and_bounded(seed, n):
    g = random_graph(seed, n, 0.5, weighted=True)
    side, value = maxcut_local_search(g, restarts=3, rng_seed=seed)
    assert is_local_optimum_cut(g, side)
    assert value == pytest.approx(cut_value(g, side))
    assert value <= maxcut_exact(g)[1] + 1e-9
    # a 1-flip local optimum cuts at least half the weight
    assert value >= g.total_weight / 2 - 1e-9


def test_local_search_is_deterministic():
    g = random_graph(3, 40, 0.3)
    a = maxcut_local_search(g, 5, 17)
    b = maxcut_local_search(g, 5, 17)
    assert np.array_equal(a[0], b[0]) and a[1] == b[1]


def test_local_search_needs_a_restart(k4):
    with pytest.raises(DomainError):
        maxcut_local_search(k4, 0, 0)


def test_cc_value_examples(signed_triangle):
    positive = SignedGraph.from_edges(3, [(0, 1, 1.0, 0.0), (1, 2, 1.0, 0.0), (0, 2, 1.0, 0.0)])
    negative = SignedGraph.from_edges(3, [(0, 1, 0.0, 1.0), (1, 2, 0.0, 1.0), (0, 2, 0.0, 1.0)])
    assert cc_value(positive, [0, 0, 0]) == positive.C_plus
    assert cc_value(negative, [0, 1, 2]) == negative.C_minus
    for labels in ([0, 0, 1], [1, 0, 0], [0, 1, 1]):
        assert cc_value(signed_triangle, labels) <= 2.0
    assert cc_value(signed_triangle, [0, 0, 0]) == 2.0
    assert cc_value(signed_triangle, [0, 0, 1]) == 2.0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(1, 10))
def test_simplified_and_definitional_objectives_agree(seed, n):
    sg = random_signed(seed, n)
    labels = np.random.default_rng(seed).integers(0, 3, n)
    assert cc_value(sg, labels) == pytest.approx(cc_value_definition(sg, labels))


def test_cc_exact_examples(signed_triangle, planted6):
    positive = SignedGraph.from_edges(3, [(0, 1, 1.0, 0.0), (1, 2, 1.0, 0.0)])
    assert cc_exact(positive, 1)[1] == positive.C_plus
    assert cc_exact(signed_triangle, 2)[1] == 2.0
    labels, value = cc_exact(planted6, 2)
    assert value == 15.0
    assert list(labels) == [0, 0, 0, 1, 1, 1]


def test_cc_exact_recovers_planted_score():
    sg = gen_planted_cc(7, 3, 0.0, rng_seed=12)
    truth = planted_partition(7, 3, 12)
    assert cc_exact(sg, 3)[1] == cc_value(sg, truth) == sg.m


def test_labeling_counts():
    assert labeling_count(0, 3) == 1
    assert labeling_count(4, 4) == 15
    assert labeling_count(5, 2) == 16
    assert labeling_count(10, 1) == 1
    for n, k in [(1, 1), (4, 2), (5, 3), (6, 6)]:
        rows = restricted_growth_labelings(n, k)
        assert len(rows) == labeling_count(n, k)
        assert len({tuple(r) for r in rows}) == len(rows)
        assert rows.max() < k
        assert [tuple(r) for r in rows] == sorted(tuple(r) for r in rows)


def test_labeling_limit():
    with pytest.raises(LimitExceededError):
        check_labeling_limit(20, 5)
    check_labeling_limit(8, 8)


def test_cc_exact_rejects_zero_clusters(signed_triangle):
    with pytest.raises(DomainError):
        cc_exact(signed_triangle, 0)


def test_cc_local_search_matches_exact_on_fixtures(fixtures_dir):
    for g, entry in _fixtures(fixtures_dir, "cc"):
        labels, value = cc_local_search(g, entry["k"], restarts=50, rng_seed=1)
        assert value == entry["value"]
        assert is_local_optimum_clustering(g, labels, entry["k"])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(2, 7), k=st.integers(1, 3))
def test_cc_local_search_is_locally_optimal_and_bounded(seed, n, k):
    sg = random_signed(seed, n)
    labels, value = cc_local_search(sg, k, 4, seed)
    assert is_local_optimum_clustering(sg, labels, k)
    assert value == pytest.approx(cc_value(sg, labels))
    assert value <= cc_exact(sg, k)[1] + 1e-9


def test_cc_local_search_is_deterministic():
    sg = gen_planted_cc(30, 3, 0.2, 5)
    a = cc_local_search(sg, 3, 4, 9)
    b = cc_local_search(sg, 3, 4, 9)
    assert np.array_equal(a[0], b[0]) and a[1] == b[1]


def test_k_restriction_examples():
    positive = SignedGraph.from_edges(3, [(0, 1, 1.0, 0.0), (1, 2, 1.0, 0.0)])
    assert k_restriction_check(positive, 1.0)[2] == 1.0
    sg = random_signed(5, 4)
    assert k_restriction_check(sg, 0.2)[2] == 1.0


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(2, 8))
def test_three_clusters_keep_two_thirds(seed, n):
    sg = random_signed(seed, n)
    opt, opt_k, ratio = k_restriction_check(sg, 1 / 3)
    assert ratio >= 2 / 3 - 1e-9
    assert opt >= cc_trivial_bound(sg) - 1e-9
    assert opt_k <= opt + 1e-9


def test_trivial_bound(signed_triangle):
    assert cc_trivial_bound(signed_triangle) == 2.0


def test_solution_record_uses_python_types():
    record = solution_record(np.array([0, 1], dtype=np.int64), np.float64(1.0), "exact", 3)
    assert record.assignment == [0, 1]
    assert type(record.assignment[0]) is int
    assert record.seed == 3
