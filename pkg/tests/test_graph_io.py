import numpy as np
import pytest

from app.errors import GraphFormatError, InputValidationError
from app.models import StreamOrder
from app.services.graph import Graph, gen_planted_cc, gen_random_graph, to_stream
from app.services.graph_io import (
    read_coreset,
    read_edge_list,
    read_graph_or_coreset,
    read_solution,
    read_stream,
    sidecar_path,
    write_coreset,
    write_edge_list,
    write_solution,
    write_stream,
)
from app.services.sampling import CoresetGraph, build_coreset, importance_params
from app.services.solvers import solution_record


def test_fixture_k4_parses(fixtures_dir):
    g = read_edge_list(fixtures_dir / "k4.txt")
    assert isinstance(g, Graph)
    assert g.n == 4 and g.m == 6


def test_edge_list_file_keeps_weights_exactly(tmp_path):
    g = Graph.from_edges(3, [(0, 1, 0.1), (1, 2, 1 / 3)])
    path = tmp_path / "g.txt"
    write_edge_list(g, path)
    assert read_edge_list(path) == g


def test_signed_edge_list_file(tmp_path):
    sg = gen_planted_cc(8, 2, 0.2, rng_seed=1)
    path = tmp_path / "s.txt"
    write_edge_list(sg, path)
    assert read_edge_list(path) == sg


@pytest.mark.parametrize(
    "text, line_no",
    [
        ("graph 3\n0 1\n", 2),
        ("graph 3\n0 3 1.0\n", 2),
        ("graph 3\n0 0 1.0\n", 2),
        ("graph 3\n0 1 1.0\n\n1 0 1.0\n", 4),
        ("graph 3\n0 1 abc\n", 2),
        ("graph 3\n0 1 -1\n", 2),
        ("graph x\n", 1),
        ("tree 3\n", 1),
        ("signed 3\n0 1 0.5 0.5\n", 2),
        ("signed 3\n0 1 2.0 0\n", 2),
        ("# comment\ngraph 3\n0 1 nan\n", 3),
    ],
)
def test_malformed_edge_lists_report_line(tmp_path, text, line_no):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(GraphFormatError) as info:
        read_edge_list(path)
    assert info.value.line_no == line_no


def test_missing_file_is_a_format_error(tmp_path):
    with pytest.raises(GraphFormatError):
        read_edge_list(tmp_path / "missing.txt")


def test_empty_file_needs_a_header(tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("")
    with pytest.raises(GraphFormatError):
        read_edge_list(path)


@pytest.mark.parametrize("order", list(StreamOrder))
def test_stream_file(tmp_path, order):
    g = gen_random_graph(50, 0.5, rng_seed=5)
    stream = to_stream(g, order, 5)
    path = tmp_path / "s.stream"
    write_stream(stream, path)
    back = read_stream(path)
    assert back.n == 50
    assert np.array_equal(back.sign, stream.sign)
    assert np.array_equal(back.u, stream.u)
    assert np.array_equal(back.w, stream.w)


def test_headerless_stream_needs_n(tmp_path):
    path = tmp_path / "s.stream"
    path.write_text("I 0 1 1.0\nD 0 1 1.0\n")
    with pytest.raises(GraphFormatError):
        read_stream(path)
    stream = read_stream(path, n=2)
    assert list(stream.sign) == [1, -1]


@pytest.mark.parametrize(
    "text",
    [
        "stream 3\nX 0 1 1.0\n",
        "stream 3\nI 0 5 1.0\n",
        "stream 3\nI 0 1 1.0\nI 1 2 1.0 0.0\n",
        "stream 3\nI 0 1\n",
    ],
)
def test_malformed_streams(tmp_path, text):
    path = tmp_path / "bad.stream"
    path.write_text(text)
    with pytest.raises(GraphFormatError):
        read_stream(path)


def test_coreset_file_with_sidecar(tmp_path):
    g = gen_random_graph(200, 0.6, rng_seed=3)
    params = importance_params(g, 0.5, c_const=0.05)
    coreset = build_coreset(g, params, rng_seed=3)
    path = tmp_path / "core.txt"
    write_coreset(coreset, path)
    assert sidecar_path(path).exists()

    back = read_coreset(path)
    assert isinstance(back, CoresetGraph)
    assert back.graph == coreset.graph
    assert np.array_equal(back.original_ids, coreset.original_ids)
    assert np.array_equal(back.probabilities, coreset.probabilities)
    assert back.delta == coreset.delta
    assert back.edge_sampled == coreset.edge_sampled
    assert isinstance(read_graph_or_coreset(path), CoresetGraph)


def test_plain_graph_without_sidecar(tmp_path, k4):
    path = tmp_path / "k4.txt"
    write_edge_list(k4, path)
    assert read_graph_or_coreset(path) == k4


def test_sidecar_must_match_edge_list(tmp_path, k4):
    path = tmp_path / "core.txt"
    write_edge_list(k4, path)
    sidecar_path(path).write_text(
        '{"problem": "maxcut", "n_original": 10, "original_ids": [0, 1], '
        '"probabilities": [1.0, 1.0], "delta": 2.0}'
    )
    with pytest.raises(GraphFormatError):
        read_coreset(path)


def test_solution_file(tmp_path):
    record = solution_record(np.array([0, 1, 1, 0]), 4.0, "exact")
    path = tmp_path / "sol.json"
    write_solution(record, path)
    assert read_solution(path) == record


def test_invalid_solution_file(tmp_path):
    path = tmp_path / "sol.json"
    path.write_text('{"value": 1.0}')
    with pytest.raises(InputValidationError):
        read_solution(path)


def test_stream_header_must_agree_with_n(tmp_path):
    path = tmp_path / "s.stream"
    path.write_text("stream 3\nI 0 1 1.0\n")
    assert read_stream(path, n=3).n == 3
    with pytest.raises(GraphFormatError):
        read_stream(path, n=4)


def test_undecodable_files_are_format_errors(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_bytes(b"graph 3\n0 1 \xff\n")
    with pytest.raises(GraphFormatError):
        read_edge_list(path)
    with pytest.raises(GraphFormatError):
        read_stream(path, n=3)
    with pytest.raises(GraphFormatError):
        read_solution(path)
