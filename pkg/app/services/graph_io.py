"""
Text formats for graphs, streams and core-sets, plus JSON solution files

Edge list:  header "graph <n>" or "signed <n>", then "u v w" or "u v c+ c-" per line.
Stream:     optional header "stream <n>", then "I u v w" / "D u v w" (signed: "I u v c+ c-").
Blank lines and lines starting with '#' are ignored.
"""
import json
import logging
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from app.errors import GraphFormatError, InputValidationError
from app.models import CoresetMetadata, EstimateResult, SolutionRecord, StreamReport
from app.services.graph import AnyGraph, EdgeStream, Graph, SignedGraph
from app.services.sampling import CoresetGraph

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
SIDECAR_SUFFIX = ".meta.json"


def _lines(path: PathLike) -> List[Tuple[int, List[str]]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise GraphFormatError(f"cannot read {path}: {e}")
    rows = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        rows.append((line_no, stripped.split()))
    return rows


def _int(token: str, line_no: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise GraphFormatError(f"expected an integer, got {token!r}", line_no)


def _float(token: str, line_no: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise GraphFormatError(f"expected a number, got {token!r}", line_no)
    if not np.isfinite(value):
        raise GraphFormatError(f"non-finite weight {token!r}", line_no)
    return value


def _fmt(x: float) -> str:
    return repr(float(x))


def _check_pair(u: int, v: int, n: int, line_no: int, seen: set) -> None:
    if not (0 <= u < n and 0 <= v < n):
        raise GraphFormatError(f"vertex out of range 0..{n - 1}", line_no)
    if u == v:
        raise GraphFormatError(f"self-loop at vertex {u}", line_no)
    key = (min(u, v), max(u, v))
    if key in seen:
        raise GraphFormatError(f"duplicate edge {key}", line_no)
    seen.add(key)


def parse_edge_list(rows: List[Tuple[int, List[str]]], max_weight: float = 1.0) -> AnyGraph:
    if not rows:
        raise GraphFormatError("missing header line", 1)
    header_no, header = rows[0]
    if len(header) != 2 or header[0] not in ("graph", "signed"):
        raise GraphFormatError("header must be 'graph <n>' or 'signed <n>'", header_no)
    kind, n = header[0], _int(header[1], header_no)
    if n < 0:
        raise GraphFormatError("vertex count must be nonnegative", header_no)
    width = 3 if kind == "graph" else 4
    seen: set = set()
    edges = []
    for line_no, fields in rows[1:]:
        if len(fields) != width:
            raise GraphFormatError(f"expected {width} fields, got {len(fields)}", line_no)
        u, v = _int(fields[0], line_no), _int(fields[1], line_no)
        _check_pair(u, v, n, line_no, seen)
        weights = [_float(f, line_no) for f in fields[2:]]
        if any(w < 0 for w in weights):
            raise GraphFormatError("negative weight", line_no)
        if kind == "signed":
            c_plus, c_minus = weights
            if c_plus > 0 and c_minus > 0:
                raise GraphFormatError("edge has both c+ and c- nonzero", line_no)
            if c_plus > max_weight or c_minus > max_weight:
                raise GraphFormatError(f"signed weight above {max_weight}", line_no)
        edges.append((u, v, *weights))
    if kind == "graph":
        return Graph.from_edges(n, edges)
    return SignedGraph.from_edges(n, edges, max_weight=max_weight)


def read_edge_list(path: PathLike) -> AnyGraph:
    g = parse_edge_list(_lines(path))
    logger.debug("read %r from %s", g, path)
    return g


def format_edge_list(g: AnyGraph) -> str:
    if isinstance(g, SignedGraph):
        lines = [f"signed {g.n}"]
        lines += [f"{u} {v} {_fmt(p)} {_fmt(q)}" for u, v, p, q in g.edges]
    else:
        lines = [f"graph {g.n}"]
        lines += [f"{u} {v} {_fmt(w)}" for u, v, w in g.edges]
    return "\n".join(lines) + "\n"


def write_edge_list(g: AnyGraph, path: PathLike) -> None:
    _write(path, format_edge_list(g))


def _write(path: PathLike, text: str) -> None:
    try:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise GraphFormatError(f"cannot write {path}: {e}")


# Streams
def read_stream(path: PathLike, n: Optional[int] = None) -> EdgeStream:
    rows = _lines(path)
    if rows and rows[0][1][0] == "stream":
        line_no, header = rows[0]
        if len(header) != 2:
            raise GraphFormatError("header must be 'stream <n>'", line_no)
        header_n = _int(header[1], line_no)
        if n is not None and n != header_n:
            raise GraphFormatError(f"header says {header_n} vertices, {n} were given", line_no)
        n = header_n
        rows = rows[1:]
    if n is None:
        raise GraphFormatError("stream file has no 'stream <n>' header and no n was given", 1)
    widths = {len(fields) for _, fields in rows}
    if len(widths) > 1:
        raise GraphFormatError("stream mixes signed and unsigned events", rows[0][0])
    signed = widths == {5}
    sign, us, vs, ws, cs = [], [], [], [], []
    for line_no, fields in rows:
        if len(fields) not in (4, 5):
            raise GraphFormatError(f"expected 4 or 5 fields, got {len(fields)}", line_no)
        op = fields[0]
        if op not in ("I", "D"):
            raise GraphFormatError(f"unknown op {op!r}", line_no)
        u, v = _int(fields[1], line_no), _int(fields[2], line_no)
        if not (0 <= u < n and 0 <= v < n) or u == v:
            raise GraphFormatError(f"bad endpoints ({u}, {v})", line_no)
        sign.append(1 if op == "I" else -1)
        us.append(u)
        vs.append(v)
        ws.append(_float(fields[3], line_no))
        if signed:
            cs.append(_float(fields[4], line_no))
    return EdgeStream(
        n=n,
        sign=np.array(sign, dtype=np.int64),
        u=np.array(us, dtype=np.int64),
        v=np.array(vs, dtype=np.int64),
        w=np.array(ws, dtype=np.float64),
        c_minus=np.array(cs, dtype=np.float64) if signed else None,
    )


def write_stream(stream: EdgeStream, path: PathLike) -> None:
    lines = [f"stream {stream.n}"]
    for event in stream:
        tail = f" {_fmt(event.c_minus)}" if event.signed else ""
        lines.append(f"{event.op.value} {event.u} {event.v} {_fmt(event.w)}{tail}")
    _write(path, "\n".join(lines) + "\n")


# Core-sets: edge list plus JSON sidecar
def sidecar_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + SIDECAR_SUFFIX)


def write_coreset(coreset: CoresetGraph, path: PathLike) -> None:
    write_edge_list(coreset.graph, path)
    _write(sidecar_path(path), coreset.metadata().model_dump_json(indent=2))


def read_coreset(path: PathLike) -> CoresetGraph:
    graph = parse_edge_list(_lines(path), max_weight=np.inf)
    meta_path = sidecar_path(path)
    try:
        meta = CoresetMetadata.model_validate_json(meta_path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as e:
        raise GraphFormatError(f"cannot read sidecar {meta_path}: {e}")
    except ValidationError as e:
        raise GraphFormatError(f"invalid sidecar {meta_path}: {e.errors()[0]['msg']}")
    if len(meta.original_ids) != graph.n:
        raise GraphFormatError(
            f"sidecar lists {len(meta.original_ids)} vertices, edge list has {graph.n}"
        )
    return CoresetGraph(
        graph=graph,
        original_ids=np.array(meta.original_ids, dtype=np.int64),
        probabilities=np.array(meta.probabilities, dtype=float),
        delta=meta.delta,
        n_original=meta.n_original,
        problem=meta.problem,
        epsilon=meta.epsilon,
        rng_seed=meta.rng_seed,
        edge_sampled=meta.edge_sampled,
        keep_rule=meta.keep_rule,
    )


def read_graph_or_coreset(path: PathLike) -> Union[AnyGraph, CoresetGraph]:
    """A core-set when a sidecar sits next to the file, a plain graph otherwise"""
    if sidecar_path(path).exists():
        return read_coreset(path)
    return read_edge_list(path)


# JSON results
def write_solution(record: SolutionRecord, path: PathLike) -> None:
    _write(path, record.model_dump_json(indent=2))


def read_solution(path: PathLike) -> SolutionRecord:
    try:
        return SolutionRecord.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as e:
        raise GraphFormatError(f"cannot read {path}: {e}")
    except ValidationError as e:
        raise InputValidationError(f"invalid solution file {path}: {e.errors()[0]['msg']}")


def write_estimate(result: EstimateResult, path: PathLike) -> None:
    _write(path, result.model_dump_json(indent=2))


def write_stream_report(report: StreamReport, path: PathLike) -> None:
    _write(path, report.model_dump_json(indent=2))
