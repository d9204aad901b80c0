from pathlib import Path

import numpy as np
import pytest

from app.services.graph import Graph, SignedGraph

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def k4() -> Graph:
    return Graph.from_edges(4, [(a, b) for a in range(4) for b in range(a + 1, 4)])


@pytest.fixture
def triangle() -> Graph:
    return Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def path3() -> Graph:
    return Graph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)])


@pytest.fixture
def signed_triangle() -> SignedGraph:
    """Two agreements and one disagreement: no clustering satisfies all three"""
    return SignedGraph.from_edges(3, [(0, 1, 1.0, 0.0), (1, 2, 1.0, 0.0), (0, 2, 0.0, 1.0)])


@pytest.fixture
def planted6() -> SignedGraph:
    edges = []
    for a in range(6):
        for b in range(a + 1, 6):
            same = (a < 3) == (b < 3)
            edges.append((a, b, 1.0 if same else 0.0, 0.0 if same else 1.0))
    return SignedGraph.from_edges(6, edges)


def random_graph(seed: int, n: int, density: float = 0.5, weighted: bool = False) -> Graph:
    rng = np.random.default_rng(seed)
    iu, iv = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < density
    w = rng.uniform(0.1, 1.0, int(keep.sum())) if weighted else np.ones(int(keep.sum()))
    return Graph.from_edges(n, u=iu[keep], v=iv[keep], w=w)


def random_signed(seed: int, n: int, density: float = 0.6) -> SignedGraph:
    rng = np.random.default_rng(seed)
    iu, iv = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < density
    count = int(keep.sum())
    magnitude = rng.uniform(0.1, 1.0, count)
    positive = rng.random(count) < 0.5
    return SignedGraph.from_edges(
        n, u=iu[keep], v=iv[keep],
        c_plus=np.where(positive, magnitude, 0.0), c_minus=np.where(positive, 0.0, magnitude),
    )
