import numpy as np
import pytest

from hogdiff.graph_core import Graph


def er_graph(n, p, rng, n_max=None):
    iu = np.triu_indices(n, 1)
    keep = rng.random(len(iu[0])) < p
    edges = [(int(i), int(j)) for i, j, k in zip(*iu, keep) if k]
    return Graph.from_edges(n, edges, n_max=n_max)


def complete(n):
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def cycle(n):
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def path(n):
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
