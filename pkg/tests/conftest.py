import numpy as np
import pytest

from semicut.graph_core import Graph, Partition


def complete_graph(n):
    iu = np.triu_indices(n, 1)
    return Graph(n, np.stack(iu, axis=1))


def k22():
    return Graph(4, [(0, 2), (0, 3), (1, 2), (1, 3)])


def random_graph(n, p, rng):
    iu = np.triu_indices(n, 1)
    keep = rng.random(iu[0].size) < p
    return Graph(n, np.stack([iu[0][keep], iu[1][keep]], axis=1))


def two_cliques(k):
    a = np.triu_indices(k, 1)
    e = np.concatenate([np.stack(a, 1), np.stack(a, 1) + k])
    return Graph(2 * k, e)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def k22_graph():
    return k22()


@pytest.fixture
def k22_planted():
    return Partition(np.array([0, 0, 1, 1], np.int8))
