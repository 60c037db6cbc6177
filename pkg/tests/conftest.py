import numpy as np
import pytest

from gripsim.graph import Graph, from_edges


@pytest.fixture
def chain_graph():
    """0 - 1 - 2 with edges in both directions."""
    return from_edges([0, 1, 1, 2], [1, 0, 2, 1], num_vertices=3)


@pytest.fixture
def star_graph():
    """Hub 0 with 50 leaves, edges hub->leaf and leaf->hub."""
    leaves = np.arange(1, 51)
    src = np.concatenate([np.zeros(50, dtype=np.int64), leaves])
    dst = np.concatenate([leaves, np.zeros(50, dtype=np.int64)])
    return from_edges(src, dst, num_vertices=51)


@pytest.fixture
def isolated_graph():
    """Five vertices, no edges."""
    return Graph(5, 0, np.zeros(6, dtype=np.int64), np.zeros(0, dtype=np.int64))
