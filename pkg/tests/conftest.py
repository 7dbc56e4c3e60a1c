import numpy as np
import pytest

from qgraphlab import build_complete_graph, find_levels


@pytest.fixture(scope="session")
def graph_v4():
    return build_complete_graph(4, seed=7)


@pytest.fixture(scope="session")
def graph_v6():
    return build_complete_graph(6, seed=21)


@pytest.fixture(scope="session")
def spectrum_v6(graph_v6):
    return find_levels(graph_v6, 10.0, 40.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
