from __future__ import annotations

import numpy as np
import pytest

from hjgraph.graph_core import build_graph, complete_graph, path_graph


@pytest.fixture
def two_node():
    return build_graph(2, [(0, 1, 1.0)])


@pytest.fixture
def k3():
    return complete_graph(3)


@pytest.fixture
def path4():
    return path_graph(4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
