import numpy as np
import pytest

import floqlat as fl


@pytest.fixture(scope="session")
def z1():
    return fl.hypercubic(1)


@pytest.fixture(scope="session")
def z2():
    return fl.hypercubic(2)


@pytest.fixture(scope="session")
def hex_graph():
    return fl.build_periodic_graph(
        {
            "dimension": 2,
            "vertices": ["a", "b"],
            "edges": [["a", "b", [0, 0]], ["b", "a", [1, 0]], ["b", "a", [0, 1]]],
        }
    )


@pytest.fixture(scope="session")
def lieb_graph():
    # corner vertex plus two edge centers; its middle Laplacian sheet is flat
    return fl.build_periodic_graph(
        {
            "dimension": 2,
            "vertices": [
                {"label": "c", "position": [0.0, 0.0]},
                {"label": "x", "position": [0.5, 0.0]},
                {"label": "y", "position": [0.0, 0.5]},
            ],
            "edges": [
                ["c", "x", [0, 0]],
                ["x", "c", [1, 0]],
                ["c", "y", [0, 0]],
                ["y", "c", [0, 1]],
            ],
        }
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
