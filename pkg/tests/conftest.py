import numpy as np
import pandas as pd
import pytest

from sdpnn.lifted import build_problem
from sdpnn.network import NetworkWeights


def random_instance(seed, n=None, d=None, c=None, m=None, gamma=0.1):
    """Small random (problem, weights) pair; sizes drawn from the seed when omitted."""
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(2, 9))
    d = d or int(rng.integers(1, 5))
    c = c or int(rng.integers(1, 4))
    m = m or int(rng.integers(1, 7))
    X = rng.standard_normal((n, d))
    Y = rng.standard_normal((n, c))
    w = NetworkWeights(rng.standard_normal((d, m)), rng.standard_normal((c, m)))
    return build_problem(X, Y, gamma), w


@pytest.fixture
def small_problem():
    prob, _ = random_instance(3, n=4, d=2, c=2, m=2)
    return prob


@pytest.fixture
def toy_csv(tmp_path):
    """12 rows, two well separated clusters, label column ``label``."""
    rng = np.random.default_rng(0)
    a = rng.normal(1.0, 0.2, size=(6, 2))
    b = rng.normal(-1.0, 0.2, size=(6, 2))
    df = pd.DataFrame(np.vstack([a, b]), columns=["x1", "x2"])
    df["label"] = ["a"] * 6 + ["b"] * 6
    path = tmp_path / "toy.csv"
    df.to_csv(path, index=False)
    return path
