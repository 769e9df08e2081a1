import numpy as np
import pytest
from hypothesis import strategies as st

PAIRS = {
    "pair1": [(0.55, 0.45), (0.95, 0.05)],
    "pair2": [(0.95, 0.05), (0.05, 0.95)],
    "pair3": [(0.50, 0.50), (0.45, 0.55)],
    "pair4": [(0.10, 0.90), (0.05, 0.95)],
}
TRIPLES = {
    "triple1": [(0.50, 0.50), (0.45, 0.55), (0.55, 0.45)],
    "triple2": [(0.15, 0.85), (0.10, 0.90), (0.20, 0.80)],
}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def interior_dist(n, lo=0.02):
    """Strategy for interior probability vectors of length ``n``."""
    return st.lists(st.floats(lo, 1.0), min_size=n, max_size=n).map(lambda w: np.asarray(w) / np.sum(w))


def random_interior(rng, n, conc=1.0):
    p = rng.dirichlet(np.full(n, conc))
    p = np.maximum(p, 1e-3)
    return p / p.sum()
