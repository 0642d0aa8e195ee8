import numpy as np
import pytest

import billiardquant as bq
from billiardquant.wavefunction import inside_mask


def interior_points(billiard, count, seed=0):
    """Uniform samples inside the billiard by rejection from its bounding box."""
    rng = np.random.default_rng(seed)
    outer = billiard.points[0]
    lo, hi = outer.min(axis=0), outer.max(axis=0)
    out = np.empty((0, 2))
    while len(out) < count:
        cand = lo + rng.random((4 * count, 2)) * (hi - lo)
        out = np.vstack([out, cand[inside_mask(billiard, cand, tol=-1e-9)]])
    return out[:count]


@pytest.fixture(scope="session")
def sinai():
    return bq.sinai_polygon()


@pytest.fixture(scope="session")
def rect_hole():
    return bq.builtin_family("rect-holes", k=2)


@pytest.fixture(scope="session")
def square():
    return bq.rectangle(1, 1)
