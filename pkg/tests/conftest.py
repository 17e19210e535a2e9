import numpy as np
import pytest

from memloop import LoopGenerator


def make_random_loop(rng, n_max=5, lo=0.2, hi=5.0, min_sep=0.05):
    """Random valid loop with comfortably separated return rates.

    ``min_sep`` is the relative pairwise separation of the b rates; values
    below ~1e-4 make the Lagrange weights ill-conditioned.
    """
    n = int(rng.integers(1, n_max + 1))
    while True:
        b = rng.uniform(lo, hi, size=n)
        gaps = np.abs(b[:, None] - b[None, :])
        np.fill_diagonal(gaps, np.inf)
        if n == 1 or gaps.min() > min_sep * b.max():
            break
    a = rng.uniform(lo, hi, size=n)
    return LoopGenerator(a, b)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
