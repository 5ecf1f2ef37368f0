import math

import numpy as np
import pytest

from orbitlab.enumeration import elements_array


@pytest.fixture(scope="session")
def ball_1e4():
    """Materialized full ball at budget 10^4, shared across tests."""
    return elements_array(10_000)


@pytest.fixture(scope="session")
def brute_ball_50():
    """Brute-force ball at budget 50 over the entry cube, as a set of tuples."""
    m = math.isqrt(50)
    rng = range(-m, m + 1)
    out = set()
    for a in rng:
        for b in rng:
            for c in rng:
                for d in rng:
                    if a * d - b * c == 1 and a * a + b * b + c * c + d * d <= 50:
                        out.add((a, b, c, d))
    return out


def brute_min_dist(arr: np.ndarray, u, v, T) -> float:
    """Oracle: minimum |gamma*u - v| over the materialized ball rows with norm <= T."""
    norms = (arr * arr).sum(axis=1)
    mask = norms <= T
    a, b, c, d = (arr[mask, i].astype(float) for i in range(4))
    e1 = a * u[0] + b * u[1] - v[0]
    e2 = c * u[0] + d * u[1] - v[1]
    return float(np.sqrt((e1 * e1 + e2 * e2).min()))
