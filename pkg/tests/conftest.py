"""Shared fixtures and the plain-loop reference oracle used across tests."""

import numpy as np
import pytest

from ebcsum import EvalMultiset, GroundMatrix, Precision


def reference_values(ground, e0, sets):
    """Plain-Python exemplar-clustering values, independent of the package.

    Deliberately naive: nested loops, fp64 throughout. Only usable at small
    scales; it exists so the library's own evaluators never check themselves.
    """
    data = ground.as_float64().tolist()
    anchor = [float(x) for x in e0]

    def loss(rep_rows):
        total = 0.0
        for v in data:
            best = float("inf")
            for r in [anchor] + rep_rows:
                d = 0.0
                for a, b in zip(v, r):
                    d += (a - b) ** 2
                if d < best:
                    best = d
            total += best
        return total / len(data)

    base = loss([])
    return [base - loss([data[i] for i in s]) for s in sets]


def random_instance(rng, precision=Precision.FP64, n_max=200, dims_max=20,
                    l_max=50, size_max=10, allow_empty=True):
    """Random ground matrix plus multiset within the given bounds."""
    n = int(rng.integers(2, n_max + 1))
    dims = int(rng.integers(1, dims_max + 1))
    l = int(rng.integers(1, l_max + 1))
    ground = GroundMatrix(rng.random((n, dims)), precision)
    lo = 0 if allow_empty else 1
    sets = []
    for _ in range(l):
        size = int(rng.integers(lo, min(size_max, n) + 1))
        sets.append(rng.choice(n, size=size, replace=False).tolist())
    return ground, EvalMultiset(sets)


def random_audit_instance(rng, l_min=8, l_max=40, aligned=False):
    """Random nonempty multiset in the coalescing regime (enough sets to fill
    a memory segment). ``aligned`` restricts l so fp32 rank rows start on
    segment boundaries."""
    n = int(rng.integers(2, 41))
    dims = int(rng.integers(1, 6))
    if aligned:
        l = 8 * int(rng.integers(1, 5))
    else:
        l = int(rng.integers(l_min, l_max + 1))
    ground = GroundMatrix(rng.random((n, dims)), Precision.FP32)
    sets = [rng.choice(n, size=int(rng.integers(1, min(6, n) + 1)),
                       replace=False).tolist() for _ in range(l)]
    return ground, EvalMultiset(sets)


def max_scaled_diff(a, b):
    """max |a-b| relative to the larger of 1 and the values' own scale."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(1.0, float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    return float(np.max(np.abs(a - b))) / scale


@pytest.fixture
def two_point_ground():
    """V = {(1,0), (0,1)}: the hand-computed fixture used throughout."""
    return GroundMatrix([[1.0, 0.0], [0.0, 1.0]])


@pytest.fixture
def three_point_ground():
    """V = {(1,0), (0,1), (5,5)}: the greedy/brute-force fixture."""
    return GroundMatrix([[1.0, 0.0], [0.0, 1.0], [5.0, 5.0]])
