"""The k-medoids loss, the exemplar-based clustering objective, its discrete
derivative, and the naive evaluator that serves as the correctness oracle."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .core import Dissimilarity, EvalMultiset, GroundMatrix, SquaredEuclidean


def _ordered_sum(values: np.ndarray) -> float:
    """Left-to-right fp64 sum. Reduction order is pinned for reproducibility."""
    total = 0.0
    for v in values.tolist():
        total += v
    return total


def k_medoids_loss(ground: GroundMatrix, reps,
                   distance: Optional[Dissimilarity] = None) -> float:
    """Mean distance of every ground observation to its nearest representative.

    ``reps`` is a non-empty sequence of explicit vectors of the ground
    dimensionality. Computed in fp64 regardless of the ground's storage
    precision; the per-row minimum starts from +inf, so any real distance
    replaces it.
    """
    reps_arr = np.atleast_2d(np.asarray(reps, dtype=np.float64))
    if reps_arr.size == 0:
        raise ValueError("the loss is undefined for an empty representative set")
    if reps_arr.shape[1] != ground.dims:
        raise ValueError(
            f"representative dimensionality {reps_arr.shape[1]} does not match "
            f"ground dims {ground.dims}"
        )
    if not np.all(np.isfinite(reps_arr)):
        raise ValueError("representatives must be finite")
    distance = distance or SquaredEuclidean()
    dists = distance.cross(ground.as_float64(), reps_arr)
    minima = np.minimum.reduce(dists, axis=1, initial=np.inf)
    return _ordered_sum(minima) / ground.n


class EbcFunction:
    """Monotone submodular representativeness objective over a ground matrix.

    f(S) is the reduction in k-medoids loss that the set S achieves relative
    to the auxiliary-vector-only baseline. The baseline loss is computed once
    at construction (it does not depend on S) and reused by every evaluation,
    including the batched and device-model backends.
    """

    def __init__(self, ground: GroundMatrix, e0: Optional[np.ndarray] = None,
                 distance: Optional[Dissimilarity] = None):
        self.ground = ground
        self.distance = distance or SquaredEuclidean()
        if e0 is None:
            e0 = np.zeros(ground.dims, dtype=np.float64)
        else:
            # copy so marking it read-only cannot touch a caller's array
            e0 = np.array(e0, dtype=np.float64).ravel()
            if e0.shape[0] != ground.dims:
                raise ValueError(
                    f"auxiliary vector has {e0.shape[0]} dims, ground has {ground.dims}"
                )
            if not np.all(np.isfinite(e0)):
                raise ValueError("auxiliary vector must be finite")
        self.e0 = e0
        self.e0.setflags(write=False)
        self.baseline_loss = self.loss_of_indices(())

    def loss_of_indices(self, indices: Sequence[int]) -> float:
        """fp64 loss of S union {e0}, with S given by ground row indices.

        The auxiliary vector rides along as a virtual extra representative,
        so the ground matrix is never copied or mutated.
        """
        self._check_indices(indices)
        v64 = self.ground.as_float64()
        if len(indices) == 0:
            refs = self.e0[None, :]
        else:
            refs = np.vstack([self.e0[None, :], v64[list(indices)]])
        dists = self.distance.cross(v64, refs)
        minima = np.minimum.reduce(dists, axis=1, initial=np.inf)
        return _ordered_sum(minima) / self.ground.n

    def value(self, indices: Sequence[int]) -> float:
        """f(S) = baseline loss minus loss of S union {e0}. Never negative."""
        return self.baseline_loss - self.loss_of_indices(indices)

    def marginal_gain(self, indices: Sequence[int], e: int) -> float:
        """Discrete derivative: f(S + {e}) - f(S). Zero when e is already in S."""
        self._check_indices([e])
        if e in indices:
            return 0.0
        base = self.value(indices)
        return self.value(list(indices) + [e]) - base

    def _check_indices(self, indices: Sequence[int]) -> None:
        n = self.ground.n
        for i in indices:
            if not 0 <= int(i) < n:
                raise IndexError(f"index {i} out of range for ground size {n}")


def evaluate_multiset_naive(f: EbcFunction, multiset: EvalMultiset) -> np.ndarray:
    """Evaluate every set of the multiset with the per-set reference procedure.

    Returns fp64 values in multiset order. Pure function of its inputs;
    repeated calls are bit-identical.
    """
    values = np.empty(multiset.l, dtype=np.float64)
    for j, s in enumerate(multiset.sets):
        try:
            values[j] = f.value(s)
        except IndexError as exc:
            raise IndexError(f"set {j}: {exc}") from None
    return values
