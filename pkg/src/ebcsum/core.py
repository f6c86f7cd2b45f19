"""Core data types shared by every evaluator: the ground matrix, evaluation
multisets, precision handling, summaries, and the built-in dissimilarity."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np


class Precision(Enum):
    """Floating-point handling for stored data and evaluator arithmetic.

    ``FP16_STORAGE`` rounds values to the nearest half-precision representable
    number on store and widens them to fp32 for all arithmetic. It emulates
    half-precision storage on hosts without native fp16 units; it does not
    emulate fp16 hardware arithmetic.
    """

    FP16_STORAGE = "fp16-storage"
    FP32 = "fp32"
    FP64 = "fp64"

    @classmethod
    def parse(cls, text: str) -> "Precision":
        for member in cls:
            if member.value == text:
                return member
        raise ValueError(
            f"unknown precision {text!r}; expected one of "
            f"{[m.value for m in cls]}"
        )

    @property
    def storage_dtype(self) -> np.dtype:
        return _STORAGE_DTYPES[self]

    @property
    def compute_dtype(self) -> np.dtype:
        # fp16 storage widens to fp32 before any arithmetic.
        return np.dtype(np.float32) if self is not Precision.FP64 else np.dtype(np.float64)

    @property
    def scalar_bytes(self) -> int:
        """Bytes one stored scalar occupies (drives the gamma calculus)."""
        return self.storage_dtype.itemsize


_STORAGE_DTYPES = {
    Precision.FP16_STORAGE: np.dtype(np.float16),
    Precision.FP32: np.dtype(np.float32),
    Precision.FP64: np.dtype(np.float64),
}


class GroundMatrix:
    """The N x dims dataset being summarized. Immutable after construction.

    Values are held in the storage dtype of ``precision``; evaluators obtain a
    widened view via :meth:`compute_view` and never write back.
    """

    def __init__(self, data, precision: Precision = Precision.FP64):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2:
            raise ValueError(f"ground data must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"ground data must be at least 1x1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise ValueError(
                f"ground data contains a non-finite cell at row {bad[0]}, column {bad[1]}"
            )
        self.precision = precision
        self.data = np.ascontiguousarray(arr.astype(precision.storage_dtype))
        self.data.setflags(write=False)
        self.n, self.dims = self.data.shape
        self._compute_cache: Optional[np.ndarray] = None

    def compute_view(self) -> np.ndarray:
        """Stored values widened to the arithmetic dtype (cached, read-only)."""
        if self._compute_cache is None:
            dtype = self.precision.compute_dtype
            if self.data.dtype == dtype:
                self._compute_cache = self.data
            else:
                cache = self.data.astype(dtype)
                cache.setflags(write=False)
                self._compute_cache = cache
        return self._compute_cache

    def as_float64(self) -> np.ndarray:
        """Stored values widened to fp64 (for the high-precision oracle path)."""
        if self.data.dtype == np.float64:
            return self.data
        return self.data.astype(np.float64)

    @property
    def vector_bytes(self) -> int:
        """Bytes one stored observation occupies (gamma in the config calculus)."""
        return self.dims * self.precision.scalar_bytes

    def __repr__(self) -> str:
        return f"GroundMatrix(n={self.n}, dims={self.dims}, precision={self.precision.value})"


class EvalMultiset:
    """An ordered collection of candidate index sets evaluated together.

    Sets are index lists into a :class:`GroundMatrix`; empty sets are
    permitted. Order of sets and of elements within a set is preserved, which
    the interleaved layout round-trip relies on.
    """

    def __init__(self, sets: Iterable[Sequence[int]]):
        parsed = []
        for j, s in enumerate(sets):
            indices = [int(i) for i in s]
            if any(i < 0 for i in indices):
                raise IndexError(f"set {j} contains a negative index")
            parsed.append(indices)
        if not parsed:
            raise ValueError("a multiset must contain at least one set")
        self.sets = parsed
        self.lengths = tuple(len(s) for s in parsed)
        self.l = len(parsed)

    @property
    def max_len(self) -> int:
        return max(self.lengths)

    def validate_indices(self, n: int) -> None:
        """Raise IndexError naming the offending set if any index is out of [0, n)."""
        for j, s in enumerate(self.sets):
            for i in s:
                if i >= n:
                    raise IndexError(
                        f"set {j}: index {i} out of range for ground size {n}"
                    )

    def __len__(self) -> int:
        return self.l

    def __repr__(self) -> str:
        return f"EvalMultiset(l={self.l}, lengths={list(self.lengths)})"


@dataclass
class Summary:
    """Result of one optimization run."""

    selected: list
    value: float
    gains: list = field(default_factory=list)
    evaluations: int = 0
    runtime_seconds: float = 0.0


def squared_euclidean(x, y) -> float:
    """Squared Euclidean distance between two equal-length vectors.

    Symmetric, non-negative, zero exactly when the vectors are equal.
    """
    xa = np.asarray(x, dtype=np.float64).ravel()
    ya = np.asarray(y, dtype=np.float64).ravel()
    if xa.shape != ya.shape:
        raise ValueError(
            f"dimension mismatch: {xa.shape[0]} vs {ya.shape[0]}"
        )
    diff = xa - ya
    return float(np.dot(diff, diff))


def make_auxiliary_vector(dims: int, kind: str = "zero",
                          ground: Optional[GroundMatrix] = None) -> np.ndarray:
    """Build the phantom representative anchoring the clustering objective.

    kind="zero" returns the all-zero vector (the default anchor); kind="mean"
    returns the column-wise mean of the ground matrix, which is the sane
    choice after z-normalization where zero is just the data centroid anyway.
    """
    if dims < 1:
        raise ValueError("dims must be >= 1")
    if kind == "zero":
        return np.zeros(dims, dtype=np.float64)
    if kind in ("mean", "mean-of-V"):
        if ground is None:
            raise ValueError("kind='mean' requires a ground matrix")
        if ground.dims != dims:
            raise ValueError(f"dims mismatch: {dims} vs ground dims {ground.dims}")
        return ground.as_float64().mean(axis=0)
    raise ValueError(f"unknown auxiliary vector kind {kind!r}")


class Dissimilarity:
    """Pluggable dissimilarity interface. Squared Euclidean is the only built-in.

    ``pair`` is the scalar reference; ``cross`` computes the full m x r matrix
    of pairwise values and defaults to looping ``pair``. ``cross_fast`` may
    trade a few ulps for speed and defaults to ``cross``.
    """

    name = "abstract"

    def pair(self, x, y) -> float:
        raise NotImplementedError

    def cross(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        Y = np.atleast_2d(Y)
        out = np.empty((X.shape[0], Y.shape[0]), dtype=np.result_type(X, Y))
        for a in range(X.shape[0]):
            for b in range(Y.shape[0]):
                out[a, b] = self.pair(X[a], Y[b])
        return out

    def cross_fast(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return self.cross(X, Y)


class SquaredEuclidean(Dissimilarity):
    """Squared Euclidean distance with blocked exact and Gram-expansion paths."""

    name = "squared-euclidean"

    # Cap on temporary broadcast blocks (elements) in the exact path.
    _BLOCK_ELEMENTS = 2_000_000

    def pair(self, x, y) -> float:
        return squared_euclidean(x, y)

    def cross(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Exact direct-difference distances, blocked to bound memory."""
        X = np.atleast_2d(X)
        Y = np.atleast_2d(Y)
        if X.shape[1] != Y.shape[1]:
            raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
        m, r = X.shape[0], Y.shape[0]
        dtype = np.result_type(X, Y)
        out = np.empty((m, r), dtype=dtype)
        per_row = max(r * X.shape[1], 1)
        step = max(1, self._BLOCK_ELEMENTS // per_row)
        for start in range(0, m, step):
            stop = min(start + step, m)
            diff = X[start:stop, None, :] - Y[None, :, :]
            np.einsum("ijk,ijk->ij", diff, diff, out=out[start:stop])
        return out

    def cross_fast(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Gram-expansion distances ||x||^2 + ||y||^2 - 2 x.y, clamped at 0.

        Loses a few ulps to cancellation but turns the inner work into one
        matrix multiply, which is what makes the batched backend fast.
        """
        X = np.atleast_2d(X)
        Y = np.atleast_2d(Y)
        if X.shape[1] != Y.shape[1]:
            raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
        xx = np.einsum("ij,ij->i", X, X)
        yy = np.einsum("ij,ij->i", Y, Y)
        d = xx[:, None] + yy[None, :]
        d -= 2.0 * (X @ Y.T)
        np.maximum(d, 0.0, out=d)
        return d
