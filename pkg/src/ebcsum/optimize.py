"""Cardinality-constrained maximization: the Greedy reference optimizer, a
threshold-sieve streaming optimizer, and an exhaustive brute-force oracle."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from . import batched, layout
from .core import EvalMultiset, Summary
from .ebc import EbcFunction, evaluate_multiset_naive

BACKENDS = ("naive", "batched", "device-sim")

# Exhaustive search refuses problems with more candidate sets than this.
BRUTE_FORCE_SET_CAP = 1_000_000


@dataclass
class OptimizerBudget:
    """How large a summary to build and which evaluator to drive."""

    k: int
    backend: str = "naive"
    threads: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.backend not in BACKENDS:
            raise ValueError(
                f"unknown backend {self.backend!r}; expected one of {BACKENDS}"
            )


def evaluate_with_backend(f: EbcFunction, multiset: EvalMultiset,
                          backend: str = "naive", threads: int = 1) -> np.ndarray:
    """Dispatch a multiset evaluation to the named backend."""
    if backend == "naive":
        return evaluate_multiset_naive(f, multiset)
    if backend == "batched":
        return batched.evaluate_multiset_batched(f, multiset, threads)
    if backend == "device-sim":
        inter = layout.interleave_eval_sets(multiset, f.ground)
        config = batched.KernelConfig.for_problem(
            f.ground.n, multiset.l, f.ground.dims,
            f.ground.precision.scalar_bytes)
        values, _ = batched.simulate_kernel(f, inter, config)
        return values
    raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")


def greedy_maximize(f: EbcFunction, budget: OptimizerBudget) -> Summary:
    """Greedy summary construction.

    Each step evaluates the whole candidate frontier (the current set joined
    with every unselected ground index) as one multiset through the configured
    backend, then takes the candidate of maximum marginal gain. Ties break to
    the lowest ground index; values within a hair of the maximum count as
    tied, so exact mathematical ties still resolve identically across backends
    whose reduction orders differ by final-ulp noise.
    """
    n = f.ground.n
    if budget.k > n:
        raise ValueError(f"k={budget.k} exceeds ground size {n}")
    t0 = time.perf_counter()
    selected: list = []
    gains: list = []
    evaluations = 0
    current = 0.0
    remaining = list(range(n))  # kept ascending so argmax-first is lowest index
    for _ in range(budget.k):
        multiset = EvalMultiset([selected + [c] for c in remaining])
        values = evaluate_with_backend(f, multiset, budget.backend, budget.threads)
        evaluations += multiset.l
        top = float(values[int(np.argmax(values))])
        tie_window = 1e-12 * max(1.0, abs(top))
        best = int(np.argmax(values >= top - tie_window))
        gains.append(float(values[best]) - current)
        current = float(values[best])
        selected.append(remaining.pop(best))
    return Summary(selected=selected, value=current, gains=gains,
                   evaluations=evaluations,
                   runtime_seconds=time.perf_counter() - t0)


def brute_force_opt(f: EbcFunction, k: int) -> Summary:
    """Exhaustive optimum over all k-subsets. Test oracle only.

    Ties keep the lexicographically first subset. Guarded against blowups:
    refuses instances with more than ``BRUTE_FORCE_SET_CAP`` candidate sets.
    """
    n = f.ground.n
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    total = math.comb(n, k)
    if total > BRUTE_FORCE_SET_CAP:
        raise ValueError(
            f"C({n},{k}) = {total} candidate sets exceeds the "
            f"{BRUTE_FORCE_SET_CAP} brute-force cap"
        )
    t0 = time.perf_counter()
    best_set: Sequence[int] = ()
    best_value = -math.inf
    evaluations = 0
    for subset in combinations(range(n), k):
        value = f.value(subset)
        evaluations += 1
        if value > best_value:
            best_value = value
            best_set = subset
    gains = []
    prev = 0.0
    for stop in range(1, len(best_set) + 1):
        val = f.value(best_set[:stop])
        gains.append(val - prev)
        prev = val
    return Summary(selected=list(best_set), value=float(best_value), gains=gains,
                   evaluations=evaluations,
                   runtime_seconds=time.perf_counter() - t0)


class _Sieve:
    __slots__ = ("threshold", "selected", "value", "gains")

    def __init__(self, threshold: float):
        self.threshold = threshold
        self.selected: list = []
        self.value = 0.0
        self.gains: list = []


def sieve_stream_maximize(stream: Iterable[int], f: EbcFunction, k: int,
                          epsilon: float = 0.1) -> Summary:
    """Single-pass threshold-sieve maximization.

    Maintains candidate solutions for thresholds on a (1+epsilon) geometric
    grid spanning [m, 2km], where m is the best singleton value observed so
    far. A sieve with threshold tau admits an element while below capacity
    whenever its marginal gain reaches (tau/2 - f(S)) / (k - |S|). Returns the
    best sieve's summary; the empty stream yields an empty summary of value 0.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    t0 = time.perf_counter()
    log_base = math.log1p(epsilon)
    sieves: dict = {}
    m = 0.0
    evaluations = 0

    for raw in stream:
        e = int(raw)
        singleton = f.value([e])
        evaluations += 1
        if singleton > m:
            m = singleton
            lo = math.ceil(math.log(m) / log_base - 1e-12)
            hi = math.floor(math.log(2.0 * k * m) / log_base + 1e-12)
            for expo in list(sieves):
                if expo < lo or expo > hi:
                    del sieves[expo]
            for expo in range(lo, hi + 1):
                if expo not in sieves:
                    sieves[expo] = _Sieve((1.0 + epsilon) ** expo)
        for expo in sorted(sieves):
            sv = sieves[expo]
            if len(sv.selected) >= k or e in sv.selected:
                continue
            gain = f.value(sv.selected + [e]) - sv.value
            evaluations += 1
            needed = (sv.threshold / 2.0 - sv.value) / (k - len(sv.selected))
            if gain >= needed:
                sv.selected.append(e)
                sv.value += gain
                sv.gains.append(gain)

    best = None
    for expo in sorted(sieves):
        sv = sieves[expo]
        if best is None or sv.value > best.value:
            best = sv
    runtime = time.perf_counter() - t0
    if best is None:
        return Summary(selected=[], value=0.0, gains=[],
                       evaluations=evaluations, runtime_seconds=runtime)
    return Summary(selected=list(best.selected), value=best.value,
                   gains=list(best.gains), evaluations=evaluations,
                   runtime_seconds=runtime)
