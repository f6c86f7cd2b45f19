"""Memory layout construction and analysis: column-wise ground vectorization,
round-robin interleaving of evaluation sets, and a segment-level transaction
model that quantifies how well warp accesses coalesce."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, List, Tuple

import numpy as np

from .core import EvalMultiset, GroundMatrix

if TYPE_CHECKING:  # pragma: no cover
    from .batched import KernelConfig


class LayoutCorruptionError(ValueError):
    """An interleaved matrix whose occupancy disagrees with its set lengths."""


class CoalescingDominanceError(AssertionError):
    """The interleaved layout lost a transaction-count audit.

    Only reachable for degenerate multisets whose column count is smaller
    than one memory segment (l * scalar_bytes < segment_bytes), where rank
    rows start misaligned; in the batched regime the interleaved layout
    never loses.
    """


def vectorize_ground(ground: GroundMatrix) -> np.ndarray:
    """Flatten the ground matrix column-major into one contiguous buffer.

    All rows' component k are emitted contiguously for k = 0..dims-1, so the
    whole matrix ships as a single bulk copy. Invertible via
    :func:`devectorize_ground`.
    """
    return ground.data.flatten(order="F")


def devectorize_ground(buffer: np.ndarray, n: int, dims: int) -> np.ndarray:
    """Inverse of :func:`vectorize_ground`."""
    buf = np.asarray(buffer)
    if buf.size != n * dims:
        raise ValueError(f"buffer has {buf.size} scalars, expected {n * dims}")
    return buf.reshape((n, dims), order="F")


@dataclass
class InterleavedEvalMatrix:
    """Round-robin interleaving of the evaluation sets' vectors.

    The matrix has ``dims`` rows and ``l * max_len`` columns; column c holds
    element rank c // l of set c mod l when that set is long enough, and
    stays empty otherwise. Empty cells carry a quiet-NaN fill; the occupancy
    mask, not the fill value, is authoritative. The row-wise (dims-major)
    flattening puts the rank-r elements of all sets next to each other, which
    is exactly what lets warp lanes with equal (ground index, component) and
    varying set index touch adjacent addresses.
    """

    cells: np.ndarray            # dims x (l * max_len), storage dtype, C order
    occupancy: np.ndarray        # bool per column; columns fill wholly or not
    set_lengths: Tuple[int, ...]
    source_indices: np.ndarray   # ground row per column, -1 for empty slots
    l: int
    max_len: int
    dims: int
    scalar_bytes: int

    def column_owner(self, c: int) -> Tuple[int, int]:
        """(set index, element rank) owning column c."""
        return c % self.l, c // self.l

    def address_of(self, k: int, c: int) -> int:
        """Byte offset of component k of column c in the flattened buffer."""
        return (k * self.l * self.max_len + c) * self.scalar_bytes

    @property
    def columns(self) -> int:
        return self.l * self.max_len

    def set_vectors(self, j: int) -> np.ndarray:
        """The |S_j| x dims vector block of set j, read back from the cells."""
        cols = np.arange(self.set_lengths[j]) * self.l + j
        return self.cells[:, cols].T


def interleave_eval_sets(multiset: EvalMultiset,
                         ground: GroundMatrix) -> InterleavedEvalMatrix:
    """Build the interleaved evaluation matrix for a multiset over a ground."""
    multiset.validate_indices(ground.n)
    l = multiset.l
    max_len = multiset.max_len
    cols = l * max_len
    source = np.full(cols, -1, dtype=np.int64)
    for j, s in enumerate(multiset.sets):
        if s:
            source[np.arange(len(s)) * l + j] = s
    occupancy = source >= 0
    cells = np.full((ground.dims, cols), np.nan, dtype=ground.precision.storage_dtype)
    if occupancy.any():
        cells[:, occupancy] = ground.data[source[occupancy]].T
    return InterleavedEvalMatrix(
        cells=cells,
        occupancy=occupancy,
        set_lengths=multiset.lengths,
        source_indices=source,
        l=l,
        max_len=max_len,
        dims=ground.dims,
        scalar_bytes=ground.precision.scalar_bytes,
    )


def deinterleave(m: InterleavedEvalMatrix) -> EvalMultiset:
    """Exact inverse of :func:`interleave_eval_sets`.

    Raises :class:`LayoutCorruptionError` when the occupancy mask and the
    recorded set lengths disagree.
    """
    cols = m.l * m.max_len
    if m.occupancy.shape[0] != cols or m.source_indices.shape[0] != cols:
        raise LayoutCorruptionError("mask or source length does not match columns")
    sets: List[List[int]] = []
    for j, length in enumerate(m.set_lengths):
        col_ids = np.arange(m.max_len) * m.l + j
        filled = m.occupancy[col_ids]
        expected = np.arange(m.max_len) < length
        if not np.array_equal(filled, expected):
            raise LayoutCorruptionError(
                f"occupancy of set {j} inconsistent with recorded length {length}"
            )
        sets.append(m.source_indices[col_ids[:length]].tolist())
    return EvalMultiset(sets)


@dataclass
class AccessTrace:
    """Byte addresses touched per simulated warp instruction step."""

    steps: List[Tuple[int, np.ndarray]] = field(default_factory=list)

    def add(self, warp_id: int, addresses: np.ndarray) -> None:
        self.steps.append((warp_id, addresses))


def count_memory_transactions(trace: AccessTrace, segment_bytes: int) -> List[int]:
    """Transactions per step: distinct memory segments the step touches."""
    if segment_bytes <= 0:
        raise ValueError("segment_bytes must be positive")
    counts = []
    for _warp, addrs in trace.steps:
        if addrs.size == 0:
            counts.append(0)
        else:
            counts.append(int(np.unique(addrs // segment_bytes).size))
    return counts


@dataclass
class LayoutAuditReport:
    """Transaction comparison of the interleaved vs per-set-contiguous layout."""

    interleaved_transactions: int
    contiguous_transactions: int
    ratio: float                     # contiguous / interleaved, >= 1.0
    interleaved_step_counts: np.ndarray
    contiguous_step_counts: np.ndarray
    step_multiplicities: np.ndarray  # identical warp patterns repeat along the grid x axis
    warp_size: int
    segment_bytes: int


def _warp_lane_coords(block_threads: int, b_y: int, warp_size: int):
    """Yield (warp id, t_x array, t_y array) with the y coordinate fastest.

    A warp therefore covers consecutive set indices for one ground vector,
    the access pattern the interleaved layout is built for.
    """
    tids = np.arange(block_threads)
    for w, start in enumerate(range(0, block_threads, warp_size)):
        chunk = tids[start:start + warp_size]
        yield w, chunk // b_y, chunk % b_y


def audit_layouts(multiset: EvalMultiset, config: "KernelConfig") -> LayoutAuditReport:
    """Replay the kernel's warp schedule against both layouts and count
    transactions for each.

    Warp patterns do not depend on the grid x position except through the
    ground-bound mask, so each distinct pattern is traced once and scaled by
    how often it repeats along the x axis.
    """
    lens = np.asarray(multiset.lengths, dtype=np.int64)
    l = multiset.l
    max_len = multiset.max_len
    dims = config.dims
    s_bytes = config.scalar_bytes
    g_x, g_y = config.grid[0], config.grid[1]
    b_x, b_y = config.block[0], config.block[1]
    n = config.n

    # Per-set byte offsets of the per-set-contiguous layout.
    contig_offsets = np.concatenate([[0], np.cumsum(lens * dims)[:-1]]) * s_bytes

    inter_trace = AccessTrace()
    contig_trace = AccessTrace()
    multiplicities: List[int] = []

    # Distinct grid x positions: all interior columns share a pattern; a ragged
    # edge column (n not divisible by b_x) masks some lanes and is traced alone.
    full_cols = n // b_x
    edge_cols = 1 if n % b_x else 0
    col_cases = []
    if full_cols:
        col_cases.append((0, full_cols))
    if edge_cols:
        col_cases.append((full_cols, 1))

    warp_id = 0
    for by_star in range(g_y):
        for bx_star, multiplicity in col_cases:
            for _w, t_x, t_y in _warp_lane_coords(b_x * b_y, b_y, config.warp_size):
                i = b_x * bx_star + t_x
                j = b_y * by_star + t_y
                in_range = (i < n) & (j < l)
                if not in_range.any():
                    continue
                j_in = j[in_range]
                lane_lens = lens[j_in]
                warp_max = int(lane_lens.max()) if lane_lens.size else 0
                for r in range(warp_max):
                    live = in_range.copy()
                    live[in_range] &= lane_lens > r
                    j_live = j[live]
                    for k in range(dims):
                        inter_addr = (k * l * max_len + r * l + j_live) * s_bytes
                        contig_addr = (contig_offsets[j_live]
                                       + (k * lens[j_live] + r) * s_bytes)
                        inter_trace.add(warp_id, inter_addr)
                        contig_trace.add(warp_id, contig_addr)
                        multiplicities.append(multiplicity)
                warp_id += 1

    inter_counts = np.asarray(count_memory_transactions(inter_trace, config.segment_bytes))
    contig_counts = np.asarray(count_memory_transactions(contig_trace, config.segment_bytes))
    mult = np.asarray(multiplicities, dtype=np.int64)
    inter_total = int(inter_counts @ mult) if mult.size else 0
    contig_total = int(contig_counts @ mult) if mult.size else 0
    if inter_total > contig_total:
        raise CoalescingDominanceError(
            f"interleaved layout used more transactions ({inter_total}) than "
            f"the contiguous layout ({contig_total}); l={l} is below the "
            f"coalescing regime (l * scalar_bytes >= segment_bytes)"
        )
    ratio = contig_total / inter_total if inter_total else 1.0
    return LayoutAuditReport(
        interleaved_transactions=inter_total,
        contiguous_transactions=contig_total,
        ratio=ratio,
        interleaved_step_counts=inter_counts,
        contiguous_step_counts=contig_counts,
        step_multiplicities=mult,
        warp_size=config.warp_size,
        segment_bytes=config.segment_bytes,
    )
