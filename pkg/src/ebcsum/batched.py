"""Work-matrix evaluation: kernel configuration calculus, a multi-threaded
batched backend, and a deterministic device-model simulator.

The device model mirrors a grid/block thread hierarchy: every simulated
thread owns one cell of the l x N work matrix, the first thread in the y
direction stages its ground vector into block-local storage, and warps of
``warp_size`` threads execute in lockstep. Thread ids linearize with the y
coordinate fastest (tid = t_x * b_y + t_y), so a warp covers consecutive
evaluation sets for one ground vector; for b_x = 1 configurations this
coincides with the usual x-fastest device ordering, and it is the ordering
the interleaved layout is built to serve.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import ceil
from typing import List, Optional, Tuple

import numpy as np

from .core import EvalMultiset
from .ebc import EbcFunction
from .layout import InterleavedEvalMatrix

DEFAULT_SHARED_MEMORY_BYTES = 49152   # beta: shared-memory budget per block
MAX_BLOCK_THREADS = 1024
WARP_SIZE = 32
SEGMENT_BYTES = 32

# Work-matrix cells above this are never materialized, only streamed.
MATERIALIZE_CELL_CAP = 1 << 24

# Rough element budget for temporary distance blocks in the batched backend.
_BLOCK_ELEMENTS = 4_000_000


class ConfigurationError(ValueError):
    """A kernel configuration that violates the device model's constraints."""


def compute_block_dims(l: int, beta: int, gamma: int,
                       max_threads: int = MAX_BLOCK_THREADS) -> Tuple[int, int]:
    """Block dimensioning (b_x, b_y) for an l-set problem.

    b_y packs as many evaluation sets as the thread budget allows; b_x then
    spends the remaining threads on ground vectors, bounded by how many
    vectors of gamma bytes fit into the beta bytes of block-local storage.
    """
    if l < 1:
        raise ValueError("l must be >= 1")
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    if gamma > beta:
        raise ConfigurationError(
            f"a single ground vector ({gamma} bytes) does not fit into the "
            f"per-block shared memory budget ({beta} bytes)"
        )
    b_y = min(max_threads, l)
    b_x = min(max_threads // b_y, beta // gamma)
    return b_x, b_y


def compute_grid_dims(n: int, l: int, block: Tuple[int, int]) -> Tuple[int, int]:
    """Grid dimensioning (g_x, g_y) covering every cell of the work matrix."""
    b_x, b_y = block[0], block[1]
    if b_x < 1 or b_y < 1:
        raise ValueError("block dimensions must be >= 1")
    return ceil(n / b_x), ceil(l / b_y)


@dataclass(frozen=True)
class KernelConfig:
    """Grid/block dimensioning plus the memory parameters they derive from."""

    grid: Tuple[int, int, int]
    block: Tuple[int, int, int]
    beta: int
    gamma: int
    n: int
    l: int
    dims: int
    scalar_bytes: int
    max_threads: int = MAX_BLOCK_THREADS
    warp_size: int = WARP_SIZE
    segment_bytes: int = SEGMENT_BYTES

    @classmethod
    def for_problem(cls, n: int, l: int, dims: int, scalar_bytes: int,
                    beta: int = DEFAULT_SHARED_MEMORY_BYTES,
                    max_threads: int = MAX_BLOCK_THREADS,
                    warp_size: int = WARP_SIZE,
                    segment_bytes: int = SEGMENT_BYTES) -> "KernelConfig":
        gamma = dims * scalar_bytes
        block = compute_block_dims(l, beta, gamma, max_threads)
        grid = compute_grid_dims(n, l, block)
        return cls(grid=(grid[0], grid[1], 1), block=(block[0], block[1], 1),
                   beta=beta, gamma=gamma, n=n, l=l, dims=dims,
                   scalar_bytes=scalar_bytes, max_threads=max_threads,
                   warp_size=warp_size, segment_bytes=segment_bytes)

    def validate(self) -> None:
        g_x, g_y, g_z = self.grid
        b_x, b_y, b_z = self.block
        if min(g_x, g_y, g_z, b_x, b_y, b_z) < 1:
            raise ConfigurationError("grid and block dimensions must be >= 1")
        if b_x * b_y * b_z > self.max_threads:
            raise ConfigurationError(
                f"block holds {b_x * b_y * b_z} threads, limit is {self.max_threads}"
            )
        if b_x * self.gamma > self.beta:
            raise ConfigurationError(
                f"block stages {b_x} ground vectors of {self.gamma} bytes, "
                f"exceeding the {self.beta}-byte shared memory budget"
            )
        if g_x * b_x < self.n or g_y * b_y < self.l:
            raise ConfigurationError(
                f"grid {self.grid} x block {self.block} does not cover the "
                f"{self.l} x {self.n} work matrix"
            )


@dataclass(frozen=True)
class ThreadCoord:
    """Position of a simulated thread: block coordinates plus in-block offsets."""

    block: Tuple[int, int]
    thread: Tuple[int, int]

    def cell_indices(self, block_dims: Tuple[int, int]) -> Tuple[int, int]:
        """The (ground index i, set index j) work-matrix cell this thread owns."""
        b_x, b_y = block_dims
        i = b_x * self.block[0] + self.thread[0]
        j = b_y * self.block[1] + self.thread[1]
        return i, j


@dataclass
class WorkMatrix:
    """The l x N matrix of per-(set, ground vector) partial losses."""

    cells: np.ndarray

    def __post_init__(self):
        if self.cells.ndim != 2:
            raise ValueError("work matrix must be 2-D")
        if not np.all(np.isfinite(self.cells)):
            raise ValueError("work matrix contains non-finite cells")

    @property
    def rows(self) -> int:
        return self.cells.shape[0]

    @property
    def cols(self) -> int:
        return self.cells.shape[1]


def reduce_work_matrix(w: WorkMatrix) -> np.ndarray:
    """Per-row sums of the work matrix (the W . 1 reduction)."""
    return w.cells.sum(axis=1)


@dataclass
class DeviceTrace:
    """Observability for one simulated kernel launch."""

    shared_loads: List[int]        # global-to-shared vector loads, per block
    global_transactions: int       # segment transactions for evaluation-set reads
    cells_computed: int
    work_matrix: Optional[WorkMatrix] = None
    visit_counts: Optional[np.ndarray] = None  # per-cell compute counts


def _chunk_edges(n: int, parts: int) -> List[int]:
    return [(n * w) // parts for w in range(parts + 1)]


def evaluate_multiset_batched(f: EbcFunction, multiset: EvalMultiset,
                              threads: int = 1) -> np.ndarray:
    """Evaluate a multiset by partitioning the work matrix over a worker pool.

    The ground axis is split into ``threads`` contiguous chunks; each worker
    computes its chunk's cells and per-set partial sums in the requested
    arithmetic precision, and the partials are combined in partition order so
    results are reproducible for a given thread count. Values match the naive
    evaluator within precision tolerance.
    """
    if threads < 1:
        raise ValueError("threads must be >= 1")
    n = f.ground.n
    multiset.validate_indices(n)
    arith = f.ground.precision.compute_dtype
    v = f.ground.compute_view()
    e0 = f.e0.astype(arith)

    # Distance work is shared across duplicate references: distances are
    # computed once per distinct referenced ground vector, with the auxiliary
    # vector appended as one extra column. Padding set rows with that column
    # is harmless because every set implicitly contains it.
    distinct = sorted({i for s in multiset.sets for i in s})
    if distinct:
        refs = np.vstack([v[distinct], e0[None, :]])
    else:
        refs = e0[None, :].copy()
    refs = np.ascontiguousarray(refs, dtype=arith)
    e0_col = len(distinct)
    col_of = {idx: p for p, idx in enumerate(distinct)}
    width = multiset.max_len + 1
    set_cols = np.full((multiset.l, width), e0_col, dtype=np.int64)
    for j, s in enumerate(multiset.sets):
        if s:
            set_cols[j, :len(s)] = [col_of[i] for i in s]

    sub = max(1, _BLOCK_ELEMENTS // max(refs.shape[0], multiset.l * width, 1))

    def worker(bounds: Tuple[int, int]) -> np.ndarray:
        start, stop = bounds
        partial = np.zeros(multiset.l, dtype=arith)
        for s0 in range(start, stop, sub):
            s1 = min(s0 + sub, stop)
            dist = f.distance.cross_fast(v[s0:s1], refs)
            cells = dist[:, set_cols].min(axis=2)
            cells /= n
            partial += cells.sum(axis=0, dtype=arith)
        return partial

    edges = _chunk_edges(n, threads)
    chunks = [(edges[w], edges[w + 1]) for w in range(threads)]
    if threads == 1:
        partials = [worker(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(worker, chunks))

    totals = partials[0]
    for p in partials[1:]:
        totals = totals + p
    return f.baseline_loss - totals.astype(np.float64)


def _warp_set_transactions(j_lanes: np.ndarray, lens: np.ndarray,
                           l: int, max_len: int, dims: int,
                           scalar_bytes: int, segment_bytes: int) -> int:
    """Segment transactions one warp issues while reading its sets' elements.

    Lanes proceed in lockstep over (element rank, component) steps; a lane is
    masked once its set is exhausted. Addresses follow the interleaved
    layout's row-wise flattening.
    """
    if j_lanes.size == 0 or dims == 0:
        return 0
    lane_lens = lens[j_lanes]
    warp_max = int(lane_lens.max(initial=0))
    if warp_max == 0:
        return 0
    r = np.arange(warp_max)
    active = lane_lens[None, :] > r[:, None]                    # (R, lanes)
    base = r[:, None] * l + j_lanes[None, :]                    # (R, lanes)
    k = np.arange(dims).reshape(-1, 1, 1)
    seg = ((k * (l * max_len) + base[None, :, :]) * scalar_bytes) // segment_bytes
    seg = np.where(active[None, :, :], seg, -1)
    rows = np.sort(seg.reshape(dims * warp_max, j_lanes.size), axis=1)
    valid = rows >= 0
    is_new = np.empty_like(valid)
    is_new[:, 0] = valid[:, 0]
    is_new[:, 1:] = valid[:, 1:] & (rows[:, 1:] != rows[:, :-1])
    return int(is_new.sum())


def simulate_kernel(f: EbcFunction, interleaved: InterleavedEvalMatrix,
                    config: KernelConfig,
                    materialize: bool = False) -> Tuple[np.ndarray, DeviceTrace]:
    """Execute the evaluation kernel thread by thread in deterministic order.

    Blocks run in row-major grid order and warps in row-major thread order
    within a block. Per thread: derive the owned cell (i, j), stage the ground
    vector when t_y = 0, synchronize the block, take the running minimum over
    the set's elements plus the auxiliary vector, and emit d_min / N. Threads
    whose cell falls outside the work matrix are no-ops. Row sums accumulate
    in thread execution order (ascending i per row) in the arithmetic
    precision of the ground's mode.
    """
    n, dims = f.ground.n, f.ground.dims
    l = interleaved.l
    if interleaved.dims != dims:
        raise ConfigurationError(
            f"interleaved matrix dims {interleaved.dims} != ground dims {dims}"
        )
    config.validate()
    if config.n != n or config.l != l:
        raise ConfigurationError(
            f"config built for (n={config.n}, l={config.l}), "
            f"problem is (n={n}, l={l})"
        )
    if materialize and l * n > MATERIALIZE_CELL_CAP:
        raise ConfigurationError(
            f"refusing to materialize {l * n} cells (cap {MATERIALIZE_CELL_CAP}); "
            f"row sums stream instead"
        )

    arith = f.ground.precision.compute_dtype
    v = f.ground.compute_view()
    e0 = f.e0.astype(arith)
    lens = np.asarray(interleaved.set_lengths, dtype=np.int64)

    # The auxiliary vector joins every set as an implicit first element; set
    # vectors are read back from the interleaved cells, not from the ground.
    set_refs = []
    for j in range(l):
        if lens[j]:
            set_refs.append(np.vstack([e0[None, :],
                                       interleaved.set_vectors(j).astype(arith)]))
        else:
            set_refs.append(e0[None, :])

    b_x, b_y = config.block[0], config.block[1]
    g_x, g_y = config.grid[0], config.grid[1]

    track_cells = l * n <= MATERIALIZE_CELL_CAP
    w_cells = np.zeros((l, n), dtype=arith) if materialize else None
    visits = np.zeros((l, n), dtype=np.uint32) if track_cells else None
    row_sums = np.zeros(l, dtype=arith)
    shared_loads: List[int] = []
    cells_computed = 0
    transactions = 0

    tids = np.arange(b_x * b_y)
    warp_tx = tids // b_y
    warp_ty = tids % b_y

    for by_star in range(g_y):
        j_base = b_y * by_star
        for bx_star in range(g_x):
            i_base = b_x * bx_star
            # Load phase: each t_y = 0 thread with a valid ground index stages
            # its vector exactly once; the block barrier sits between phases.
            staged_rows = min(b_x, n - i_base)
            shared_loads.append(max(staged_rows, 0))
            shared = v[i_base:i_base + max(staged_rows, 0)]

            for w_start in range(0, b_x * b_y, config.warp_size):
                lane_tx = warp_tx[w_start:w_start + config.warp_size]
                lane_ty = warp_ty[w_start:w_start + config.warp_size]
                lane_i = i_base + lane_tx
                lane_j = j_base + lane_ty
                in_range = (lane_i < n) & (lane_j < l)
                transactions += _warp_set_transactions(
                    lane_j[in_range], lens, l, interleaved.max_len, dims,
                    interleaved.scalar_bytes, config.segment_bytes)
                for i, j, tx in zip(lane_i[in_range].tolist(),
                                    lane_j[in_range].tolist(),
                                    lane_tx[in_range].tolist()):
                    vec = shared[tx]
                    diff = set_refs[j] - vec
                    d_min = np.einsum("ij,ij->i", diff, diff).min()
                    cell = d_min / n
                    row_sums[j] += cell
                    if w_cells is not None:
                        w_cells[j, i] = cell
                    if visits is not None:
                        visits[j, i] += 1
                    cells_computed += 1

    values = f.baseline_loss - row_sums.astype(np.float64)
    trace = DeviceTrace(
        shared_loads=shared_loads,
        global_transactions=transactions,
        cells_computed=cells_computed,
        work_matrix=WorkMatrix(w_cells) if materialize else None,
        visit_counts=visits,
    )
    return values, trace
