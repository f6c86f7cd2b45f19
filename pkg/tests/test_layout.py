import numpy as np
import pytest

from ebcsum import (AccessTrace, CoalescingDominanceError, EvalMultiset,
                    GroundMatrix, KernelConfig, LayoutCorruptionError,
                    Precision, audit_layouts, count_memory_transactions,
                    deinterleave, devectorize_ground, interleave_eval_sets,
                    vectorize_ground)
from conftest import random_audit_instance, random_instance


def fig_multiset():
    """Three sets with four, three and five elements over a dims=2 ground."""
    g = GroundMatrix(np.arange(24, dtype=float).reshape(12, 2))
    ms = EvalMultiset([[0, 1, 2, 3], [4, 5, 6], [7, 8, 9, 10, 11]])
    return g, ms


class TestGroundVectorization:
    def test_column_major_order(self):
        g = GroundMatrix([[1.0, 3.0], [2.0, 4.0]])
        assert vectorize_ground(g).tolist() == [1.0, 2.0, 3.0, 4.0]

    def test_single_row(self):
        g = GroundMatrix([[5.0, 6.0, 7.0]])
        assert vectorize_ground(g).tolist() == [5.0, 6.0, 7.0]

    def test_round_trip_bit_identical(self):
        rng = np.random.default_rng(1)
        for precision in Precision:
            g = GroundMatrix(rng.random((17, 5)), precision)
            back = devectorize_ground(vectorize_ground(g), g.n, g.dims)
            assert np.array_equal(back, g.data)

    def test_single_contiguous_buffer(self):
        g = GroundMatrix(np.random.default_rng(2).random((8, 3)))
        buf = vectorize_ground(g)
        assert buf.ndim == 1 and buf.flags["C_CONTIGUOUS"]

    def test_size_mismatch(self):
        with pytest.raises(ValueError, match="scalars"):
            devectorize_ground(np.zeros(5), 2, 3)


class TestInterleaving:
    def test_fig_fixture_column_sequence(self):
        g, ms = fig_multiset()
        inter = interleave_eval_sets(ms, g)
        assert inter.columns == 15
        # (set, rank) per column; unoccupied columns carry None
        got = [inter.column_owner(c) if inter.occupancy[c] else None
               for c in range(inter.columns)]
        want = [(0, 0), (1, 0), (2, 0),
                (0, 1), (1, 1), (2, 1),
                (0, 2), (1, 2), (2, 2),
                (0, 3), None, (2, 3),
                None, None, (2, 4)]
        assert got == want

    def test_cells_hold_the_right_vectors(self):
        g, ms = fig_multiset()
        inter = interleave_eval_sets(ms, g)
        # column 4 is rank 1 of set 1, i.e. ground row 5
        assert inter.cells[:, 4].tolist() == g.data[5].tolist()
        assert np.isnan(inter.cells[:, 10]).all()

    def test_occupied_cell_count(self):
        g, ms = fig_multiset()
        inter = interleave_eval_sets(ms, g)
        assert int(inter.occupancy.sum()) * inter.dims == sum(ms.lengths) * g.dims

    def test_single_set_keeps_element_order(self):
        g = GroundMatrix(np.arange(10, dtype=float).reshape(5, 2))
        inter = interleave_eval_sets(EvalMultiset([[3, 1, 4]]), g)
        assert inter.source_indices.tolist() == [3, 1, 4]

    def test_address_formula(self):
        g, ms = fig_multiset()
        inter = interleave_eval_sets(ms, g)
        s = inter.scalar_bytes
        assert inter.address_of(0, 0) == 0
        assert inter.address_of(0, 7) == 7 * s
        assert inter.address_of(1, 2) == (1 * 15 + 2) * s

    def test_single_contiguous_allocation(self):
        g, ms = fig_multiset()
        inter = interleave_eval_sets(ms, g)
        assert inter.cells.flags["C_CONTIGUOUS"]

    def test_round_trip_fig_fixture(self):
        g, ms = fig_multiset()
        back = deinterleave(interleave_eval_sets(ms, g))
        assert back.sets == ms.sets

    def test_round_trip_all_empty(self):
        g = GroundMatrix([[1.0], [2.0]])
        ms = EvalMultiset([[], [], []])
        back = deinterleave(interleave_eval_sets(ms, g))
        assert back.sets == [[], [], []]

    def test_round_trip_random(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            ground, ms = random_instance(rng, n_max=40, dims_max=6, l_max=12,
                                         size_max=7)
            back = deinterleave(interleave_eval_sets(ms, ground))
            assert back.sets == ms.sets

    def test_deinterleave_detects_corruption(self):
        g, ms = fig_multiset()
        inter = interleave_eval_sets(ms, g)
        inter.occupancy[10] = True  # claims a cell set 1 never filled
        with pytest.raises(LayoutCorruptionError, match="set 1"):
            deinterleave(inter)


class TestTransactionCounting:
    def test_consecutive_floats_coalesce(self):
        trace = AccessTrace([(0, np.arange(8) * 4)])
        assert count_memory_transactions(trace, 32) == [1]

    def test_strided_accesses_do_not(self):
        trace = AccessTrace([(0, np.arange(8) * 32)])
        assert count_memory_transactions(trace, 32) == [8]

    def test_empty_step(self):
        trace = AccessTrace([(0, np.array([], dtype=np.int64))])
        assert count_memory_transactions(trace, 32) == [0]

    def test_segment_bytes_must_be_positive(self):
        with pytest.raises(ValueError):
            count_memory_transactions(AccessTrace([]), 0)


class TestLayoutAudit:
    def test_singleton_sets_fill_warp(self):
        # 32 singleton sets, dims=1, fp32: 32 lanes read 4-byte values packed
        # into 128 consecutive bytes, i.e. exactly 4 segments per step.
        g = GroundMatrix(np.arange(32, dtype=float).reshape(32, 1), Precision.FP32)
        ms = EvalMultiset([[i] for i in range(32)])
        cfg = KernelConfig.for_problem(g.n, ms.l, g.dims, 4)
        report = audit_layouts(ms, cfg)
        assert np.all(report.interleaved_step_counts == 4)
        assert report.interleaved_transactions <= report.contiguous_transactions

    def test_single_set_layouts_identical(self):
        g = GroundMatrix(np.random.default_rng(4).random((10, 3)), Precision.FP32)
        ms = EvalMultiset([[0, 2, 4]])
        report = audit_layouts(ms, KernelConfig.for_problem(g.n, 1, g.dims, 4))
        assert report.interleaved_transactions == report.contiguous_transactions
        assert report.ratio == 1.0

    def test_interleaved_never_worse_in_batched_regime(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            ground, ms = random_audit_instance(rng)
            cfg = KernelConfig.for_problem(ground.n, ms.l, ground.dims, 4)
            report = audit_layouts(ms, cfg)
            assert report.interleaved_transactions <= report.contiguous_transactions
            assert report.ratio >= 1.0

    def test_per_step_dominance_with_aligned_rank_rows(self):
        # with l * scalar_bytes a multiple of the segment size, every rank row
        # starts on a segment boundary and dominance holds step by step
        rng = np.random.default_rng(6)
        for _ in range(30):
            ground, ms = random_audit_instance(rng, aligned=True)
            cfg = KernelConfig.for_problem(ground.n, ms.l, ground.dims, 4)
            report = audit_layouts(ms, cfg)
            assert np.all(report.interleaved_step_counts
                          <= report.contiguous_step_counts)

    def test_degenerate_tiny_multiset_raises_typed_error(self):
        # fewer sets than fill one segment: rank rows start misaligned and the
        # compact contiguous layout can win by one transaction
        g = GroundMatrix(np.arange(3, dtype=float).reshape(3, 1), Precision.FP32)
        ms = EvalMultiset([[0, 1], [2], [0], [1, 2], [0, 1, 2]])
        cfg = KernelConfig.for_problem(3, 5, 1, 4)
        with pytest.raises(CoalescingDominanceError, match="below the"):
            audit_layouts(ms, cfg)
