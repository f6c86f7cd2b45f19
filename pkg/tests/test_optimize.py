import math

import numpy as np
import pytest

from ebcsum import (EbcFunction, GroundMatrix, OptimizerBudget,
                    brute_force_opt, greedy_maximize, sieve_stream_maximize)
from conftest import random_instance


class TestBudget:
    def test_validation(self):
        with pytest.raises(ValueError):
            OptimizerBudget(k=0)
        with pytest.raises(ValueError):
            OptimizerBudget(k=1, threads=0)
        with pytest.raises(ValueError, match="backend"):
            OptimizerBudget(k=1, backend="gpu")


class TestGreedy:
    def test_three_point_fixture(self, three_point_ground):
        f = EbcFunction(three_point_ground)
        summary = greedy_maximize(f, OptimizerBudget(k=1))
        assert summary.selected == [2]  # the (5, 5) row
        assert summary.value == pytest.approx(50.0 / 3.0, rel=1e-12)

    def test_full_budget_recovers_baseline(self):
        rng = np.random.default_rng(1)
        g = GroundMatrix(rng.random((12, 3)))
        f = EbcFunction(g)
        summary = greedy_maximize(f, OptimizerBudget(k=12))
        assert summary.value == pytest.approx(f.baseline_loss, rel=1e-12)
        assert sorted(summary.selected) == list(range(12))

    def test_tie_breaks_to_lower_index(self):
        g = GroundMatrix([[3.0, 3.0], [1.0, 1.0], [3.0, 3.0]])
        f = EbcFunction(g)
        summary = greedy_maximize(f, OptimizerBudget(k=1))
        assert summary.selected == [0]

    def test_rejects_oversized_budget(self, three_point_ground):
        f = EbcFunction(three_point_ground)
        with pytest.raises(ValueError, match="exceeds"):
            greedy_maximize(f, OptimizerBudget(k=4))

    def test_gains_non_increasing_and_sum_to_value(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            ground, _ = random_instance(rng, n_max=20, dims_max=5, l_max=1)
            f = EbcFunction(ground)
            k = int(rng.integers(1, min(6, ground.n) + 1))
            summary = greedy_maximize(f, OptimizerBudget(k=k))
            gains = summary.gains
            assert all(gains[i] >= gains[i + 1] - 1e-9
                       for i in range(len(gains) - 1))
            assert math.fsum(gains) == pytest.approx(summary.value, abs=1e-12)

    def test_value_matches_reevaluation(self):
        rng = np.random.default_rng(3)
        ground, _ = random_instance(rng, n_max=25, dims_max=6, l_max=1)
        f = EbcFunction(ground)
        summary = greedy_maximize(f, OptimizerBudget(k=3))
        assert f.value(summary.selected) == pytest.approx(summary.value, rel=1e-12)

    def test_no_duplicate_selections(self):
        rng = np.random.default_rng(4)
        ground, _ = random_instance(rng, n_max=15, dims_max=4, l_max=1)
        f = EbcFunction(ground)
        summary = greedy_maximize(f, OptimizerBudget(k=min(8, ground.n)))
        assert len(set(summary.selected)) == len(summary.selected)

    @pytest.mark.parametrize("backend", ["batched", "device-sim"])
    def test_backend_independent_selection(self, backend):
        rng = np.random.default_rng(5)
        for _ in range(8):
            ground, _ = random_instance(rng, n_max=12, dims_max=4, l_max=1)
            f = EbcFunction(ground)
            k = int(rng.integers(1, min(4, ground.n) + 1))
            reference = greedy_maximize(f, OptimizerBudget(k=k))
            other = greedy_maximize(f, OptimizerBudget(k=k, backend=backend,
                                                       threads=2))
            assert other.selected == reference.selected
            assert other.value == pytest.approx(reference.value, rel=1e-9)

    def test_evaluation_count(self, three_point_ground):
        f = EbcFunction(three_point_ground)
        summary = greedy_maximize(f, OptimizerBudget(k=2))
        assert summary.evaluations == 3 + 2


class TestBruteForce:
    def test_k1_is_best_singleton(self, three_point_ground):
        f = EbcFunction(three_point_ground)
        best = max(f.value([i]) for i in range(3))
        summary = brute_force_opt(f, 1)
        assert summary.value == best
        assert summary.selected == [2]

    def test_three_point_k2_contains_far_point(self, three_point_ground):
        f = EbcFunction(three_point_ground)
        summary = brute_force_opt(f, 2)
        assert 2 in summary.selected

    def test_never_below_greedy(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            ground, _ = random_instance(rng, n_max=10, dims_max=4, l_max=1)
            f = EbcFunction(ground)
            k = int(rng.integers(1, min(3, ground.n) + 1))
            greedy = greedy_maximize(f, OptimizerBudget(k=k))
            brute = brute_force_opt(f, k)
            assert brute.value >= greedy.value

    def test_guard_refuses_large_instances(self):
        g = GroundMatrix(np.zeros((60, 1)))
        f = EbcFunction(g)
        with pytest.raises(ValueError, match="cap"):
            brute_force_opt(f, 12)  # C(60, 12) is far beyond the cap


class TestSieveStreaming:
    def test_single_element_stream(self, three_point_ground):
        f = EbcFunction(three_point_ground)
        summary = sieve_stream_maximize([1], f, k=1)
        assert summary.selected == [1]
        assert summary.value == pytest.approx(f.value([1]), rel=1e-12)

    def test_empty_stream(self, three_point_ground):
        f = EbcFunction(three_point_ground)
        summary = sieve_stream_maximize([], f, k=2)
        assert summary.selected == []
        assert summary.value == 0.0

    def test_respects_capacity(self):
        rng = np.random.default_rng(7)
        ground, _ = random_instance(rng, n_max=20, dims_max=4, l_max=1)
        f = EbcFunction(ground)
        summary = sieve_stream_maximize(range(ground.n), f, k=3)
        assert len(summary.selected) <= 3
        assert len(set(summary.selected)) == len(summary.selected)

    def test_epsilon_validation(self, three_point_ground):
        f = EbcFunction(three_point_ground)
        with pytest.raises(ValueError, match="epsilon"):
            sieve_stream_maximize([0], f, k=1, epsilon=1.5)

    def test_guarantee_against_brute_force(self):
        rng = np.random.default_rng(8)
        for _ in range(15):
            ground, _ = random_instance(rng, n_max=10, dims_max=4, l_max=1)
            f = EbcFunction(ground)
            k = int(rng.integers(1, min(3, ground.n) + 1))
            opt = brute_force_opt(f, k)
            got = sieve_stream_maximize(range(ground.n), f, k, epsilon=0.1)
            assert got.value >= (0.5 - 0.1) * opt.value - 1e-9

    def test_value_matches_reevaluation(self):
        rng = np.random.default_rng(9)
        ground, _ = random_instance(rng, n_max=15, dims_max=4, l_max=1)
        f = EbcFunction(ground)
        summary = sieve_stream_maximize(range(ground.n), f, k=3)
        assert f.value(summary.selected) == pytest.approx(summary.value, abs=1e-9)
