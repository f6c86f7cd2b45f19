"""ebcsum: exemplar-based clustering data summarization.

Selects k representative observations from a dataset by maximizing the
exemplar-based clustering objective, with a naive reference evaluator, a
multi-threaded batched work-matrix backend, a deterministic device-model
simulator, memory-layout analysis, optimizers, and a benchmark harness.
"""

from .core import (EvalMultiset, GroundMatrix, Precision, SquaredEuclidean,
                   Summary, make_auxiliary_vector, squared_euclidean)
from .ebc import EbcFunction, evaluate_multiset_naive, k_medoids_loss
from .batched import (ConfigurationError, DeviceTrace, KernelConfig,
                      WorkMatrix, compute_block_dims, compute_grid_dims,
                      evaluate_multiset_batched, reduce_work_matrix,
                      simulate_kernel)
from .layout import (AccessTrace, CoalescingDominanceError,
                     InterleavedEvalMatrix, LayoutCorruptionError,
                     audit_layouts, count_memory_transactions, deinterleave,
                     devectorize_ground, interleave_eval_sets, vectorize_ground)
from .optimize import (OptimizerBudget, brute_force_opt, evaluate_with_backend,
                       greedy_maximize, sieve_stream_maximize)
from .bench import (ProblemSpec, SweepReport, emit_report, generate_problem,
                    run_sweep)

__version__ = "0.1.0"

__all__ = [
    "EvalMultiset", "GroundMatrix", "Precision", "SquaredEuclidean", "Summary",
    "make_auxiliary_vector", "squared_euclidean",
    "EbcFunction", "evaluate_multiset_naive", "k_medoids_loss",
    "ConfigurationError", "DeviceTrace", "KernelConfig", "WorkMatrix",
    "compute_block_dims", "compute_grid_dims", "evaluate_multiset_batched",
    "reduce_work_matrix", "simulate_kernel",
    "AccessTrace", "CoalescingDominanceError", "InterleavedEvalMatrix",
    "LayoutCorruptionError", "audit_layouts", "count_memory_transactions",
    "deinterleave", "devectorize_ground", "interleave_eval_sets",
    "vectorize_ground",
    "OptimizerBudget", "brute_force_opt", "evaluate_with_backend",
    "greedy_maximize", "sieve_stream_maximize",
    "ProblemSpec", "SweepReport", "emit_report", "generate_problem",
    "run_sweep",
]
