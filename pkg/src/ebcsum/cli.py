"""Command line entry points: summarize a CSV dataset, benchmark backends,
generate the synthetic case-study surrogate, and audit memory layouts.

Exit codes are a stable scripting contract: 0 success, 1 usage error,
2 data/configuration error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .batched import ConfigurationError, KernelConfig
from .bench import (DEFAULT_AXIS_VALUES, SWEEP_AXES, ProblemSpec,
                    generate_problem, emit_report, run_sweep)
from .core import GroundMatrix, Precision, make_auxiliary_vector
from .ebc import EbcFunction
from .layout import CoalescingDominanceError, audit_layouts
from .optimize import OptimizerBudget, greedy_maximize, sieve_stream_maximize

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

THREADS_ENV = "EBCSUM_THREADS"


class CsvParseError(ValueError):
    """A CSV cell or row that cannot be turned into finite numbers."""


@dataclass
class TimeSeriesDataset:
    """Rectangular numeric time-series data parsed from CSV, one row per cycle."""

    series: np.ndarray
    header: Optional[List[str]]
    source: str

    @property
    def n(self) -> int:
        return self.series.shape[0]

    @property
    def dims(self) -> int:
        return self.series.shape[1]


def load_csv(path, has_header: bool = False,
             normalize: bool = False) -> TimeSeriesDataset:
    """Parse a comma-separated numeric matrix.

    Rows must be rectangular and every cell a finite real; violations raise
    :class:`CsvParseError` naming the 1-based row (and column). With
    ``normalize`` set, each column is z-scored with the population standard
    deviation; constant columns are left at zero.
    """
    rows: List[List[float]] = []
    header: Optional[List[str]] = None
    width: Optional[int] = None
    with open(path, newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if has_header and header is None:
                header = [tok.strip() for tok in row]
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise CsvParseError(
                    f"row {line_no}: expected {width} columns, got {len(row)}"
                )
            parsed = []
            for col_no, tok in enumerate(row, start=1):
                try:
                    value = float(tok)
                except ValueError:
                    raise CsvParseError(
                        f"row {line_no}, column {col_no}: not a number: {tok.strip()!r}"
                    ) from None
                if not math.isfinite(value):
                    raise CsvParseError(
                        f"row {line_no}, column {col_no}: non-finite value {tok.strip()!r}"
                    )
                parsed.append(value)
            rows.append(parsed)
    if not rows:
        raise CsvParseError(f"{path}: no data rows")
    series = np.array(rows, dtype=np.float64)
    if normalize:
        mu = series.mean(axis=0)
        sd = series.std(axis=0)
        out = np.zeros_like(series)
        nonzero = sd > 0
        out[:, nonzero] = (series[:, nonzero] - mu[nonzero]) / sd[nonzero]
        series = out
    return TimeSeriesDataset(series=series, header=header, source=str(path))


@dataclass(frozen=True)
class SurrogateSpec:
    """Shape of the synthetic multi-regime process dataset."""

    n_cycles: int = 1000
    dims: int = 100
    n_regimes: int = 5
    cycles_per_regime: int = 200
    noise_scale: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if min(self.n_cycles, self.dims, self.n_regimes, self.cycles_per_regime) < 1:
            raise ValueError("all surrogate counts must be >= 1")
        if self.n_regimes * self.cycles_per_regime != self.n_cycles:
            raise ValueError(
                f"n_regimes * cycles_per_regime must equal n_cycles "
                f"({self.n_regimes} * {self.cycles_per_regime} != {self.n_cycles})"
            )
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be >= 0")


def _regime_curve(dims: int, regime: int) -> np.ndarray:
    """Smooth pressure-like base curve for one process regime.

    Shaped like a molding cycle: steep rise, decaying hold phase, a lower
    back-pressure plateau, then decompression. Peak level, hold duration and
    plateau level all shift with the regime so regimes are mutually well
    separated, not just scaled copies of each other.
    """
    t = np.linspace(0.0, 1.0, dims)
    peak = 1.0 + 0.3 * regime
    hold_end = 0.42 + 0.04 * regime
    plateau = 0.25 + 0.06 * regime
    curve = np.zeros(dims)
    rise = t < 0.12
    curve[rise] = peak * t[rise] / 0.12
    hold = (t >= 0.12) & (t < hold_end)
    curve[hold] = peak * (1.0 - 0.45 * (t[hold] - 0.12) / (hold_end - 0.12))
    plast = (t >= hold_end) & (t < 0.85)
    curve[plast] = plateau
    tail = t >= 0.85
    curve[tail] = plateau * np.exp(-(t[tail] - 0.85) / 0.05)
    return curve


def generate_surrogate(spec: SurrogateSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Build the surrogate matrix and its per-row regime labels.

    Rows come in regime-ordered blocks; every row is its regime's base curve
    plus i.i.d. Gaussian noise of the requested scale.
    """
    rng = np.random.default_rng(spec.seed)
    blocks = []
    labels = np.repeat(np.arange(spec.n_regimes), spec.cycles_per_regime)
    for regime in range(spec.n_regimes):
        base = _regime_curve(spec.dims, regime)
        noise = rng.normal(0.0, spec.noise_scale,
                           size=(spec.cycles_per_regime, spec.dims))
        blocks.append(base[None, :] + noise if spec.noise_scale > 0
                      else np.tile(base, (spec.cycles_per_regime, 1)))
    return np.vstack(blocks), labels


def surrogate_labels_path(output: str) -> str:
    p = Path(output)
    return str(p.with_name(p.stem + "_labels" + (p.suffix or ".csv")))


def write_surrogate(spec: SurrogateSpec, output: str) -> Tuple[str, str]:
    """Write the surrogate CSV plus the regime-label sidecar; returns both paths."""
    matrix, labels = generate_surrogate(spec)
    np.savetxt(output, matrix, delimiter=",", fmt="%.17g")
    labels_path = surrogate_labels_path(output)
    np.savetxt(labels_path, labels, fmt="%d")
    return output, labels_path


def _default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover
        return os.cpu_count() or 1


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _int_list(text: str) -> List[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ebcsum",
                     description="Exemplar-based data summarization toolkit")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("summarize", help="select k representatives from a CSV")
    p.add_argument("input", help="CSV file, one observation per row")
    p.add_argument("-k", type=_positive_int, required=True,
                   help="summary size (>= 1)")
    p.add_argument("--optimizer", choices=("greedy", "sieve"), default="greedy")
    p.add_argument("--backend", choices=("naive", "batched", "device-sim"),
                   default="batched")
    p.add_argument("--precision", choices=[m.value for m in Precision],
                   default="fp64")
    p.add_argument("--e0-kind", choices=("zero", "mean"), default="zero",
                   help="auxiliary anchor vector (mean is sane after --normalize)")
    p.add_argument("--epsilon", type=float, default=0.1,
                   help="sieve threshold grid resolution")
    p.add_argument("--seed", type=int, default=0,
                   help="stream order seed for the sieve optimizer")
    p.add_argument("--threads", type=_positive_int, default=None)
    p.add_argument("--header", action="store_true",
                   help="first CSV row is a header")
    p.add_argument("--normalize", action="store_true",
                   help="z-score each column before summarizing")
    p.add_argument("--output", default=None, help="JSON output path (default stdout)")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("bench", help="sweep one axis and report runtimes/speedups")
    p.add_argument("--axis", choices=SWEEP_AXES, default="N")
    p.add_argument("--values", type=_int_list, default=None,
                   help="comma-separated axis values (defaults per axis)")
    p.add_argument("--n", type=_positive_int, default=50000)
    p.add_argument("--l", type=_positive_int, default=5000)
    p.add_argument("-k", type=_positive_int, default=10)
    p.add_argument("--dims", type=_positive_int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--precision", choices=[m.value for m in Precision],
                   default="fp32")
    p.add_argument("--backends", default="batched:1",
                   help="comma list of name[:threads], e.g. naive,batched:4")
    p.add_argument("--repeats", type=_positive_int, default=15)
    p.add_argument("--format", choices=("csv", "markdown"), default="csv")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("surrogate", help="generate the synthetic case-study dataset")
    p.add_argument("--cycles", type=_positive_int, default=1000)
    p.add_argument("--dims", type=_positive_int, default=100)
    p.add_argument("--regimes", type=_positive_int, default=5)
    p.add_argument("--cycles-per-regime", type=_positive_int, default=200)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True, help="CSV output path")
    p.set_defaults(func=cmd_surrogate)

    p = sub.add_parser("layout-audit",
                       help="compare interleaved vs contiguous layout transactions")
    p.add_argument("--n", type=_positive_int, default=50000)
    p.add_argument("--l", type=_positive_int, default=5000)
    p.add_argument("-k", type=_positive_int, default=10)
    p.add_argument("--dims", type=_positive_int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--precision", choices=[m.value for m in Precision],
                   default="fp32")
    p.set_defaults(func=cmd_layout_audit)

    return parser


def cmd_summarize(args) -> int:
    dataset = load_csv(args.input, has_header=args.header,
                       normalize=args.normalize)
    precision = Precision.parse(args.precision)
    ground = GroundMatrix(dataset.series, precision)
    if args.k > ground.n:
        raise ValueError(f"k={args.k} exceeds the {ground.n} rows of {args.input}")
    e0 = make_auxiliary_vector(ground.dims,
                               "zero" if args.e0_kind == "zero" else "mean",
                               ground)
    f = EbcFunction(ground, e0)
    threads = args.threads if args.threads else _default_threads()
    if args.optimizer == "greedy":
        budget = OptimizerBudget(k=args.k, backend=args.backend, threads=threads)
        summary = greedy_maximize(f, budget)
    else:
        stream = np.random.default_rng(args.seed).permutation(ground.n)
        summary = sieve_stream_maximize(stream, f, args.k, epsilon=args.epsilon)
    doc = {
        "k": args.k,
        "selected_indices": [int(i) for i in summary.selected],
        "function_value": summary.value,
        "gains": [float(g) for g in summary.gains],
        "backend": args.backend,
        "precision": precision.value,
        "runtime_seconds": summary.runtime_seconds,
    }
    text = json.dumps(doc, indent=2) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_bench(args) -> int:
    values = args.values if args.values else DEFAULT_AXIS_VALUES[args.axis]
    base = ProblemSpec(n=args.n, l=args.l, k=args.k, dims=args.dims,
                       seed=args.seed, precision=Precision.parse(args.precision))
    backends = [tok.strip() for tok in args.backends.split(",") if tok.strip()]
    report = run_sweep(args.axis, values, base, backends, repeats=args.repeats)
    text = emit_report(report, format=args.format)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_surrogate(args) -> int:
    spec = SurrogateSpec(n_cycles=args.cycles, dims=args.dims,
                         n_regimes=args.regimes,
                         cycles_per_regime=args.cycles_per_regime,
                         noise_scale=args.noise, seed=args.seed)
    data_path, labels_path = write_surrogate(spec, args.output)
    print(f"wrote {spec.n_cycles}x{spec.dims} surrogate to {data_path}")
    print(f"wrote regime labels to {labels_path}")
    return EXIT_OK


def cmd_layout_audit(args) -> int:
    precision = Precision.parse(args.precision)
    spec = ProblemSpec(n=args.n, l=args.l, k=args.k, dims=args.dims,
                       seed=args.seed, precision=precision)
    ground, multiset = generate_problem(spec)
    config = KernelConfig.for_problem(ground.n, multiset.l, ground.dims,
                                      precision.scalar_bytes)
    report = audit_layouts(multiset, config)
    print(f"kernel config: b_x={config.block[0]} b_y={config.block[1]} "
          f"g_x={config.grid[0]} g_y={config.grid[1]} "
          f"beta={config.beta} gamma={config.gamma}")
    print(f"interleaved transactions: {report.interleaved_transactions}")
    print(f"contiguous transactions: {report.contiguous_transactions}")
    print(f"contiguous/interleaved ratio: {report.ratio:.3f}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help and friends
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (CsvParseError, ConfigurationError, CoalescingDominanceError,
            ValueError, IndexError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
