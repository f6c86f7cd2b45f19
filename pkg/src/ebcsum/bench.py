"""Randomized problem generation, wall-clock measurement, and the N/l/k sweep
with min/mean/max speedup reporting."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from statistics import mean
from typing import Dict, List, Sequence, Tuple

import numpy as np
from threadpoolctl import threadpool_limits

from .core import EvalMultiset, GroundMatrix, Precision
from .ebc import EbcFunction
from .optimize import BACKENDS, evaluate_with_backend

SWEEP_AXES = ("N", "l", "k")

# Default sweep values per axis; override with any ascending list.
DEFAULT_AXIS_VALUES = {
    "N": list(range(1000, 400001, 28500)),
    "l": [int(round(x)) for x in np.linspace(1000, 26070, 10)],
    "k": list(range(10, 431, 35)),
}


@dataclass(frozen=True)
class ProblemSpec:
    """Everything needed to regenerate one random problem."""

    n: int
    l: int
    k: int
    dims: int
    seed: int = 0
    precision: Precision = Precision.FP32

    def __post_init__(self):
        for name in ("n", "l", "k", "dims"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.k > self.n:
            raise ValueError(f"k={self.k} exceeds n={self.n}")

    def with_axis(self, axis: str, value: int) -> "ProblemSpec":
        field_name = {"N": "n", "l": "l", "k": "k"}[axis]
        return replace(self, **{field_name: int(value)})


def generate_problem(spec: ProblemSpec) -> Tuple[GroundMatrix, EvalMultiset]:
    """Generate the random problem a spec describes.

    Ground cells are i.i.d. uniform[0, 1); each of the l sets holds k distinct
    uniform indices. Pure function of its arguments: same seed, same problem.
    Generation never runs inside a timed region.
    """
    rng = np.random.default_rng(spec.seed)
    data = rng.random((spec.n, spec.dims))
    ground = GroundMatrix(data, spec.precision)
    sets = [rng.choice(spec.n, size=spec.k, replace=False).tolist()
            for _ in range(spec.l)]
    return ground, EvalMultiset(sets)


def parse_backend_spec(text: str) -> Tuple[str, int]:
    """Parse 'name' or 'name:threads' backend specs used by sweeps and the CLI."""
    name, _, threads_part = text.partition(":")
    threads = 1
    if threads_part:
        threads = int(threads_part)
        if threads < 1:
            raise ValueError(f"thread count must be >= 1 in {text!r}")
    if name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}; expected one of {BACKENDS}")
    return name, threads


@dataclass
class SpeedupAggregate:
    """Min/mean/max of baseline_runtime / subject_runtime over all samples."""

    baseline: str
    subject: str
    min: float
    mean: float
    max: float


@dataclass
class SweepReport:
    axis: str
    values: List[int]
    backends: List[str]
    repeats: int
    runtimes: Dict[Tuple[int, str], List[float]] = field(default_factory=dict)
    comparisons: List[SpeedupAggregate] = field(default_factory=list)

    def median_runtime(self, value: int, backend: str) -> float:
        return float(np.median(self.runtimes[(value, backend)]))


def _aggregate_speedups(report: SweepReport) -> List[SpeedupAggregate]:
    out = []
    for baseline in report.backends:
        for subject in report.backends:
            samples = []
            for value in report.values:
                base_rts = report.runtimes[(value, baseline)]
                subj_rts = report.runtimes[(value, subject)]
                samples.extend(b / s for b, s in zip(base_rts, subj_rts))
            out.append(SpeedupAggregate(baseline=baseline, subject=subject,
                                        min=min(samples), mean=mean(samples),
                                        max=max(samples)))
    return out


def run_sweep(axis: str, values: Sequence[int], base: ProblemSpec,
              backends: Sequence[str], repeats: int = 15) -> SweepReport:
    """Measure every backend at every swept value, repeats times each.

    Holds the other problem parameters at the base spec. Timers wrap only the
    evaluate call; generation and objective construction happen outside. BLAS
    pools are pinned to one thread inside the timed region so backend thread
    counts are the only parallelism under measurement.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}")
    if list(values) != sorted(values):
        raise ValueError("sweep values must be sorted ascending")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    parsed = [(spec_text, *parse_backend_spec(spec_text)) for spec_text in backends]

    report = SweepReport(axis=axis, values=[int(v) for v in values],
                         backends=[p[0] for p in parsed], repeats=repeats)
    for value in report.values:
        spec = base.with_axis(axis, value)
        ground, multiset = generate_problem(spec)
        f = EbcFunction(ground)
        with threadpool_limits(limits=1):
            for label, name, threads in parsed:
                runtimes = []
                for _ in range(repeats):
                    t0 = time.perf_counter()
                    evaluate_with_backend(f, multiset, name, threads)
                    runtimes.append(time.perf_counter() - t0)
                report.runtimes[(value, label)] = runtimes
    report.comparisons = _aggregate_speedups(report)
    return report


def emit_report(report: SweepReport, format: str = "csv") -> str:
    """Render a sweep report as CSV (raw runs + aggregate block) or markdown."""
    if not report.runtimes:
        raise ValueError("report holds no measurements")
    if format == "csv":
        lines = ["axis,value,backend,run,runtime_seconds"]
        for value in report.values:
            for backend in report.backends:
                for run, rt in enumerate(report.runtimes[(value, backend)]):
                    lines.append(f"{report.axis},{value},{backend},{run},{rt:.9f}")
        lines.append("")
        lines.append("baseline,subject,min_speedup,mean_speedup,max_speedup")
        for c in report.comparisons:
            lines.append(f"{c.baseline},{c.subject},{c.min:.6f},{c.mean:.6f},{c.max:.6f}")
        return "\n".join(lines) + "\n"
    if format == "markdown":
        lines = [f"## Sweep over {report.axis} ({report.repeats} runs per value)",
                 ""]
        header = "| " + report.axis + " | " + " | ".join(report.backends) + " |"
        lines.append(header)
        lines.append("|" + "---|" * (len(report.backends) + 1))
        for value in report.values:
            medians = [f"{report.median_runtime(value, b):.6f} s"
                       for b in report.backends]
            lines.append(f"| {value} | " + " | ".join(medians) + " |")
        lines.append("")
        lines.append("| baseline | subject | min | mean | max |")
        lines.append("|---|---|---|---|---|")
        for c in report.comparisons:
            lines.append(f"| {c.baseline} | {c.subject} | {c.min:.3f}x "
                         f"| {c.mean:.3f}x | {c.max:.3f}x |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {format!r}")
