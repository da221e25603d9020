"""Benchmark harness: multi-run averaging, summary tables, trace CSVs.

A bench cell is one (problem, method, run) solve with its own seed and
trace.  Cells are independent; ``jobs = 1`` guarantees strictly serial
execution so wall-clock comparisons are undistorted.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .core import Convex, MethodKind, ProblemInstance, SolveStatus, SolveTrace, SolverConfig, ThresholdMode
from .errors import CappedKaczmarzError
from .diagnostics import build_factor_report, estimate_eta
from .numerics import seeded_rng
from .problems import BrownProblem, LinearProblem, load_libsvm, make_glm, make_synthetic_glm
from .solvers import solve

TRACE_COLUMNS = ("k", "residual_sq", "elapsed_s", "selected_size")


class BenchSpecError(CappedKaczmarzError):
    """Invalid benchmark specification (bad selector, empty method list...)."""


@dataclass(frozen=True)
class BenchSpec:
    """One benchmark invocation: a problem selector, methods, run count."""

    problem: str
    methods: tuple[MethodKind, ...]
    runs: int = 10
    seed: int = 0
    threshold: ThresholdMode = Convex(0.5)
    tol: float = 1e-6
    max_iter: int = 200_000
    out_dir: Path | None = None
    track_error: bool = False
    diagnostics: bool = False
    jobs: int = 1
    clock: Callable[[], float] = time.perf_counter

    def __post_init__(self):
        if self.runs < 1:
            raise BenchSpecError("runs must be at least 1")
        if not self.methods:
            raise BenchSpecError("method list must be nonempty")
        if self.jobs < 1:
            raise BenchSpecError("jobs must be at least 1")


def resolve_problem(selector: str) -> tuple[ProblemInstance, np.ndarray]:
    """Build the problem and its conventional start point from a selector.

    ``brown:n`` starts at 0.5 * ones; ``glm:...`` and ``linear:...`` start
    at zero.  ``linear:m,n,seed`` draws a consistent Gaussian system.
    """
    kind, _, rest = selector.partition(":")
    try:
        if kind == "brown":
            n = int(rest)
            return BrownProblem(n), 0.5 * np.ones(n)
        if kind == "glm":
            if rest.startswith("synthetic:"):
                p, d, seed = (int(tok) for tok in rest.removeprefix("synthetic:").split(","))
                glm = make_synthetic_glm(p, d, seed)
                return glm, np.zeros(glm.n)
            glm = make_glm(load_libsvm(rest))
            return glm, np.zeros(glm.n)
        if kind == "linear":
            m, n, seed = (int(tok) for tok in rest.split(","))
            rng = seeded_rng(seed)
            A = rng.standard_normal((m, n))
            x_star = rng.standard_normal(n)
            return LinearProblem(A, A @ x_star, known_root=x_star), np.zeros(n)
    except (ValueError, OSError) as exc:
        raise BenchSpecError(f"cannot resolve problem {selector!r}: {exc}") from exc
    raise BenchSpecError(f"unknown problem selector {selector!r}")


@dataclass
class RunResult:
    method: MethodKind
    run: int
    seed: int
    iterations: int
    seconds: float
    status: SolveStatus
    trace: SolveTrace


@dataclass
class MethodSummary:
    method: MethodKind
    iterations: list[int]
    seconds: list[float]
    statuses: dict[str, int]

    @property
    def mean_iterations(self) -> float:
        return sum(self.iterations) / len(self.iterations)

    @property
    def mean_seconds(self) -> float:
        return sum(self.seconds) / len(self.seconds)

    @property
    def zero_variance(self) -> bool:
        return len(set(self.iterations)) == 1


@dataclass
class BenchReport:
    problem: str
    runs: int
    seed: int
    summaries: list[MethodSummary]
    results: list[RunResult] = field(default_factory=list)

    @property
    def any_breakdown(self) -> bool:
        return any(r.status is SolveStatus.NUMERICAL_BREAKDOWN for r in self.results)


def _run_cell(problem, x0, spec: BenchSpec, method: MethodKind, run: int) -> RunResult:
    config = SolverConfig(
        method=method,
        threshold=spec.threshold,
        tol=spec.tol,
        max_iter=spec.max_iter,
        seed=spec.seed + run,
        record_error=spec.track_error and problem.known_root is not None,
        clock=spec.clock,
    )
    started = spec.clock()
    trace = solve(problem, x0, config)
    seconds = spec.clock() - started
    return RunResult(
        method=method,
        run=run,
        seed=config.seed,
        iterations=trace.total_iterations,
        seconds=seconds,
        status=trace.status,
        trace=trace,
    )


def run_bench(spec: BenchSpec) -> BenchReport:
    """Execute every (method, run) cell, assemble summaries, write outputs.

    Per-run numerical breakdown is recorded in the report, never fatal to
    the batch.  Timing covers the solve only (problem construction and file
    IO excluded).
    """
    problem, x0 = resolve_problem(spec.problem)
    cells = [(method, run) for method in spec.methods for run in range(spec.runs)]
    if spec.jobs == 1:
        results = [_run_cell(problem, x0, spec, method, run) for method, run in cells]
    else:
        with ThreadPoolExecutor(max_workers=spec.jobs) as pool:
            results = list(
                pool.map(lambda cell: _run_cell(problem, x0, spec, *cell), cells)
            )

    summaries = []
    for method in spec.methods:
        mine = [r for r in results if r.method is method]
        statuses: dict[str, int] = {}
        for r in mine:
            statuses[r.status.value] = statuses.get(r.status.value, 0) + 1
        summaries.append(
            MethodSummary(
                method=method,
                iterations=[r.iterations for r in mine],
                seconds=[r.seconds for r in mine],
                statuses=statuses,
            )
        )
    report = BenchReport(
        problem=spec.problem, runs=spec.runs, seed=spec.seed, summaries=summaries, results=results
    )
    if spec.out_dir is not None:
        write_outputs(spec, report, problem, x0)
    return report


def emit_csv(trace: SolveTrace) -> str:
    """Render a trace as CSV: ``k,residual_sq,elapsed_s,selected_size`` plus
    ``error_sq`` when tracked.  Floats use shortest round-trip formatting;
    LF line endings."""
    with_error = any(r.error_sq is not None for r in trace.records)
    columns = TRACE_COLUMNS + (("error_sq",) if with_error else ())
    lines = [",".join(columns)]
    for rec in trace.records:
        row = [str(rec.k), repr(rec.residual_sq), repr(rec.elapsed), str(rec.set_size)]
        if with_error:
            row.append("" if rec.error_sq is None else repr(rec.error_sq))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def emit_table(report: BenchReport) -> str:
    """Plain-text summary, one row per method.  A trailing ``*`` marks
    methods whose iteration count had zero variance across runs."""
    header = f"{'method':<16}{'runs':>5}{'mean IT':>12}{'mean CPU s':>12}{'converged':>10}{'breakdown':>10}"
    lines = [f"problem: {report.problem}  (runs={report.runs}, base seed={report.seed})", header]
    starred = False
    for s in report.summaries:
        conv = s.statuses.get(SolveStatus.CONVERGED.value, 0)
        broke = s.statuses.get(SolveStatus.NUMERICAL_BREAKDOWN.value, 0)
        star = "*" if s.zero_variance else " "
        starred = starred or s.zero_variance
        lines.append(
            f"{s.method.value:<16}{len(s.iterations):>5}{s.mean_iterations:>12.1f}"
            f"{s.mean_seconds:>12.4f}{conv:>10}{broke:>10} {star}"
        )
    if starred:
        lines.append("* identical iteration count in every run (zero variance)")
    return "\n".join(lines) + "\n"


def report_to_json(report: BenchReport) -> dict:
    return {
        "problem": report.problem,
        "runs": report.runs,
        "base_seed": report.seed,
        "methods": [
            {
                "method": s.method.value,
                "iterations": s.iterations,
                "seconds": s.seconds,
                "mean_iterations": s.mean_iterations,
                "mean_seconds": s.mean_seconds,
                "statuses": s.statuses,
                "zero_variance": s.zero_variance,
            }
            for s in report.summaries
        ],
    }


def trace_filename(problem: str, method: MethodKind, run: int) -> str:
    return f"trace_{problem}_{method.value}_{run}.csv"


def write_outputs(spec: BenchSpec, report: BenchReport, problem, x0) -> None:
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(
        json.dumps(report_to_json(report), indent=2) + "\n", encoding="utf-8"
    )
    (out / "summary.txt").write_text(emit_table(report), encoding="utf-8", newline="\n")
    for result in report.results:
        name = trace_filename(spec.problem, result.method, result.run)
        (out / name).write_text(emit_csv(result.trace), encoding="utf-8", newline="\n")
    if spec.diagnostics:
        _write_diagnostics(spec, problem, x0, out)


_GREEDY = (MethodKind.DR_CNK, MethodKind.RD_CNK, MethodKind.DB_CNK, MethodKind.RB_CNK)


def _write_diagnostics(spec: BenchSpec, problem, x0, out: Path) -> None:
    """Factor reports for the greedy methods; needs a known root to anchor
    the eta-estimation ball, otherwise a note is emitted instead."""
    if problem.known_root is None:
        (out / "diagnostics.json").write_text(
            json.dumps({"note": "no known root; eta estimation skipped"}) + "\n",
            encoding="utf-8",
        )
        return
    eta = estimate_eta(problem, problem.known_root, 0.05, 2000, seeded_rng(spec.seed))
    payload = {"eta": eta.eta, "radius": eta.radius, "methods": {}}
    for method in spec.methods:
        if method not in _GREEDY:
            continue
        config = SolverConfig(
            method=method,
            threshold=spec.threshold,
            tol=spec.tol,
            max_iter=spec.max_iter,
            seed=spec.seed,
            record_iterates=True,
            clock=spec.clock,
        )
        trace = solve(problem, x0, config)
        try:
            rep = build_factor_report(problem, trace, eta, spec.threshold, method)
            payload["methods"][method.value] = rep.to_jsonable()
        except CappedKaczmarzError as exc:
            payload["methods"][method.value] = {"error": str(exc)}
    (out / "diagnostics.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
