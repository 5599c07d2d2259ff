"""Monte Carlo coverage study, with an exact small-sample oracle.

``run_coverage`` samples m multinomial tables from a scenario, builds
every requested interval on each table, and reports per-method hit
rates with NA cases excluded from the denominator. Trials are keyed by
absolute index into counter-based random streams, so reports are
bit-identical for a fixed seed no matter how many workers share the
work.

``exact_coverage_small_n`` replaces sampling by full enumeration of the
outcome space with exact rational probabilities; it classifies tables
through the same vectorized kernels, which makes it a strict oracle for
the simulator.
"""

from __future__ import annotations

import csv
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import IO, Iterable, Sequence

import numpy as np

from . import engine, rng
from .core import CountsTable4, InvalidN, TooLarge, phi
from .paired import CountsTable8, psi
from .results import (
    Method,
    NaReason,
    PAIRED_METHODS,
    SCHEMA_VERSION,
    SINGLE_METHODS,
    format_float,
)
from .scenarios import PairedScenario, SingleScenario

_CHUNK = 1 << 16


@dataclass(frozen=True)
class TrialStream:
    """Handle into the counter-based stream space: a seed plus a trial index."""

    seed: int
    trial: int = 0


def sample_counts(p, n: int, stream: TrialStream):
    """One multinomial draw from a ProbVec4 or ProbVec8.

    The draw is a pure function of (stream.seed, stream.trial), shared
    with the simulator's per-trial streams.
    """
    cells = p.as_array()
    row = rng.multinomial_batch(cells, n, stream.seed, np.array([stream.trial], dtype=np.uint64))[0]
    if len(cells) == 4:
        return CountsTable4(*(int(v) for v in row))
    return CountsTable8(*(int(v) for v in row))


def _default_methods(scenario) -> tuple[Method, ...]:
    return SINGLE_METHODS if isinstance(scenario, SingleScenario) else PAIRED_METHODS


@dataclass(frozen=True)
class SimConfig:
    """Coverage-run configuration.

    methods defaults to every method applicable to the scenario kind.
    worker_count > 1 splits trials over processes; results do not depend
    on the split.
    """

    scenario: SingleScenario | PairedScenario
    n: int
    m: int = 100_000
    level: float = 0.95
    methods: tuple[Method, ...] | None = None
    seed: int = 0
    worker_count: int = 1

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if not 0.0 < self.level < 1.0:
            raise ValueError(f"level must be in (0, 1), got {self.level}")
        if self.worker_count < 1:
            raise ValueError(f"worker_count must be >= 1, got {self.worker_count}")
        allowed = _default_methods(self.scenario)
        for m in self.resolved_methods:
            if m not in allowed:
                raise ValueError(f"method {m} does not apply to this scenario kind")
        if Method.FISHER_Z_NAIVE in self.resolved_methods and self.n <= 3:
            raise InvalidN("fisher_z_naive requires n >= 4")

    @property
    def resolved_methods(self) -> tuple[Method, ...]:
        return self.methods if self.methods is not None else _default_methods(self.scenario)

    @property
    def true_value(self) -> float:
        sc = self.scenario
        return phi(sc.p) if isinstance(sc, SingleScenario) else psi(sc.p)


@dataclass(frozen=True)
class MethodCoverage:
    """Per-method tally of one coverage run."""

    method: Method
    hits: int
    evaluated: int
    na_undefined: int
    na_boundary: int

    @property
    def na_counts(self) -> dict[NaReason, int]:
        return {
            NaReason.UNDEFINED_MCC: self.na_undefined,
            NaReason.TRANSFORM_BOUNDARY: self.na_boundary,
        }

    @property
    def coverage(self) -> float:
        return self.hits / self.evaluated if self.evaluated else math.nan

    @property
    def mc_stderr(self) -> float:
        if not self.evaluated:
            return math.nan
        c = self.coverage
        return math.sqrt(c * (1.0 - c) / self.evaluated)


@dataclass(frozen=True)
class CoverageReport:
    """Coverage run output: per-method tallies plus the configuration echo.

    zero_truth_margin_count diagnoses the dominant NA mode separately:
    it counts trials whose sampled table contains no truly-positive
    observations at all (probability (1-prevalence)^n), which is the
    narrowest margin-zero event; the UndefinedMcc tallies use the
    symmetric any-margin criterion.
    """

    scenario_id: str
    prevalence: float
    mcc1: float
    mcc2: float | None
    n: int
    m: int
    level: float
    seed: int
    worker_count: int
    true_value: float
    zero_truth_margin_count: int
    per_method: tuple[MethodCoverage, ...]

    def __post_init__(self) -> None:
        for mc in self.per_method:
            total = mc.evaluated + mc.na_undefined + mc.na_boundary
            if total != self.m:
                raise ValueError(
                    f"{mc.method}: evaluated+NA = {total} != m = {self.m}"
                )

    def method_coverage(self, method: Method) -> MethodCoverage:
        for mc in self.per_method:
            if mc.method == method:
                return mc
        raise KeyError(method)

    def to_text(self) -> str:
        head = (
            f"scenario {self.scenario_id}  n={self.n}  m={self.m}  level={self.level}"
            f"  seed={self.seed}  true={self.true_value:.6f}"
        )
        lines = [head, f"{'method':>16} {'coverage':>9} {'stderr':>9} "
                       f"{'hits':>9} {'evaluated':>9} {'na_undef':>8} {'na_bound':>8}"]
        for mc in self.per_method:
            lines.append(
                f"{mc.method.value:>16} {mc.coverage:9.4f} {mc.mc_stderr:9.5f} "
                f"{mc.hits:9d} {mc.evaluated:9d} {mc.na_undefined:8d} {mc.na_boundary:8d}"
            )
        return "\n".join(lines)


def _scenario_payload(scenario) -> tuple:
    if isinstance(scenario, SingleScenario):
        return ("single", tuple(scenario.p.as_array()))
    return ("paired", scenario.p.as_tuple())


def _classify_batch(kind: str, counts: np.ndarray, level: float, method_values: tuple):
    methods = tuple(Method(v) for v in method_values)
    if kind == "single":
        return engine.single_from_counts(counts, level, methods)
    return engine.paired_from_counts(counts, level, methods)


def _zero_truth_margin(kind: str, counts: np.ndarray) -> np.ndarray:
    if kind == "single":
        return (counts[:, 0] + counts[:, 2]) == 0
    return (counts[:, 0] + counts[:, 2]) + (counts[:, 4] + counts[:, 6]) == 0


def _sim_range(args) -> tuple[dict, int]:
    """Worker body: tally trials lo..hi; merge is a plain per-key sum."""
    kind, cells, n, level, method_values, seed, true_value, lo, hi = args
    tally = {v: np.zeros(3, dtype=np.int64) for v in method_values}
    ztm = 0
    for start in range(lo, hi, _CHUNK):
        stop = min(start + _CHUNK, hi)
        trials = np.arange(start, stop, dtype=np.uint64)
        counts = rng.multinomial_batch(cells, n, seed, trials)
        batches = _classify_batch(kind, counts, level, method_values)
        ztm += int(_zero_truth_margin(kind, counts).sum())
        for method, batch in batches.items():
            t = tally[method.value]
            t[0] += int(batch.hits(true_value).sum())
            t[1] += int((batch.na == engine.NA_UNDEFINED).sum())
            t[2] += int((batch.na == engine.NA_BOUNDARY).sum())
    return {k: v.tolist() for k, v in tally.items()}, ztm


def _partition(m: int, workers: int) -> list[tuple[int, int]]:
    workers = min(workers, m)
    base, extra = divmod(m, workers)
    ranges = []
    start = 0
    for w in range(workers):
        size = base + (1 if w < extra else 0)
        ranges.append((start, start + size))
        start += size
    return ranges


def run_coverage(cfg: SimConfig) -> CoverageReport:
    """Run the Monte Carlo coverage study described by cfg."""
    methods = cfg.resolved_methods
    kind, cells = _scenario_payload(cfg.scenario)
    true_value = cfg.true_value
    method_values = tuple(m.value for m in methods)
    jobs = [
        (kind, cells, cfg.n, cfg.level, method_values, cfg.seed, true_value, lo, hi)
        for lo, hi in _partition(cfg.m, cfg.worker_count)
    ]
    if len(jobs) == 1:
        results = [_sim_range(jobs[0])]
    else:
        with ProcessPoolExecutor(max_workers=len(jobs)) as pool:
            results = list(pool.map(_sim_range, jobs))

    merged = {v: np.zeros(3, dtype=np.int64) for v in method_values}
    ztm = 0
    for tally, z in results:
        ztm += z
        for key, vals in tally.items():
            merged[key] += np.asarray(vals, dtype=np.int64)

    per_method = []
    for method in methods:
        hits, na_u, na_b = (int(x) for x in merged[method.value])
        per_method.append(
            MethodCoverage(method, hits, cfg.m - na_u - na_b, na_u, na_b)
        )

    sc = cfg.scenario
    if isinstance(sc, SingleScenario):
        mcc1, mcc2 = sc.target_mcc, None
    else:
        mcc1, mcc2 = sc.target_mcc1, sc.target_mcc2
    return CoverageReport(
        scenario_id=sc.scenario_id,
        prevalence=sc.prevalence,
        mcc1=mcc1,
        mcc2=mcc2,
        n=cfg.n,
        m=cfg.m,
        level=cfg.level,
        seed=cfg.seed,
        worker_count=cfg.worker_count,
        true_value=true_value,
        zero_truth_margin_count=ztm,
        per_method=tuple(per_method),
    )


# --- exact enumeration oracle --------------------------------------------

MAX_ENUMERATED_TABLES = 2_000_000


@dataclass(frozen=True)
class ExactMethodCoverage:
    method: Method
    coverage: float
    p_na_undefined: float
    p_na_boundary: float


@dataclass(frozen=True)
class ExactCoverage:
    """Exact coverage and NA probabilities by full outcome enumeration."""

    n: int
    level: float
    true_value: float
    n_tables: int
    p_zero_truth_margin: float
    per_method: tuple[ExactMethodCoverage, ...]

    def method_coverage(self, method: Method) -> ExactMethodCoverage:
        for mc in self.per_method:
            if mc.method == method:
                return mc
        raise KeyError(method)


def _compositions(n: int, k: int):
    for bars in itertools.combinations(range(n + k - 1), k - 1):
        row = []
        last = -1
        for b in bars + (n + k - 1,):
            row.append(b - last - 1)
            last = b
        yield row


def exact_coverage_small_n(
    scenario: SingleScenario | PairedScenario,
    n: int,
    level: float = 0.95,
    methods: tuple[Method, ...] | None = None,
) -> ExactCoverage:
    """Enumerate every possible counts table of size n and weight exactly.

    Cell probabilities enter as exact rationals of their float values;
    per-table classification reuses the same kernels as run_coverage.
    Coverage is P(hit) / P(not NA) per method.

    Raises:
        TooLarge: more than MAX_ENUMERATED_TABLES outcomes.
    """
    methods = methods if methods is not None else _default_methods(scenario)
    kind, cells = _scenario_payload(scenario)
    k = len(cells)
    n_tables = math.comb(n + k - 1, k - 1)
    if n_tables > MAX_ENUMERATED_TABLES:
        raise TooLarge(f"{n_tables} tables exceed the {MAX_ENUMERATED_TABLES} bound")

    counts = np.array(list(_compositions(n, k)), dtype=np.int64)
    true_value = phi(scenario.p) if kind == "single" else psi(scenario.p)
    batches = _classify_batch(kind, counts, level, tuple(m.value for m in methods))
    ztm_mask = _zero_truth_margin(kind, counts)

    cell_fracs = [Fraction(float(c)) for c in cells]
    powers = [[f**e for e in range(n + 1)] for f in cell_fracs]
    pmf = []
    for row in counts:
        coef = math.factorial(n)
        mass = Fraction(coef)
        for j, c in enumerate(row):
            c = int(c)
            mass *= powers[j][c]
            if c > 1:
                mass /= math.factorial(c)
        pmf.append(mass)

    total = sum(pmf)
    ztm_mass = sum(p for p, z in zip(pmf, ztm_mask) if z)

    per_method = []
    for method in methods:
        batch = batches[method]
        hit = batch.hits(true_value)
        hit_mass = Fraction(0)
        na_u_mass = Fraction(0)
        na_b_mass = Fraction(0)
        for mass, h, code in zip(pmf, hit, batch.na):
            if code == engine.NA_UNDEFINED:
                na_u_mass += mass
            elif code == engine.NA_BOUNDARY:
                na_b_mass += mass
            elif h:
                hit_mass += mass
        evaluated = total - na_u_mass - na_b_mass
        cov = float(hit_mass / evaluated) if evaluated else math.nan
        per_method.append(
            ExactMethodCoverage(
                method, cov, float(na_u_mass / total), float(na_b_mass / total)
            )
        )
    return ExactCoverage(
        n=n,
        level=level,
        true_value=true_value,
        n_tables=n_tables,
        p_zero_truth_margin=float(ztm_mass / total),
        per_method=tuple(per_method),
    )


# --- CSV emission ----------------------------------------------------------

COVERAGE_CSV_COLUMNS = [
    "scenario",
    "prevalence",
    "mcc1",
    "mcc2",
    "n",
    "m",
    "method",
    "coverage",
    "mc_stderr",
    "na_undefined",
    "na_boundary",
    "seed",
    "schema_version",
]


def coverage_csv_rows(report: CoverageReport) -> list[list[str]]:
    """One CSV row per method; mcc2 is blank for single scenarios."""
    rows = []
    for mc in report.per_method:
        rows.append(
            [
                report.scenario_id,
                format_float(report.prevalence),
                format_float(report.mcc1),
                "" if report.mcc2 is None else format_float(report.mcc2),
                str(report.n),
                str(report.m),
                mc.method.value,
                format_float(mc.coverage),
                format_float(mc.mc_stderr),
                str(mc.na_undefined),
                str(mc.na_boundary),
                str(report.seed),
                SCHEMA_VERSION,
            ]
        )
    return rows


def write_coverage_csv(reports: Iterable[CoverageReport], out: IO[str]) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(COVERAGE_CSV_COLUMNS)
    for report in reports:
        writer.writerows(coverage_csv_rows(report))


def coverage_json_records(reports: Sequence[CoverageReport]) -> list[dict]:
    """JSON mirror of the CSV rows (same field names and values)."""
    records = []
    for report in reports:
        for row in coverage_csv_rows(report):
            records.append(dict(zip(COVERAGE_CSV_COLUMNS, row)))
    return records
