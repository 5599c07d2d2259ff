"""Inference for the difference of two MCCs measured on the same sample.

Two classifiers evaluated on one set of n items give an 8-cell joint
table indexed (prediction of classifier 1, prediction of classifier 2,
truth), cell order (111, 110, 101, 100, 011, 010, 001, 000). The target
is psi = mcc1 - mcc2 in [-2, 2]. Three interval constructions:

* ``ci_paired_simple``: normal interval on the difference scale with
  the full joint-multinomial delta-method variance.
* ``ci_paired_zou``: recombines the two per-classifier Fisher z
  intervals using the estimated correlation of the two MCC estimators
  (Zou's method for differences of correlated parameters).
* ``ci_paired_mt``: transforms the difference by atanh(psi/2), builds
  the interval on that scale, and maps back, so bounds stay in (-2, 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import engine
from .core import (
    CountsTable4,
    MarginZero,
    OutOfDomain,
    ProbVec4,
    SIMPLEX_TOL,
    ZeroVariance,
    grad_phi,
    phi,
)
from .results import ConfidenceInterval, Method
from .single import wrap_batch_row

_CELLS8 = ("p111", "p110", "p101", "p100", "p011", "p010", "p001", "p000")
_COUNTS8 = ("c111", "c110", "c101", "c100", "c011", "c010", "c001", "c000")


@dataclass(frozen=True)
class ProbVec8:
    """Joint cell probabilities of two classifiers against the truth."""

    p111: float
    p110: float
    p101: float
    p100: float
    p011: float
    p010: float
    p001: float
    p000: float

    def __post_init__(self) -> None:
        cells = self.as_tuple()
        for name, v in zip(_CELLS8, cells):
            if not (0.0 <= v <= 1.0) or math.isnan(v):
                raise OutOfDomain(f"{name}={v!r} outside [0, 1]")
        if abs(math.fsum(cells) - 1.0) > SIMPLEX_TOL:
            raise OutOfDomain(f"cells sum to {math.fsum(cells)!r}, not 1")

    def as_tuple(self) -> tuple[float, ...]:
        return (
            self.p111,
            self.p110,
            self.p101,
            self.p100,
            self.p011,
            self.p010,
            self.p001,
            self.p000,
        )

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=float)

    def swap_classifiers(self) -> "ProbVec8":
        """Relabel classifier 1 as classifier 2 and vice versa."""
        return ProbVec8(
            self.p111, self.p110, self.p011, self.p010, self.p101, self.p100, self.p001, self.p000
        )


@dataclass(frozen=True)
class CountsTable8:
    """Observed joint counts in the ProbVec8 cell order."""

    c111: int
    c110: int
    c101: int
    c100: int
    c011: int
    c010: int
    c001: int
    c000: int

    def __post_init__(self) -> None:
        for name in _COUNTS8:
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
                raise OutOfDomain(f"{name}={v!r} is not an integer")
            if v < 0:
                raise OutOfDomain(f"{name}={v} is negative")
        if self.n < 1:
            raise OutOfDomain("counts table is empty")

    @property
    def n(self) -> int:
        return sum(self.as_tuple())

    def as_tuple(self) -> tuple[int, ...]:
        return (
            self.c111,
            self.c110,
            self.c101,
            self.c100,
            self.c011,
            self.c010,
            self.c001,
            self.c000,
        )

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=np.int64)

    def marginal_counts(self, classifier: int) -> CountsTable4:
        """Collapse to the 2x2 confusion counts of one classifier (1 or 2)."""
        c = self
        if classifier == 1:
            return CountsTable4(c.c111 + c.c101, c.c110 + c.c100, c.c011 + c.c001, c.c010 + c.c000)
        if classifier == 2:
            return CountsTable4(c.c111 + c.c011, c.c110 + c.c010, c.c101 + c.c001, c.c100 + c.c000)
        raise ValueError(f"classifier must be 1 or 2, got {classifier!r}")

    def to_probs(self) -> ProbVec8:
        n = self.n
        return ProbVec8(*(c / n for c in self.as_tuple()))

    def swap_classifiers(self) -> "CountsTable8":
        return CountsTable8(
            self.c111, self.c110, self.c011, self.c010, self.c101, self.c100, self.c001, self.c000
        )


def marginals(p: ProbVec8) -> tuple[ProbVec4, ProbVec4]:
    """The two 2x2 marginal tables (classifier 1, classifier 2)."""
    m1 = ProbVec4(p.p111 + p.p101, p.p110 + p.p100, p.p011 + p.p001, p.p010 + p.p000)
    m2 = ProbVec4(p.p111 + p.p011, p.p110 + p.p010, p.p101 + p.p001, p.p100 + p.p000)
    return m1, m2


def _interior_marginals(p: ProbVec8) -> tuple[ProbVec4, ProbVec4]:
    m1, m2 = marginals(p)
    for idx, m in ((1, m1), (2, m2)):
        for name in ("pred_pos", "pred_neg", "truth_pos", "truth_neg"):
            if getattr(m, name) <= 0.0:
                raise MarginZero(name, classifier=idx)
    return m1, m2


def psi(p: ProbVec8) -> float:
    """Difference of the two marginal MCCs, mcc1 - mcc2, in [-2, 2].

    Raises:
        MarginZero: tagged with the classifier whose margin vanished.
    """
    m1, m2 = _interior_marginals(p)
    return phi(m1) - phi(m2)


def grad_psi(p: ProbVec8) -> np.ndarray:
    """Gradient of psi with respect to the eight joint cell probabilities.

    Written out in closed form over the joint-table margins. The
    structure per cell ijk is d(mcc1)/d(cell i feeds) minus
    d(mcc2)/d(cell j feeds); both classifiers share the truth margins.
    """
    m1, m2 = _interior_marginals(p)
    tp1, fp1, fn1, tn1 = m1.p11, m1.p10, m1.p01, m1.p00
    tp2, fp2, fn2, tn2 = m2.p11, m2.p10, m2.p01, m2.p00
    pp1, pn1 = m1.pred_pos, m1.pred_neg
    pp2, pn2 = m2.pred_pos, m2.pred_neg
    tpos, tneg = m1.truth_pos, m1.truth_neg  # identical for both classifiers
    r1, r2 = phi(m1), phi(m2)
    d1 = math.sqrt(tpos * pp1 * pn1 * tneg)
    d2 = math.sqrt(tpos * pp2 * pn2 * tneg)

    # per-marginal-cell coefficients of the ratio terms
    a_tp1 = (tpos + pp1) / (2.0 * tpos * pp1) * r1
    a_fp1 = (pp1 + tneg) / (2.0 * pp1 * tneg) * r1
    a_fn1 = (tpos + pn1) / (2.0 * tpos * pn1) * r1
    a_tn1 = (pn1 + tneg) / (2.0 * pn1 * tneg) * r1
    a_tp2 = (tpos + pp2) / (2.0 * tpos * pp2) * r2
    a_fp2 = (pp2 + tneg) / (2.0 * pp2 * tneg) * r2
    a_fn2 = (tpos + pn2) / (2.0 * tpos * pn2) * r2
    a_tn2 = (pn2 + tneg) / (2.0 * pn2 * tneg) * r2

    return np.array(
        [
            tn1 / d1 - a_tp1 - tn2 / d2 + a_tp2,  # d/dp111: TP1, TP2
            -fn1 / d1 - a_fp1 + fn2 / d2 + a_fp2,  # d/dp110: FP1, FP2
            tn1 / d1 - a_tp1 + fp2 / d2 + a_fn2,  # d/dp101: TP1, FN2
            -fn1 / d1 - a_fp1 - tp2 / d2 + a_tn2,  # d/dp100: FP1, TN2
            -fp1 / d1 - a_fn1 - tn2 / d2 + a_tp2,  # d/dp011: FN1, TP2
            tp1 / d1 - a_tn1 + fn2 / d2 + a_fp2,  # d/dp010: TN1, FP2
            -fp1 / d1 - a_fn1 + fp2 / d2 + a_fn2,  # d/dp001: FN1, FN2
            tp1 / d1 - a_tn1 - tp2 / d2 + a_tn2,  # d/dp000: TN1, TN2
        ]
    )


def sigma8(p: ProbVec8) -> np.ndarray:
    """Multinomial covariance matrix diag(p) - p p' of one paired observation."""
    v = p.as_array()
    return np.diag(v) - np.outer(v, v)


@dataclass(frozen=True)
class PairedMccEstimates:
    """Point estimates of the two MCCs and the correlation of their estimators."""

    mcc1: float
    mcc2: float
    corr: float


# columns: which marginal cell each joint cell feeds, per classifier
_LIFT1 = engine._LIFT1
_LIFT2 = engine._LIFT2


def corr_mcc_pair(p: ProbVec8) -> PairedMccEstimates:
    """MCC estimates and their asymptotic correlation under the joint table.

    Computed from the 8x8 multinomial covariance and the two lifted
    4-cell gradients (the 8x2 Jacobian of (mcc1, mcc2)); the correlation
    is clamped to [-1, 1] against rounding overshoot.

    Raises:
        MarginZero: a marginal margin is zero (tagged with classifier).
        ZeroVariance: either estimator has a non-positive variance factor.
    """
    m1, m2 = _interior_marginals(p)
    g1 = grad_phi(m1)
    g2 = grad_phi(m2)
    j1 = g1[list(_LIFT1)]
    j2 = g2[list(_LIFT2)]
    cov = sigma8(p)
    v1 = float(j1 @ cov @ j1)
    v2 = float(j2 @ cov @ j2)
    if v1 <= 0.0 or v2 <= 0.0:
        raise ZeroVariance(f"variance factors ({v1!r}, {v2!r}) must be positive")
    c12 = float(j1 @ cov @ j2)
    corr = max(-1.0, min(1.0, c12 / math.sqrt(v1 * v2)))
    return PairedMccEstimates(phi(m1), phi(m2), corr)


def _one(counts: CountsTable8, level: float, method: Method) -> ConfidenceInterval:
    batch = engine.paired_from_counts(counts.as_array()[None, :], level, methods=(method,))
    return wrap_batch_row(batch[method], method, level)


def ci_paired_simple(counts: CountsTable8, level: float = 0.95) -> ConfidenceInterval:
    """Normal interval psi_hat +/- z * sqrt(var / n) on the difference scale.

    NA (UNDEFINED_MCC) when any margin of either classifier's marginal
    table is zero. Bounds are not clipped to [-2, 2].
    """
    return _one(counts, level, Method.SIMPLE_PAIRED)


def ci_paired_zou(counts: CountsTable8, level: float = 0.95) -> ConfidenceInterval:
    """Zou's recombination of the two per-classifier Fisher z intervals.

    The per-classifier bounds come from the Fisher z construction with
    delta-method variances evaluated at this table's marginals (never
    the 1/(n-3) shortcut), and the recombination uses the estimated
    correlation of the two MCC estimators. A negative radicand is
    clamped to zero and flagged, not treated as NA.

    NA: UNDEFINED_MCC on any zero margin; TRANSFORM_BOUNDARY when either
    marginal estimate is exactly +/-1 or either variance degenerates.
    """
    return _one(counts, level, Method.ZOU)


def ci_paired_mt(counts: CountsTable8, level: float = 0.95) -> ConfidenceInterval:
    """Interval built on the atanh(psi/2) scale and mapped back into (-2, 2).

    NA: UNDEFINED_MCC on any zero margin; TRANSFORM_BOUNDARY when
    |psi_hat| = 2 (one classifier exactly perfect, the other exactly
    inverted, by the integer cell test).
    """
    return _one(counts, level, Method.MT)
