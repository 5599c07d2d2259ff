"""Numerical foundation: the phi coefficient (MCC), its gradient, and
the variance-stabilizing transforms used by the interval methods.

Probabilities live on the 4-cell simplex of a binary confusion table,
ordered (p11, p10, p01, p00) = (TP, FP, FN, TN) rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SIMPLEX_TOL = 1e-12


class MccError(Exception):
    """Base class for all errors raised by this package."""


class MarginZero(MccError):
    """A confusion-table margin needed by the MCC is zero.

    Attributes:
        margin: which margin vanished ("pred_pos", "pred_neg",
            "truth_pos" or "truth_neg").
        classifier: 1 or 2 for paired tables, None for single tables.
    """

    def __init__(self, margin: str, classifier: int | None = None):
        self.margin = margin
        self.classifier = classifier
        where = f" (classifier {classifier})" if classifier is not None else ""
        super().__init__(f"margin {margin!r} is zero{where}; MCC undefined")


class OutOfDomain(MccError, ValueError):
    """Argument outside the open domain of a transform."""


class InvalidN(MccError, ValueError):
    """Sample size too small for the requested method."""


class ZeroVariance(MccError):
    """A variance estimate degenerated to zero where a positive one is required."""


class NoSolution(MccError):
    """Scenario target cannot be met by any admissible table."""


class Infeasible(MccError):
    """A constructed joint distribution has a negative cell.

    Attributes:
        cell: name of the offending cell.
    """

    def __init__(self, message: str, cell: str | None = None):
        self.cell = cell
        super().__init__(message)


class PrevalenceMismatch(MccError, ValueError):
    """Two classifier summaries disagree about the prevalence."""


class TooLarge(MccError):
    """Exact enumeration would exceed the configured outcome-count bound."""


@dataclass(frozen=True)
class ProbVec4:
    """Cell probabilities of a 2x2 confusion table: (TP, FP, FN, TN) rates.

    Cells must be in [0, 1] and sum to 1 within SIMPLEX_TOL.
    """

    p11: float
    p10: float
    p01: float
    p00: float

    def __post_init__(self) -> None:
        cells = (self.p11, self.p10, self.p01, self.p00)
        for name, v in zip(("p11", "p10", "p01", "p00"), cells):
            if not (0.0 <= v <= 1.0) or math.isnan(v):
                raise OutOfDomain(f"{name}={v!r} outside [0, 1]")
        if abs(math.fsum(cells) - 1.0) > SIMPLEX_TOL:
            raise OutOfDomain(f"cells sum to {math.fsum(cells)!r}, not 1")

    # margins, named by what they count
    @property
    def pred_pos(self) -> float:
        return self.p11 + self.p10

    @property
    def pred_neg(self) -> float:
        return self.p01 + self.p00

    @property
    def truth_pos(self) -> float:
        return self.p11 + self.p01

    @property
    def truth_neg(self) -> float:
        return self.p10 + self.p00

    def interior(self) -> bool:
        """True when every margin is strictly positive."""
        return min(self.pred_pos, self.pred_neg, self.truth_pos, self.truth_neg) > 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.p11, self.p10, self.p01, self.p00], dtype=float)


@dataclass(frozen=True)
class CountsTable4:
    """Observed 2x2 confusion counts: c11=TP, c10=FP, c01=FN, c00=TN."""

    c11: int
    c10: int
    c01: int
    c00: int

    def __post_init__(self) -> None:
        for name in ("c11", "c10", "c01", "c00"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
                raise OutOfDomain(f"{name}={v!r} is not an integer")
            if v < 0:
                raise OutOfDomain(f"{name}={v} is negative")
        if self.n < 1:
            raise OutOfDomain("counts table is empty")

    @property
    def n(self) -> int:
        return self.c11 + self.c10 + self.c01 + self.c00

    def as_array(self) -> np.ndarray:
        return np.array([self.c11, self.c10, self.c01, self.c00], dtype=np.int64)

    def to_probs(self) -> ProbVec4:
        return counts_to_probs(self)[0]


def counts_to_probs(counts: CountsTable4) -> tuple[ProbVec4, int]:
    """Empirical cell probabilities c/n of a counts table, plus n."""
    n = counts.n
    return ProbVec4(counts.c11 / n, counts.c10 / n, counts.c01 / n, counts.c00 / n), n


def _check_margins(p: ProbVec4, classifier: int | None = None) -> None:
    for name in ("pred_pos", "pred_neg", "truth_pos", "truth_neg"):
        if getattr(p, name) <= 0.0:
            raise MarginZero(name, classifier)


def phi(p: ProbVec4) -> float:
    """MCC (phi coefficient) of a table of cell probabilities.

    Computed with a log-sum denominator so small margins do not underflow.
    The result is clamped to [-1, 1] to absorb last-ulp overshoot.

    Raises:
        MarginZero: if any of the four margins is zero.
    """
    _check_margins(p)
    num = p.p11 * p.p00 - p.p10 * p.p01
    log_den = 0.5 * (
        math.log(p.pred_pos)
        + math.log(p.truth_pos)
        + math.log(p.truth_neg)
        + math.log(p.pred_neg)
    )
    val = num * math.exp(-log_den)
    return max(-1.0, min(1.0, val))


def grad_phi(p: ProbVec4) -> np.ndarray:
    """Gradient of phi with respect to the four cell probabilities.

    Returns an array (d/dp11, d/dp10, d/dp01, d/dp00). Requires all four
    margins positive (MarginZero otherwise). At the uniform table the
    gradient is exactly (1, -1, -1, 1).
    """
    _check_margins(p)
    r1, r0 = p.pred_pos, p.pred_neg
    c1, c0 = p.truth_pos, p.truth_neg
    inv_den = math.exp(-0.5 * (math.log(r1) + math.log(c1) + math.log(c0) + math.log(r0)))
    val = (p.p11 * p.p00 - p.p10 * p.p01) * inv_den
    g11 = p.p00 * inv_den - (r1 + c1) / (2.0 * r1 * c1) * val
    g10 = -p.p01 * inv_den - (r1 + c0) / (2.0 * r1 * c0) * val
    g01 = -p.p10 * inv_den - (c1 + r0) / (2.0 * c1 * r0) * val
    g00 = p.p11 * inv_den - (r0 + c0) / (2.0 * r0 * c0) * val
    return np.array([g11, g10, g01, g00])


def fisher_f(x: float) -> float:
    """Fisher z transform, atanh(x). Domain |x| < 1."""
    if not -1.0 < x < 1.0:
        raise OutOfDomain(f"fisher_f domain is (-1, 1), got {x!r}")
    return math.atanh(x)


def fisher_f_inv(z: float) -> float:
    """Inverse Fisher z transform, tanh(z)."""
    return math.tanh(z)


def g_half(x: float) -> float:
    """Half-scale z transform for MCC differences: atanh(x/2), domain |x| < 2.

    Identical to fisher_f(x/2); maps the difference range (-2, 2) onto
    the real line.
    """
    if not -2.0 < x < 2.0:
        raise OutOfDomain(f"g_half domain is (-2, 2), got {x!r}")
    return math.atanh(0.5 * x)


def g_half_inv(z: float) -> float:
    """Inverse of g_half: 2*tanh(z)."""
    return 2.0 * math.tanh(z)
