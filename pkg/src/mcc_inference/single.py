"""Confidence intervals for the MCC of a single classifier.

Three constructions, all delta-method based:

* ``ci_single_simple``: normal interval directly on the MCC scale.
* ``ci_single_fisher``: Fisher z transform with the delta-method
  variance carried to the transformed scale, then mapped back.
* ``ci_single_fisher_naive``: Fisher z with the classical 1/(n-3)
  variance shortcut borrowed from the bivariate-normal correlation.
  Kept for comparison; its coverage degrades away from that model.
"""

from __future__ import annotations

import numpy as np

from . import engine
from .core import CountsTable4, InvalidN, ProbVec4, grad_phi
from .results import (
    FLAG_NONREAL_RADICAND,
    FLAG_VAR_CLAMPED,
    ConfidenceInterval,
    Method,
    NaReason,
)

_NA_MAP = {
    engine.NA_UNDEFINED: NaReason.UNDEFINED_MCC,
    engine.NA_BOUNDARY: NaReason.TRANSFORM_BOUNDARY,
}


def sigma4(p: ProbVec4) -> np.ndarray:
    """Multinomial covariance matrix diag(p) - p p' of one observation."""
    v = p.as_array()
    return np.diag(v) - np.outer(v, v)


def var_simple(p: ProbVec4) -> float:
    """Asymptotic variance factor of the MCC estimator, grad' Sigma grad.

    Expanded to E[g^2] - E[g]^2 under the cell distribution, which is the
    same quadratic form without materializing the matrix. This is the
    variance of sqrt(n) * (mcc_hat - mcc); divide by n for the estimator.

    Raises:
        MarginZero: if any margin of p is zero.
    """
    g = grad_phi(p)
    w = p.as_array()
    sq = (g[0] * g[0] * w[0] + g[1] * g[1] * w[1]) + (g[2] * g[2] * w[2] + g[3] * g[3] * w[3])
    mean = (g[0] * w[0] + g[1] * w[1]) + (g[2] * w[2] + g[3] * w[3])
    return float(sq - mean * mean)


def _flags_tuple(bits: int) -> tuple[str, ...]:
    out = []
    if bits & engine.FLAG_VAR_CLAMPED:
        out.append(FLAG_VAR_CLAMPED)
    if bits & engine.FLAG_NONREAL_RADICAND:
        out.append(FLAG_NONREAL_RADICAND)
    return tuple(out)


def wrap_batch_row(
    batch: engine.IntervalBatch, method: Method, level: float, row: int = 0
) -> ConfidenceInterval:
    """Convert one row of an engine batch into a ConfidenceInterval."""
    code = int(batch.na[row])
    return ConfidenceInterval(
        method=method,
        estimate=float(batch.estimate[row]),
        lower=float(batch.lower[row]),
        upper=float(batch.upper[row]),
        level=level,
        na=_NA_MAP.get(code),
        flags=_flags_tuple(int(batch.flags[row])),
    )


def _one(counts: CountsTable4, level: float, method: Method) -> ConfidenceInterval:
    batch = engine.single_from_counts(counts.as_array()[None, :], level, methods=(method,))
    return wrap_batch_row(batch[method], method, level)


def ci_single_simple(counts: CountsTable4, level: float = 0.95) -> ConfidenceInterval:
    """Normal interval mcc_hat +/- z * sqrt(var_simple(p_hat) / n).

    NA (UNDEFINED_MCC) when any margin of the counts table is zero. A
    boundary estimate |mcc_hat| = 1 is not NA here; it yields a
    zero-width interval when the variance degenerates.
    """
    return _one(counts, level, Method.SIMPLE_SINGLE)


def ci_single_fisher(counts: CountsTable4, level: float = 0.95) -> ConfidenceInterval:
    """Fisher z interval: transform, interval on the z scale, map back.

    The z-scale standard error is sqrt(var_simple / n) / (1 - mcc_hat^2).
    NA: UNDEFINED_MCC on a zero margin, TRANSFORM_BOUNDARY when the
    estimate is exactly +/-1 (exact integer test: FP=FN=0 or TP=TN=0).
    Bounds always land strictly inside (-1, 1).
    """
    return _one(counts, level, Method.FISHER_Z)


def ci_single_fisher_naive(counts: CountsTable4, level: float = 0.95) -> ConfidenceInterval:
    """Fisher z interval with the fixed 1/(n-3) transformed-scale variance.

    Raises:
        InvalidN: when n <= 3 (the shortcut is undefined there).
    """
    if counts.n <= 3:
        raise InvalidN(f"fisher_z_naive requires n >= 4, got n={counts.n}")
    return _one(counts, level, Method.FISHER_Z_NAIVE)
