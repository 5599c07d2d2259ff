"""Vectorized interval kernels.

Everything here works on batches: counts or probability tables as
(B, 4) / (B, 8) arrays, one interval per row per method. The scalar
functions in ``single`` and ``paired`` wrap these kernels with B=1, and
the coverage simulator feeds them millions of rows, so the scalar API
and the simulator classify every table identically by construction.

Joint-cell order everywhere: (111, 110, 101, 100, 011, 010, 001, 000),
index (classifier-1 prediction, classifier-2 prediction, truth).

Reduction discipline: sums over the 8 joint cells use a fixed tree that
groups the cells exchanged by swapping the two classifiers, and sums
over 4 cells use one fixed parenthesization. IEEE addition and
multiplication are commutative, so relabeling the classifiers produces
bitwise-identical variances and correlations, which in turn makes the
swap antisymmetry of every paired interval exact, not approximate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .core import InvalidN
from .results import Method

NA_NONE = 0
NA_UNDEFINED = 1
NA_BOUNDARY = 2

FLAG_VAR_CLAMPED = 1
FLAG_NONREAL_RADICAND = 2

# which marginal cell (0 TP, 1 FP, 2 FN, 3 TN) each joint cell feeds
_LIFT1 = (0, 1, 0, 1, 2, 3, 2, 3)  # classifier 1: index ijk -> cell i*
_LIFT2 = (0, 1, 2, 3, 0, 1, 2, 3)  # classifier 2: index ijk -> cell j*


def z_quantile(level: float) -> float:
    """Two-sided normal quantile for a confidence level in (0, 1)."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level!r}")
    return float(ndtri(0.5 * (1.0 + level)))


@dataclass
class IntervalBatch:
    """One interval per row; na codes 0=ok, 1=undefined, 2=boundary."""

    estimate: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    na: np.ndarray
    flags: np.ndarray

    def hits(self, true_value: float) -> np.ndarray:
        """Closed-interval coverage mask; NA rows are False (NaN compares False)."""
        return (self.lower <= true_value) & (true_value <= self.upper)


def _phi_cols(p11, p10, p01, p00):
    """phi, its gradient columns and 1/denominator from probability columns.

    Rows with zero margins produce non-finite junk here; callers mask
    them via the NA codes before anything escapes.
    """
    r1 = p11 + p10
    r0 = p01 + p00
    c1 = p11 + p01
    c0 = p10 + p00
    inv_den = np.exp(-0.5 * (np.log(r1) + np.log(c1) + np.log(c0) + np.log(r0)))
    val = np.clip((p11 * p00 - p10 * p01) * inv_den, -1.0, 1.0)
    g11 = p00 * inv_den - (r1 + c1) / (2.0 * r1 * c1) * val
    g10 = -p01 * inv_den - (r1 + c0) / (2.0 * r1 * c0) * val
    g01 = -p10 * inv_den - (c1 + r0) / (2.0 * c1 * r0) * val
    g00 = p11 * inv_den - (r0 + c0) / (2.0 * r0 * c0) * val
    return val, (g11, g10, g01, g00)


def _var4(p, g):
    """Multinomial delta-method variance factor g' (diag(p) - pp') g.

    Expanded to sum(g^2 p) - sum(g p)^2 with a fixed summation order.
    """
    p11, p10, p01, p00 = p
    g11, g10, g01, g00 = g
    sq = (g11 * g11 * p11 + g10 * g10 * p10) + (g01 * g01 * p01 + g00 * g00 * p00)
    mean = (g11 * p11 + g10 * p10) + (g01 * p01 + g00 * p00)
    return sq - mean * mean


def _sum8_swapsym(t):
    """Sum of 8 columns, invariant under the classifier-swap permutation.

    The swap exchanges cells 101<->011 (indices 2, 4) and 100<->010
    (indices 3, 5); those pairs are added first so the full sum is
    bitwise swap-invariant.
    """
    return ((t[0] + t[1]) + (t[2] + t[4])) + ((t[3] + t[5]) + (t[6] + t[7]))


def phi_batch(phat: np.ndarray) -> np.ndarray:
    """phi for each row of a (B, 4) probability array (NaN on zero margins)."""
    phat = np.asarray(phat, dtype=float)
    with np.errstate(all="ignore"):
        val, _ = _phi_cols(phat[:, 0], phat[:, 1], phat[:, 2], phat[:, 3])
    return val


def grad_phi_batch(phat: np.ndarray) -> np.ndarray:
    """Gradient rows matching phi_batch, shape (B, 4)."""
    phat = np.asarray(phat, dtype=float)
    with np.errstate(all="ignore"):
        _, g = _phi_cols(phat[:, 0], phat[:, 1], phat[:, 2], phat[:, 3])
    return np.stack(g, axis=1)


def _mask_na(batch: IntervalBatch) -> IntervalBatch:
    bad = batch.na != NA_NONE
    batch.lower = np.where(bad, np.nan, batch.lower)
    batch.upper = np.where(bad, np.nan, batch.upper)
    batch.estimate = np.where(batch.na == NA_UNDEFINED, np.nan, batch.estimate)
    return batch


def _fisher_bounds(val, var_hat, n, z):
    """Fisher z interval pieces from an MCC column and its variance factor.

    Returns (lower, upper); rows where |val|=1 come out non-finite and
    must be masked by the caller.
    """
    zc = np.arctanh(val)
    one_minus = 1.0 - val * val
    hw = z * np.sqrt(var_hat / n) / one_minus
    return np.tanh(zc - hw), np.tanh(zc + hw)


def single_intervals(
    phat: np.ndarray,
    n,
    level: float,
    margin_zero: np.ndarray,
    unit: np.ndarray,
    methods=(Method.SIMPLE_SINGLE, Method.FISHER_Z, Method.FISHER_Z_NAIVE),
) -> dict[Method, IntervalBatch]:
    """Single-table intervals for each requested method.

    phat: (B, 4) empirical probabilities; n: scalar or (B,) totals;
    margin_zero / unit: structural masks computed by the caller from the
    exact inputs (integer counts or constructed probabilities).
    """
    phat = np.asarray(phat, dtype=float)
    n = np.asarray(n, dtype=float)
    z = z_quantile(level)
    out: dict[Method, IntervalBatch] = {}
    with np.errstate(all="ignore"):
        val, g = _phi_cols(phat[:, 0], phat[:, 1], phat[:, 2], phat[:, 3])
        var_raw = _var4((phat[:, 0], phat[:, 1], phat[:, 2], phat[:, 3]), g)
        clamped = var_raw < 0.0
        var_hat = np.where(clamped, 0.0, var_raw)
        flags0 = np.where(clamped, FLAG_VAR_CLAMPED, 0).astype(np.uint8)

        if Method.SIMPLE_SINGLE in methods:
            na = np.where(margin_zero, NA_UNDEFINED, NA_NONE).astype(np.uint8)
            hw = z * np.sqrt(var_hat / n)
            out[Method.SIMPLE_SINGLE] = _mask_na(
                IntervalBatch(val.copy(), val - hw, val + hw, na, flags0.copy())
            )

        if Method.FISHER_Z in methods or Method.FISHER_Z_NAIVE in methods:
            na_f = np.where(
                margin_zero, NA_UNDEFINED, np.where(unit, NA_BOUNDARY, NA_NONE)
            ).astype(np.uint8)
            val_safe = np.where(np.abs(val) >= 1.0, 0.0, val)

            if Method.FISHER_Z in methods:
                lo, hi = _fisher_bounds(val_safe, var_hat, n, z)
                b = IntervalBatch(val.copy(), lo, hi, na_f.copy(), flags0.copy())
                out[Method.FISHER_Z] = _mask_na(b)

            if Method.FISHER_Z_NAIVE in methods:
                if np.any(n <= 3):
                    raise InvalidN("fisher_z_naive requires n >= 4")
                zc = np.arctanh(val_safe)
                hw = z * np.sqrt(1.0 / (n - 3.0))
                b = IntervalBatch(
                    val.copy(), np.tanh(zc - hw), np.tanh(zc + hw), na_f.copy(), flags0.copy()
                )
                out[Method.FISHER_Z_NAIVE] = _mask_na(b)
    return out


def single_from_counts(
    counts: np.ndarray, level: float, methods=(Method.SIMPLE_SINGLE, Method.FISHER_Z, Method.FISHER_Z_NAIVE)
) -> dict[Method, IntervalBatch]:
    """Intervals from integer count rows (B, 4); NA masks use exact integer tests."""
    counts = np.asarray(counts)
    c11, c10, c01, c00 = counts[:, 0], counts[:, 1], counts[:, 2], counts[:, 3]
    n = c11 + c10 + c01 + c00
    margin_zero = (
        ((c11 + c10) == 0) | ((c01 + c00) == 0) | ((c11 + c01) == 0) | ((c10 + c00) == 0)
    )
    unit = ~margin_zero & (((c10 == 0) & (c01 == 0)) | ((c11 == 0) & (c00 == 0)))
    phat = counts / n[:, None]
    return single_intervals(phat, n, level, margin_zero, unit, methods)


def single_from_probs(
    phat: np.ndarray, n, level: float, methods=(Method.SIMPLE_SINGLE, Method.FISHER_Z, Method.FISHER_Z_NAIVE)
) -> dict[Method, IntervalBatch]:
    """Intervals from constructed probability rows with an effective n.

    Zero tests are exact float comparisons; intended for plug-in tables
    (expected counts n*p), not for noisy estimates.
    """
    phat = np.asarray(phat, dtype=float)
    p11, p10, p01, p00 = phat[:, 0], phat[:, 1], phat[:, 2], phat[:, 3]
    margin_zero = (
        ((p11 + p10) == 0.0) | ((p01 + p00) == 0.0) | ((p11 + p01) == 0.0) | ((p10 + p00) == 0.0)
    )
    unit = ~margin_zero & (((p10 == 0.0) & (p01 == 0.0)) | ((p11 == 0.0) & (p00 == 0.0)))
    return single_intervals(phat, n, level, margin_zero, unit, methods)


def _marginal_cols(joint):
    """Marginal (TP, FP, FN, TN) columns for both classifiers.

    Written so that applying the classifier-swap permutation to the
    joint columns turns marginal-1 into bitwise marginal-2 and back.
    """
    x111, x110, x101, x100, x011, x010, x001, x000 = joint
    m1 = (x111 + x101, x110 + x100, x011 + x001, x010 + x000)
    m2 = (x111 + x011, x110 + x010, x101 + x001, x100 + x000)
    return m1, m2


def _unit_masks(tp, fp, fn, tn, margin_zero, zero):
    pos = ~margin_zero & (fp == zero) & (fn == zero)
    neg = ~margin_zero & (tp == zero) & (tn == zero)
    return pos, neg


def _margin_zero_mask(tp, fp, fn, tn, zero):
    return ((tp + fp) == zero) | ((fn + tn) == zero) | ((tp + fn) == zero) | ((fp + tn) == zero)


def paired_intervals(
    joint_phat: np.ndarray,
    marg1: tuple,
    marg2: tuple,
    n,
    level: float,
    mz1,
    mz2,
    unit_pos1,
    unit_neg1,
    unit_pos2,
    unit_neg2,
    methods=(Method.SIMPLE_PAIRED, Method.ZOU, Method.MT),
) -> dict[Method, IntervalBatch]:
    """Paired-difference intervals from joint probabilities and marginal columns."""
    n = np.asarray(n, dtype=float)
    z = z_quantile(level)
    joint = tuple(np.asarray(joint_phat, dtype=float)[:, k] for k in range(8))
    out: dict[Method, IntervalBatch] = {}
    with np.errstate(all="ignore"):
        val1, g1 = _phi_cols(*marg1)
        val2, g2 = _phi_cols(*marg2)
        est = val1 - val2

        # lift the two 4-cell gradients onto the 8 joint cells
        lift1 = tuple(g1[k] for k in _LIFT1)
        lift2 = tuple(g2[k] for k in _LIFT2)
        diff = tuple(a - b for a, b in zip(lift1, lift2))

        mean_d = _sum8_swapsym(tuple(d * p for d, p in zip(diff, joint)))
        sq_d = _sum8_swapsym(tuple(d * d * p for d, p in zip(diff, joint)))
        var_raw = sq_d - mean_d * mean_d
        clamped = var_raw < 0.0
        var_psi = np.where(clamped, 0.0, var_raw)
        flags0 = np.where(clamped, FLAG_VAR_CLAMPED, 0).astype(np.uint8)

        undefined = mz1 | mz2
        na_plain = np.where(undefined, NA_UNDEFINED, NA_NONE).astype(np.uint8)

        if Method.SIMPLE_PAIRED in methods:
            hw = z * np.sqrt(var_psi / n)
            out[Method.SIMPLE_PAIRED] = _mask_na(
                IntervalBatch(est.copy(), est - hw, est + hw, na_plain.copy(), flags0.copy())
            )

        if Method.MT in methods:
            boundary = ~undefined & ((unit_pos1 & unit_neg2) | (unit_neg1 & unit_pos2))
            na = np.where(
                undefined, NA_UNDEFINED, np.where(boundary, NA_BOUNDARY, NA_NONE)
            ).astype(np.uint8)
            est_safe = np.where(np.abs(est) >= 2.0, 0.0, est)
            zc = np.arctanh(0.5 * est_safe)
            factor = 2.0 / (4.0 - est_safe * est_safe)
            hwg = z * np.sqrt(var_psi / n) * factor
            b = IntervalBatch(
                est.copy(), 2.0 * np.tanh(zc - hwg), 2.0 * np.tanh(zc + hwg), na, flags0.copy()
            )
            out[Method.MT] = _mask_na(b)

        if Method.ZOU in methods:
            var1 = _var4(marg1, g1)
            var2 = _var4(marg2, g2)
            cross = _sum8_swapsym(tuple(a * b * p for a, b, p in zip(lift1, lift2, joint)))
            mean1 = _sum8_swapsym(tuple(a * p for a, p in zip(lift1, joint)))
            mean2 = _sum8_swapsym(tuple(b * p for b, p in zip(lift2, joint)))
            cov = cross - mean1 * mean2

            zero_var = ~undefined & ((var1 <= 0.0) | (var2 <= 0.0))
            corr = np.clip(cov / np.sqrt(var1 * var2), -1.0, 1.0)

            val1_safe = np.where(np.abs(val1) >= 1.0, 0.0, val1)
            val2_safe = np.where(np.abs(val2) >= 1.0, 0.0, val2)
            l1, u1 = _fisher_bounds(val1_safe, var1, n, z)
            l2, u2 = _fisher_bounds(val2_safe, var2, n, z)

            a_lo = val1 - l1
            b_lo = u2 - val2
            rad_lo = (a_lo * a_lo + b_lo * b_lo) - (2.0 * corr) * (a_lo * b_lo)
            a_hi = u1 - val1
            b_hi = val2 - l2
            rad_hi = (a_hi * a_hi + b_hi * b_hi) - (2.0 * corr) * (a_hi * b_hi)
            nonreal = (rad_lo < 0.0) | (rad_hi < 0.0)
            rad_lo = np.where(rad_lo < 0.0, 0.0, rad_lo)
            rad_hi = np.where(rad_hi < 0.0, 0.0, rad_hi)

            boundary = ~undefined & (unit_pos1 | unit_neg1 | unit_pos2 | unit_neg2 | zero_var)
            na = np.where(
                undefined, NA_UNDEFINED, np.where(boundary, NA_BOUNDARY, NA_NONE)
            ).astype(np.uint8)
            flags = flags0 | np.where(nonreal, FLAG_NONREAL_RADICAND, 0).astype(np.uint8)
            b = IntervalBatch(est.copy(), est - np.sqrt(rad_lo), est + np.sqrt(rad_hi), na, flags)
            out[Method.ZOU] = _mask_na(b)
    return out


def paired_from_counts(
    counts: np.ndarray, level: float, methods=(Method.SIMPLE_PAIRED, Method.ZOU, Method.MT)
) -> dict[Method, IntervalBatch]:
    """Paired intervals from integer joint count rows (B, 8)."""
    counts = np.asarray(counts)
    cols = tuple(counts[:, k] for k in range(8))
    m1c, m2c = _marginal_cols(cols)
    n = (cols[0] + cols[1] + cols[2] + cols[3]) + (cols[4] + cols[5] + cols[6] + cols[7])
    mz1 = _margin_zero_mask(*m1c, zero=0)
    mz2 = _margin_zero_mask(*m2c, zero=0)
    up1, un1 = _unit_masks(*m1c, mz1, zero=0)
    up2, un2 = _unit_masks(*m2c, mz2, zero=0)
    nf = n.astype(float)
    marg1 = tuple(c / nf for c in m1c)
    marg2 = tuple(c / nf for c in m2c)
    joint_phat = counts / nf[:, None]
    return paired_intervals(
        joint_phat, marg1, marg2, n, level, mz1, mz2, up1, un1, up2, un2, methods
    )


def paired_from_probs(
    joint: np.ndarray, n, level: float, methods=(Method.SIMPLE_PAIRED, Method.ZOU, Method.MT)
) -> dict[Method, IntervalBatch]:
    """Paired intervals from constructed joint probability rows (B, 8)."""
    joint = np.asarray(joint, dtype=float)
    cols = tuple(joint[:, k] for k in range(8))
    m1, m2 = _marginal_cols(cols)
    mz1 = _margin_zero_mask(*m1, zero=0.0)
    mz2 = _margin_zero_mask(*m2, zero=0.0)
    up1, un1 = _unit_masks(*m1, mz1, zero=0.0)
    up2, un2 = _unit_masks(*m2, mz2, zero=0.0)
    return paired_intervals(joint, m1, m2, n, level, mz1, mz2, up1, un1, up2, un2, methods)
