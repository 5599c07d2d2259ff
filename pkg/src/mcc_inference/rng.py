"""Counter-based random streams and vectorized multinomial sampling.

The generator is Philox4x32-10 evaluated directly on numpy uint64
lanes. Each (seed, trial index, draw index) triple maps to one uniform
through a pure function of the counter, so any partition of trials
across workers or chunks reproduces identical draws: there is no
sequential state to split. numpy's own bit generators produce
sequential streams per object and cannot be keyed per-trial in a
vectorized way, hence this small dedicated implementation; tests check
it against an independently written scalar version plus distributional
oracles.

Multinomial draws use the sequential conditional-binomial scheme: cell
j gets Binomial(remaining, p_j / tail_j) via inverse-CDF lookup of one
uniform, then is subtracted from the remainder.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)

# number of rounds in the mixing function
_ROUNDS = 10

# at or below this remaining-count bound the binomial inversion uses
# exact CDF tables instead of scipy's ppf (much faster for tiny n);
# constant so that reproducibility never depends on a tuning choice
SMALL_N_TABLE_BOUND = 64


def _check_seed(seed: int) -> int:
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise TypeError(f"seed must be an integer, got {seed!r}")
    if not 0 <= int(seed) < 2**64:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {seed!r}")
    return int(seed)


def philox4x32(
    c0: np.ndarray, c1: np.ndarray, c2: np.ndarray, c3: np.ndarray, k0: int, k1: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """One Philox4x32-10 block per element of the counter lanes.

    Inputs are uint64 arrays holding 32-bit values; outputs likewise.
    """
    c0 = c0 & _MASK32
    c1 = c1 & _MASK32
    c2 = c2 & _MASK32
    c3 = c3 & _MASK32
    key0 = np.uint64(k0)
    key1 = np.uint64(k1)
    for rnd in range(_ROUNDS):
        if rnd:
            key0 = (key0 + _W0) & _MASK32
            key1 = (key1 + _W1) & _MASK32
        prod0 = _M0 * c0
        prod1 = _M1 * c2
        hi0 = prod0 >> _SHIFT32
        lo0 = prod0 & _MASK32
        hi1 = prod1 >> _SHIFT32
        lo1 = prod1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ key0, lo1, hi0 ^ c3 ^ key1, lo0
    return c0, c1, c2, c3


def uniforms(seed: int, trials: np.ndarray, draw: int) -> np.ndarray:
    """One uniform in the open interval (0, 1) per trial index.

    The counter is (trial low word, trial high word, draw, 0) and the
    key is the seed, so the value depends only on (seed, trial, draw).
    """
    seed = _check_seed(seed)
    trials = np.asarray(trials, dtype=np.uint64)
    c0 = trials & _MASK32
    c1 = trials >> _SHIFT32
    c2 = np.full_like(trials, np.uint64(draw) & _MASK32)
    c3 = np.zeros_like(trials)
    o0, o1, _, _ = philox4x32(c0, c1, c2, c3, seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF)
    bits64 = o0 | (o1 << _SHIFT32)
    # top 53 bits, centered on the cell midpoint: never exactly 0 or 1
    return ((bits64 >> np.uint64(11)).astype(np.float64) + 0.5) * (2.0**-53)


def _binom_inverse_cdf(u: np.ndarray, trials_left: np.ndarray, pc: float) -> np.ndarray:
    """Binomial(n=trials_left, p=pc) quantiles of u, elementwise, as int64."""
    if pc <= 0.0:
        return np.zeros_like(trials_left)
    if pc >= 1.0:
        return trials_left.copy()
    n_max = int(trials_left.max(initial=0))
    if n_max == 0:
        return np.zeros_like(trials_left)
    if n_max <= SMALL_N_TABLE_BOUND:
        out = np.zeros_like(trials_left)
        for r in np.unique(trials_left):
            r = int(r)
            if r == 0:
                continue
            cdf = stats.binom.cdf(np.arange(r + 1), r, pc)
            sel = trials_left == r
            out[sel] = np.searchsorted(cdf, u[sel], side="left")
        return out
    vals = stats.binom.ppf(u, trials_left, pc)
    return np.clip(vals, 0, trials_left).astype(np.int64)


def multinomial_batch(p, n: int, seed: int, trials: np.ndarray) -> np.ndarray:
    """Multinomial(n, p) counts for each trial index; shape (len(trials), len(p)).

    Deterministic per (seed, trial index): the same trial index yields
    the same row no matter how trials are batched or partitioned.
    """
    p = [float(v) for v in p]
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    trials = np.asarray(trials, dtype=np.uint64)
    k = len(p)
    tails = [math.fsum(p[j:]) for j in range(k)]
    out = np.zeros((trials.shape[0], k), dtype=np.int64)
    remaining = np.full(trials.shape[0], n, dtype=np.int64)
    for j in range(k - 1):
        pc = 0.0 if tails[j] <= 0.0 else min(max(p[j] / tails[j], 0.0), 1.0)
        u = uniforms(seed, trials, j)
        draw = _binom_inverse_cdf(u, remaining, pc)
        out[:, j] = draw
        remaining -= draw
    out[:, k - 1] = remaining
    return out
