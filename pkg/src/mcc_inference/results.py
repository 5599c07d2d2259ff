"""Shared result types and output-schema helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

SCHEMA_VERSION = "1"


def format_float(x: float) -> str:
    """Shortest decimal that parses back to the same float (repr)."""
    return repr(float(x))


def format_bool(b: bool) -> str:
    return "true" if b else "false"


def parse_bool(s: str) -> bool:
    if s == "true":
        return True
    if s == "false":
        return False
    raise ValueError(f"not a boolean field: {s!r}")


class Method(str, Enum):
    """Interval construction methods."""

    SIMPLE_SINGLE = "simple_single"
    FISHER_Z = "fisher_z"
    FISHER_Z_NAIVE = "fisher_z_naive"
    SIMPLE_PAIRED = "simple_paired"
    ZOU = "zou"
    MT = "mt"

    def __str__(self) -> str:  # csv/cli friendly
        return self.value


SINGLE_METHODS = (Method.SIMPLE_SINGLE, Method.FISHER_Z, Method.FISHER_Z_NAIVE)
PAIRED_METHODS = (Method.SIMPLE_PAIRED, Method.ZOU, Method.MT)


class NaReason(str, Enum):
    """Why an interval could not be produced.

    UNDEFINED_MCC: a margin of the observed table is zero, the point
        estimate itself does not exist.
    TRANSFORM_BOUNDARY: the estimate sits on the boundary of the
        transform domain (|mcc|=1, |difference|=2, or a zero-variance
        component), so the method's transformed scale degenerates.
    """

    UNDEFINED_MCC = "undefined_mcc"
    TRANSFORM_BOUNDARY = "transform_boundary"

    def __str__(self) -> str:
        return self.value


# diagnostic flags, kept out of the NA taxonomy
FLAG_VAR_CLAMPED = "variance_clamped"
FLAG_NONREAL_RADICAND = "nonreal_radicand"


@dataclass(frozen=True)
class ConfidenceInterval:
    """A two-sided confidence interval, or an NA record explaining its absence.

    When ``na`` is None the invariant lower <= estimate <= upper holds and
    all three values are finite. When ``na`` is set, lower/upper are NaN;
    the estimate is still reported if it exists (boundary cases) and NaN
    otherwise. ``flags`` records numeric-edge handling (variance clamped
    at zero, non-real radicand clamped) that did not prevent construction.
    """

    method: Method
    estimate: float
    lower: float
    upper: float
    level: float
    na: NaReason | None = None
    flags: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if not 0.0 < self.level < 1.0:
            raise ValueError(f"level must be in (0, 1), got {self.level!r}")
        if self.na is None:
            if not (self.lower <= self.estimate <= self.upper):
                raise ValueError(
                    f"interval out of order: {self.lower!r}, {self.estimate!r}, {self.upper!r}"
                )
        else:
            if not (math.isnan(self.lower) and math.isnan(self.upper)):
                raise ValueError("NA interval must have NaN bounds")

    @property
    def is_na(self) -> bool:
        return self.na is not None

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        """Closed-interval membership; False for NA records."""
        if self.na is not None:
            return False
        return self.lower <= value <= self.upper
