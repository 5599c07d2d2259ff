"""Construction of population tables from interpretable targets.

Single scenarios fix the prevalence and a target MCC and solve for the
unique table satisfying the balance condition TP/FN = TN/FP. Paired
scenarios glue two single scenarios into a joint 8-cell table, pinned
down by the two free dependence cells p001 (both classifiers miss a
positive) and p110 (both flag a negative). Classifier summaries
(sensitivity/specificity at a prevalence) reconstruct published results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from .core import (
    Infeasible,
    NoSolution,
    OutOfDomain,
    PrevalenceMismatch,
    ProbVec4,
    phi,
)
from .paired import ProbVec8
from .results import SCHEMA_VERSION

_CELL_EPS = 1e-12  # tolerance for clamping float dust at feasibility edges


@dataclass(frozen=True)
class SingleScenario:
    """A population table hitting (prevalence, target_mcc) under TP/FN = TN/FP."""

    prevalence: float
    target_mcc: float
    p: ProbVec4

    @property
    def scenario_id(self) -> str:
        return f"single_p{self.prevalence!r}_mcc{self.target_mcc!r}"


@dataclass(frozen=True)
class PairedScenario:
    """A joint table whose marginals are two single scenarios at one prevalence."""

    prevalence: float
    target_mcc1: float
    target_mcc2: float
    p001_fixed: float
    p110_fixed: float
    p: ProbVec8

    @property
    def scenario_id(self) -> str:
        return (
            f"paired_p{self.prevalence!r}_mcc1_{self.target_mcc1!r}_mcc2_{self.target_mcc2!r}"
        )


@dataclass(frozen=True)
class ClassifierSummary:
    """Published classifier performance: sensitivity, specificity, prevalence."""

    sensitivity: float
    specificity: float
    prevalence: float

    def __post_init__(self) -> None:
        for name in ("sensitivity", "specificity", "prevalence"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise OutOfDomain(f"{name}={v!r} outside [0, 1]")


def _cells_at(prevalence: float, tp: float) -> ProbVec4:
    """The unique table with margin = prevalence, TP cell = tp, TP/FN = TN/FP.

    FN = prevalence - tp; the balance condition then forces
    FP = FN * (1 - prevalence) / prevalence and TN = TP * (1 - prevalence)
    / prevalence, which also makes the negative margin come out right.
    """
    fn = prevalence - tp
    scale = (1.0 - prevalence) / prevalence
    return ProbVec4(tp, fn * scale, fn, tp * scale)


def single_scenario(prevalence: float, target_mcc: float) -> SingleScenario:
    """Solve for the table with the given prevalence and MCC.

    The MCC of the one-parameter family sweeps [-1, 1] monotonically as
    the TP cell runs over [0, prevalence], so a bracketed root find on
    the TP cell solves any target in [-1, 1]; convergence is driven to
    float precision (xtol 1e-15).

    Raises:
        NoSolution: |target_mcc| > 1 or prevalence outside (0, 1).
    """
    if not 0.0 < prevalence < 1.0:
        raise NoSolution(f"prevalence must be in (0, 1), got {prevalence!r}")
    if not -1.0 <= target_mcc <= 1.0:
        raise NoSolution(f"target MCC {target_mcc!r} outside [-1, 1]")
    if target_mcc == 1.0:
        tp = prevalence
    elif target_mcc == -1.0:
        tp = 0.0
    else:
        tp = brentq(
            lambda t: phi(_cells_at(prevalence, t)) - target_mcc,
            0.0,
            prevalence,
            xtol=1e-15,
        )
    return SingleScenario(prevalence, target_mcc, _cells_at(prevalence, tp))


def _identify_joint(
    m1: ProbVec4, m2: ProbVec4, prevalence: float, p001: float, p110: float
) -> ProbVec8:
    """Fill the 8 joint cells from two marginal tables and the dependence cells.

    Within the truth=1 stratum p001 fixes everything; within truth=0,
    p110 does. Cells inside [-1e-12, 0) are treated as exact zeros
    (float dust at the feasibility boundary); anything more negative is
    Infeasible.
    """
    tp1, fp1 = m1.p11, m1.p10
    tp2, fp2 = m2.p11, m2.p10
    cells = {
        "p111": tp1 + tp2 + p001 - prevalence,
        "p110": p110,
        "p101": prevalence - tp2 - p001,
        "p100": fp1 - p110,
        "p011": prevalence - tp1 - p001,
        "p010": fp2 - p110,
        "p001": p001,
        "p000": (1.0 - prevalence) - fp1 - fp2 + p110,
    }
    clean = {}
    for name, v in cells.items():
        if v < -_CELL_EPS:
            raise Infeasible(f"cell {name} = {v!r} < 0", cell=name)
        clean[name] = max(v, 0.0)
    return ProbVec8(**clean)


def paired_scenario(
    prevalence: float,
    mcc1: float,
    mcc2: float,
    p001: float = 0.001,
    p110: float = 0.01,
) -> PairedScenario:
    """Joint scenario whose marginals hit (prevalence, mcc1) and (prevalence, mcc2).

    Raises:
        NoSolution: either single target unattainable.
        Infeasible: the dependence cells drive some joint cell negative.
    """
    s1 = single_scenario(prevalence, mcc1)
    s2 = single_scenario(prevalence, mcc2)
    joint = _identify_joint(s1.p, s2.p, prevalence, p001, p110)
    return PairedScenario(prevalence, mcc1, mcc2, p001, p110, joint)


def from_sens_spec(s: ClassifierSummary) -> ProbVec4:
    """Population confusion table implied by (sensitivity, specificity, prevalence)."""
    tp = s.prevalence * s.sensitivity
    fn = s.prevalence * (1.0 - s.sensitivity)
    tn = (1.0 - s.prevalence) * s.specificity
    fp = (1.0 - s.prevalence) * (1.0 - s.specificity)
    return ProbVec4(tp, fp, fn, tn)


def _shared_prevalence(a: ClassifierSummary, b: ClassifierSummary) -> float:
    if a.prevalence != b.prevalence:
        raise PrevalenceMismatch(
            f"summaries disagree on prevalence: {a.prevalence!r} vs {b.prevalence!r}"
        )
    return a.prevalence


def joint_from_two_summaries(
    a: ClassifierSummary, b: ClassifierSummary, p001: float, p110: float
) -> ProbVec8:
    """Joint table for two summarized classifiers at given dependence cells.

    Raises:
        PrevalenceMismatch: the summaries quote different prevalences.
        Infeasible: (p001, p110) outside the admissible box.
    """
    prevalence = _shared_prevalence(a, b)
    return _identify_joint(from_sens_spec(a), from_sens_spec(b), prevalence, p001, p110)


def admissible_ranges(a: ClassifierSummary, b: ClassifierSummary) -> tuple[float, float]:
    """Largest (p001_max, p110_max) keeping the joint reconstruction feasible.

    p001 cannot exceed the smaller miss rate scaled by prevalence;
    p110 cannot exceed the smaller false-alarm rate scaled by 1-prevalence.
    """
    prevalence = _shared_prevalence(a, b)
    p001_max = prevalence * (1.0 - max(a.sensitivity, b.sensitivity))
    p110_max = (1.0 - prevalence) * (1.0 - max(a.specificity, b.specificity))
    return p001_max, p110_max


# --- plain-text serialization -------------------------------------------

_SINGLE_KEYS = ("prevalence", "mcc", "p11", "p10", "p01", "p00")
_PAIRED_KEYS = (
    "prevalence",
    "mcc1",
    "mcc2",
    "p001",
    "p110",
    "p111",
    "p101",
    "p100",
    "p011",
    "p010",
    "p000",
)


def scenario_to_text(sc: SingleScenario | PairedScenario) -> str:
    """Serialize a scenario as versioned key=value lines (full float precision)."""
    lines = [f"schema_version={SCHEMA_VERSION}"]
    if isinstance(sc, SingleScenario):
        lines.append("kind=single")
        lines.append(f"prevalence={sc.prevalence!r}")
        lines.append(f"mcc={sc.target_mcc!r}")
        p = sc.p
        for cell in ("p11", "p10", "p01", "p00"):
            lines.append(f"{cell}={getattr(p, cell)!r}")
    elif isinstance(sc, PairedScenario):
        lines.append("kind=paired")
        lines.append(f"prevalence={sc.prevalence!r}")
        lines.append(f"mcc1={sc.target_mcc1!r}")
        lines.append(f"mcc2={sc.target_mcc2!r}")
        lines.append(f"p001={sc.p001_fixed!r}")
        lines.append(f"p110={sc.p110_fixed!r}")
        p = sc.p
        for cell in ("p111", "p101", "p100", "p011", "p010", "p000"):
            lines.append(f"{cell}={getattr(p, cell)!r}")
    else:
        raise TypeError(f"not a scenario: {sc!r}")
    return "\n".join(lines) + "\n"


def scenario_from_text(text: str) -> SingleScenario | PairedScenario:
    """Parse the key=value scenario format; strict about keys and version.

    Raises:
        ValueError: malformed line, unknown/duplicate/missing key, or
            unsupported schema_version.
        OutOfDomain: stored cells do not form a valid simplex point.
    """
    fields: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"malformed scenario line: {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key in fields:
            raise ValueError(f"duplicate scenario key: {key}")
        fields[key] = value.strip()

    if fields.pop("schema_version", None) != SCHEMA_VERSION:
        raise ValueError(f"unsupported or missing schema_version (want {SCHEMA_VERSION})")
    kind = fields.pop("kind", None)
    if kind == "single":
        expected = _SINGLE_KEYS
    elif kind == "paired":
        expected = _PAIRED_KEYS
    else:
        raise ValueError(f"unsupported scenario kind: {kind!r}")
    missing = [k for k in expected if k not in fields]
    extra = [k for k in fields if k not in expected]
    if missing or extra:
        raise ValueError(f"scenario keys wrong: missing {missing}, unknown {extra}")
    vals = {k: float(fields[k]) for k in expected}

    if kind == "single":
        p = ProbVec4(vals["p11"], vals["p10"], vals["p01"], vals["p00"])
        sc: SingleScenario | PairedScenario = SingleScenario(
            vals["prevalence"], vals["mcc"], p
        )
        target, got = vals["mcc"], phi(p)
    else:
        p8 = ProbVec8(
            vals["p111"],
            vals["p110"],
            vals["p101"],
            vals["p100"],
            vals["p011"],
            vals["p010"],
            vals["p001"],
            vals["p000"],
        )
        sc = PairedScenario(
            vals["prevalence"], vals["mcc1"], vals["mcc2"], vals["p001"], vals["p110"], p8
        )
        from .paired import psi  # local import to keep module load light

        target, got = vals["mcc1"] - vals["mcc2"], psi(p8)
    if not math.isclose(got, target, rel_tol=0.0, abs_tol=1e-6):
        raise ValueError(f"stored cells give {got!r}, inconsistent with target {target!r}")
    return sc
