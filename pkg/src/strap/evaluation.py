"""Fault verdicts and suite-quality metrics.

A replayed segment is compared frame-by-frame against the original recording
on vectorized outputs. The segment flags a fault only when strictly more
than 10 percent of its comparable (non warm-up) frames mismatch, which
absorbs the systematic noise of rate conversion and one-frame glitches.
Suite quality is summarized by reduction percentage, fault coverage, APFD,
and Top-K. APFD is computed with exact rational arithmetic and converted to
float at the boundary.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

from .prioritization import PrioritizedPlan
from .reduction import Segment
from .schema import FrameVector

# A segment is a fault signal when mismatched/total exceeds this ratio
# strictly. Kept as an exact ratio; the comparison is integer arithmetic.
FAULT_MISMATCH_RATIO = Fraction(1, 10)

WHOLE_RECORDING_SEGMENT_ID = -1


@dataclass(frozen=True)
class FaultVerdict:
    """Mismatch tally for one segment under one replay."""

    segment_id: int
    mismatched_frames: int
    total_frames: int

    def __post_init__(self) -> None:
        if self.total_frames < 0 or not (0 <= self.mismatched_frames <= max(self.total_frames, 0)):
            raise ValueError(
                f"bad mismatch tally {self.mismatched_frames}/{self.total_frames} "
                f"for segment {self.segment_id}"
            )

    @property
    def is_fault(self) -> bool:
        # Exactly at the threshold is not a fault; zero comparable frames never is.
        return (
            self.mismatched_frames * FAULT_MISMATCH_RATIO.denominator
            > self.total_frames * FAULT_MISMATCH_RATIO.numerator
        )


def compare_outputs(
    original: Sequence[FrameVector], replayed: Sequence[FrameVector], segment: Segment
) -> FaultVerdict:
    """Count frame pairs with unequal vector values over the comparable range."""
    if len(original) != len(replayed):
        raise ValueError(
            f"cannot compare {len(original)} original frames with {len(replayed)} replayed frames"
        )
    if len(original) != segment.length:
        raise ValueError(
            f"segment {segment.id} spans {segment.length} comparable frames, got {len(original)}"
        )
    mismatched = sum(1 for a, b in zip(original, replayed) if a.values != b.values)
    return FaultVerdict(segment.id, mismatched, len(original))


def reduction_pct(original_frames: int, reduced_frames: int) -> float:
    """1 - reduced/original."""
    if original_frames < 1:
        raise ValueError(f"original frame count must be positive, got {original_frames}")
    if not (0 <= reduced_frames <= original_frames):
        raise ValueError(
            f"reduced frame count {reduced_frames} outside [0, {original_frames}]"
        )
    return float(1 - Fraction(reduced_frames, original_frames))


def fault_coverage(reduced_detected: Iterable[str], full_detected: Iterable[str]) -> float:
    """Share of the full suite's detected faults that the reduced suite covers."""
    full = set(full_detected)
    if not full:
        return 1.0
    covered = set(reduced_detected) & full
    return float(Fraction(len(covered), len(full)))


def apfd(n: int, fault_first_indices: Sequence[int], m: int) -> float:
    """Average percentage of faults detected.

    n is the plan length, fault_first_indices holds the 1-based plan position
    of the first segment detecting each fault, and m is the fault count.
    """
    if n < 1:
        raise ValueError(f"plan length must be positive, got {n}")
    if m < 1:
        raise ValueError("APFD is undefined with zero faults")
    if m != len(fault_first_indices):
        raise ValueError(f"m={m} but {len(fault_first_indices)} first-detection positions given")
    for tf in fault_first_indices:
        if not (1 <= tf <= n):
            raise ValueError(f"first-detection position {tf} outside [1, {n}]")
    value = 1 - Fraction(sum(fault_first_indices), m * n) + Fraction(1, 2 * n)
    return float(value)


def top_k(verdicts_in_plan_order: Sequence[Any]) -> int | None:
    """1-based position of the first fault signal; None when nothing fires."""
    for i, v in enumerate(verdicts_in_plan_order, start=1):
        fires = v.is_fault if isinstance(v, FaultVerdict) else bool(v)
        if fires:
            return i
    return None


def evaluate_plan(
    plan: PrioritizedPlan, fault_sets: Mapping[int, frozenset[str] | set[str]]
) -> tuple[float | None, int | None]:
    """APFD and Top-K of one plan against per-segment detected-fault sets.

    Faults are whatever ids appear in the fault sets; faults detected by no
    segment cannot appear there and are accounted separately by callers.
    Returns (None, None) when no segment detects any fault.
    """
    if set(plan.order) != set(fault_sets):
        unknown = set(plan.order) - set(fault_sets)
        if unknown:
            raise ValueError(f"plan orders unknown segment ids {sorted(unknown)}")
        raise ValueError("fault sets cover segments missing from the plan")
    first_seen: dict[str, int] = {}
    for pos, seg_id in enumerate(plan.order, start=1):
        for fault in fault_sets[seg_id]:
            first_seen.setdefault(fault, pos)
    if not first_seen:
        return None, None
    positions = sorted(first_seen.values())
    return apfd(len(plan.order), positions, len(first_seen)), positions[0]


@dataclass(frozen=True)
class SuiteTotals:
    """Frame and segment counts before and after reduction."""

    original_frames: int
    reduced_frames: int
    reduced_frames_with_warmup: int
    segments_before_dedup: int
    segments_after_dedup: int


@dataclass(frozen=True)
class MetricsReport:
    """Full evaluation summary for one regression run."""

    reduction_pct: float
    reduction_pct_with_warmup: float
    fault_coverage: float
    apfd: Mapping[str, float | None]
    # Top-K may be a mean over shuffles, hence float.
    top_k: Mapping[str, float | None]
    totals: SuiteTotals
    details: Mapping[str, Any] = field(default_factory=dict)


def report_to_json(report: MetricsReport) -> dict[str, Any]:
    return {
        "reduction_pct": report.reduction_pct,
        "reduction_pct_with_warmup": report.reduction_pct_with_warmup,
        "fault_coverage": report.fault_coverage,
        "apfd": dict(report.apfd),
        "top_k": dict(report.top_k),
        "totals": {
            "original_frames": report.totals.original_frames,
            "reduced_frames": report.totals.reduced_frames,
            "reduced_frames_with_warmup": report.totals.reduced_frames_with_warmup,
            "segments_before_dedup": report.totals.segments_before_dedup,
            "segments_after_dedup": report.totals.segments_after_dedup,
        },
        "details": dict(report.details),
    }


def report_to_csv(report: MetricsReport) -> str:
    """Per-strategy summary table: strategy, top_k, apfd."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["strategy", "top_k", "apfd"])
    for strategy in sorted(report.apfd):
        a = report.apfd[strategy]
        k = report.top_k.get(strategy)
        writer.writerow(
            [strategy, "" if k is None else k, "" if a is None else repr(a)]
        )
    return buf.getvalue()
