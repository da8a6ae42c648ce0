"""Fixation-to-box grounding: map each gaze point to an abnormality box and
accumulate dwell time per box.

Membership uses closed intervals on all four edges, so a fixation landing
exactly on a corner is inside. When several boxes contain the point the
smallest area wins; equal areas resolve to the lowest box index so the
mapping is total and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .corpus import BoundingBox, Fixation


@dataclass(frozen=True)
class SummaryEntry:
    box_index: int
    label: str
    total_time_seconds: float


@dataclass(frozen=True)
class GroundedFixationSummary:
    """Per-box cumulative dwell times plus the time spent outside every box.

    Entries are ordered by the first fixation that landed in each box, which
    preserves the temporal order in which the reader attended to regions.
    """

    entries: tuple[SummaryEntry, ...]
    unmapped_time_seconds: float

    def total_time(self) -> float:
        return sum(e.total_time_seconds for e in self.entries) + self.unmapped_time_seconds


def map_fixation(g: Fixation, boxes: Sequence[BoundingBox]) -> Optional[int]:
    """Index of the smallest box containing (g.x, g.y), or None if outside all."""
    best: Optional[int] = None
    best_area = float("inf")
    for i, b in enumerate(boxes):
        if b.contains(g.x, g.y) and b.area < best_area:
            best = i
            best_area = b.area
    return best


def aggregate_fixation_times(
    fixations: Sequence[Fixation], boxes: Sequence[BoundingBox]
) -> GroundedFixationSummary:
    """Sum fixation durations per mapped box, in first-touch order."""
    totals: dict[int, float] = {}
    order: list[int] = []
    unmapped = 0.0
    for g in fixations:
        idx = map_fixation(g, boxes)
        if idx is None:
            unmapped += g.t
            continue
        if idx not in totals:
            totals[idx] = 0.0
            order.append(idx)
        totals[idx] += g.t
    entries = tuple(
        SummaryEntry(box_index=i, label=boxes[i].label, total_time_seconds=totals[i])
        for i in order
    )
    return GroundedFixationSummary(entries=entries, unmapped_time_seconds=unmapped)
