"""Strict majority voting over annotator span sets.

Voting is per word, not per span: words covered by more than half of the
annotators are kept, and maximal runs of kept words become the aggregated
spans.  Words covered by exactly half are excluded.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from spanlab.corpus import AnnotationRecord, SpanSet


@dataclass(frozen=True)
class VoteProfile:
    """Per-word annotator coverage counts."""

    counts: tuple[int, ...]
    total: int


def word_vote_counts(records: Sequence[AnnotationRecord], n: int) -> VoteProfile:
    """counts[i-1] = number of records whose spans cover word i; total = #records."""
    if not records:
        raise ValueError("no annotation records to aggregate")
    counts = [0] * n
    for rec in records:
        covered: set[int] = set()
        for s in rec.spans:
            if s.end > n:
                raise ValueError(f"span end {s.end} exceeds N={n}")
            covered.update(s.words())
        for i in covered:
            counts[i - 1] += 1
    return VoteProfile(tuple(counts), len(records))


def majority_vote(records: Sequence[AnnotationRecord], n: int) -> SpanSet:
    """Words covered by a strict majority (> 50%) of records, grouped into runs.

    May legitimately be empty, and may contain spans shorter than 3 words:
    the minimum span length applies to annotator input only.
    """
    profile = word_vote_counts(records, n)
    kept = (i + 1 for i, c in enumerate(profile.counts) if 2 * c > profile.total)
    return SpanSet.from_word_set(kept)
