"""Span <-> tag-sequence codecs.

The 5-tag scheme (S/B/E/I/O) encodes a set of non-overlapping spans into one
tag per word; the 3-tag scheme (ST/CO/O) is what the random baseline draws
from.  Decoders accept arbitrary tag sequences and repair invalid ones
deterministically, so every decode yields a valid span set.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache
from typing import Sequence

import numpy as np

from spanlab.corpus import Span, SpanSet


class Tag5(IntEnum):
    """Per-word span tag.  The index order is fixed; decoding tie-breaks depend on it."""

    S = 0  # singleton: a one-word span
    B = 1  # begins a multi-word span
    E = 2  # ends a multi-word span
    I = 3  # inside a multi-word span
    O = 4  # outside every span


TagSequence = tuple[Tag5, ...]


class Tag3(IntEnum):
    """Tag drawn per word by the random baseline."""

    ST = 0  # start of a span
    CO = 1  # continuation of a span
    O = 2  # outside any span


def encode_spans(spans: SpanSet, n: int) -> TagSequence:
    """Tag positions 1..n: S if b=e=i, B if b=i<e, E if b<i=e, I if b<i<e, else O."""
    prev_end = 0
    for s in spans:
        if s.end > n:
            raise ValueError(f"span end {s.end} exceeds N={n}")
        if s.begin <= prev_end:
            raise ValueError(f"overlapping spans at ({s.begin},{s.end})")
        prev_end = s.end
    tags = [Tag5.O] * n
    for s in spans:
        if s.begin == s.end:
            tags[s.begin - 1] = Tag5.S
        else:
            tags[s.begin - 1] = Tag5.B
            for i in range(s.begin, s.end - 1):
                tags[i] = Tag5.I
            tags[s.end - 1] = Tag5.E
    return tuple(tags)


def decode_tags(tags: Sequence[Tag5]) -> SpanSet:
    """Decode a 5-tag sequence; invalid sequences are repaired in place.

    Scan left to right with an open-span flag: I or E without an open span act
    as B or S; an open span is closed at the previous position when O, B or S
    arrives, and at the final position if still open.  No non-O word is ever
    dropped, and the result is always a valid span set.
    """
    spans: list[Span] = []
    open_at: int | None = None
    for pos, tag in enumerate(tags, start=1):
        if tag == Tag5.O:
            if open_at is not None:
                spans.append(Span(open_at, pos - 1))
                open_at = None
        elif tag == Tag5.S:
            if open_at is not None:
                spans.append(Span(open_at, pos - 1))
                open_at = None
            spans.append(Span(pos, pos))
        elif tag == Tag5.B:
            if open_at is not None:
                spans.append(Span(open_at, pos - 1))
            open_at = pos
        elif tag == Tag5.I:
            if open_at is None:
                open_at = pos
        else:  # Tag5.E
            if open_at is None:
                spans.append(Span(pos, pos))
            else:
                spans.append(Span(open_at, pos))
                open_at = None
    if open_at is not None:
        spans.append(Span(open_at, len(tags)))
    return SpanSet(tuple(spans))


def decode_start_continue(tags: Sequence[Tag3]) -> SpanSet:
    """Decode baseline tags: ST always opens a span, CO extends (or opens) one.

    A CO after O, or at position 1, opens a new span, so a word belongs to
    some decoded span exactly when its tag is not O.
    """
    spans: list[Span] = []
    open_at: int | None = None
    for pos, tag in enumerate(tags, start=1):
        if tag == Tag3.O:
            if open_at is not None:
                spans.append(Span(open_at, pos - 1))
                open_at = None
        elif tag == Tag3.ST:
            if open_at is not None:
                spans.append(Span(open_at, pos - 1))
            open_at = pos
        else:  # Tag3.CO
            if open_at is None:
                open_at = pos
    if open_at is not None:
        spans.append(Span(open_at, len(tags)))
    return SpanSet(tuple(spans))


@dataclass(frozen=True)
class TransitionMask:
    """Admissible tag transitions: exactly those a valid span set can produce."""

    allowed: np.ndarray  # (5, 5) bool, [previous, next]
    start: np.ndarray  # (5,) bool, admissible first tags
    end: np.ndarray  # (5,) bool, admissible last tags

    def admits(self, tags: Sequence[Tag5]) -> bool:
        """True when the whole sequence decodes without repair."""
        if not len(tags):
            return True
        if not self.start[tags[0]] or not self.end[tags[-1]]:
            return False
        return all(self.allowed[a, b] for a, b in zip(tags, tags[1:]))


@lru_cache(maxsize=1)
def transition_mask() -> TransitionMask:
    allowed = np.zeros((5, 5), dtype=bool)
    closed_next = [Tag5.S, Tag5.B, Tag5.O]  # no span is open after S, E, O
    open_next = [Tag5.I, Tag5.E]  # B and I leave a span open
    for prev in (Tag5.S, Tag5.E, Tag5.O):
        allowed[prev, closed_next] = True
    for prev in (Tag5.B, Tag5.I):
        allowed[prev, open_next] = True
    start = np.zeros(5, dtype=bool)
    start[[Tag5.S, Tag5.B, Tag5.O]] = True
    end = np.zeros(5, dtype=bool)
    end[[Tag5.S, Tag5.E, Tag5.O]] = True
    for arr in (allowed, start, end):
        arr.setflags(write=False)
    return TransitionMask(allowed, start, end)
