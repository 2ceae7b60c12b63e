"""Candidate spans: enumeration, overlap scores, and training-sample draws.

A span is an inclusive pair of word indices (i, j) with 0 <= i <= j.  All
candidate generation for both entity and relation training happens here so
that the rest of the code never re-derives index arithmetic.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:
    from .corpus import Sentence

log = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class Span:
    """Inclusive word-index interval [i, j]."""

    i: int
    j: int

    def __post_init__(self) -> None:
        if self.i < 0 or self.j < self.i:
            raise ValueError(f"invalid span ({self.i}, {self.j}): need 0 <= i <= j")

    @property
    def width(self) -> int:
        return self.j - self.i + 1

    def words(self) -> range:
        return range(self.i, self.j + 1)


def enumerate_spans(n_words: int, max_width: int) -> list[Span]:
    """All spans of width <= max_width over a sentence of n_words words.

    Sorted by (start, end); for n_words == max_width the count is the
    triangular number n_words * (n_words + 1) / 2.
    """
    if n_words < 0:
        raise ValueError("n_words must be >= 0")
    if max_width < 1:
        raise ValueError("max_width must be >= 1")
    out = []
    for i in range(n_words):
        for j in range(i, min(i + max_width, n_words)):
            out.append(Span(i, j))
    return out


def iou_fraction(a: Span, b: Span) -> Fraction:
    """Exact intersection-over-union of two word intervals as a rational."""
    inter = min(a.j, b.j) - max(a.i, b.i) + 1
    if inter <= 0:
        return Fraction(0)
    return Fraction(inter, max(a.j, b.j) - min(a.i, b.i) + 1)


def iou(a: Span, b: Span) -> float:
    """Intersection-over-union of two word intervals.

    Equals the Jaccard index of the two word-index sets; 0 when disjoint.
    """
    inter = min(a.j, b.j) - max(a.i, b.i) + 1
    if inter <= 0:
        return 0.0
    return inter / (max(a.j, b.j) - min(a.i, b.i) + 1)


def max_gold_iou(span: Span, gold_spans: Iterable[Span]) -> float:
    """Best overlap of `span` against a collection of gold spans (0 if empty)."""
    return max((iou(span, g) for g in gold_spans), default=0.0)


@dataclass(frozen=True)
class SpanSample:
    """One entity training instance: a span, its class (None = negative), and
    its best overlap against the sentence's gold spans."""

    span: Span
    label: str | None
    gold_iou: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.gold_iou <= 1.0:
            raise ValueError(f"gold_iou out of range: {self.gold_iou}")
        if self.label is not None and self.gold_iou != 1.0:
            raise ValueError("positive samples must carry gold_iou == 1.0")

    @property
    def positive(self) -> bool:
        return self.label is not None


@dataclass(frozen=True)
class PairSample:
    """One relation training instance: an ordered span pair and its class
    (None = negative)."""

    head: Span
    tail: Span
    label: str | None

    def __post_init__(self) -> None:
        if self.head == self.tail:
            raise ValueError("relation pair must join two distinct spans")

    @property
    def positive(self) -> bool:
        return self.label is not None


def draw_entity_samples(
    sentence: "Sentence",
    max_width: int,
    neg_limit: int,
    rng: np.random.Generator,
) -> list[SpanSample]:
    """Entity training samples for one sentence.

    Every gold annotation becomes a positive (duplicates collapsed).  Up to
    neg_limit non-gold spans of width <= max_width are drawn uniformly
    without replacement; when fewer exist, all are taken.  Each negative
    carries its best overlap against the gold span set.
    """
    if neg_limit < 0:
        raise ValueError("neg_limit must be >= 0")
    positives = []
    seen = set()
    for ann in sentence.entities:
        key = (ann.span, ann.label)
        if key in seen:
            continue
        seen.add(key)
        positives.append(SpanSample(ann.span, ann.label, 1.0))
    gold_spans = sorted({ann.span for ann in sentence.entities})
    gold_set = set(gold_spans)
    pool = [s for s in enumerate_spans(len(sentence.tokens), max_width) if s not in gold_set]
    take = min(neg_limit, len(pool))
    picks = rng.permutation(len(pool))[:take]
    negatives = [SpanSample(pool[k], None, max_gold_iou(pool[k], gold_spans)) for k in picks]
    return positives + negatives


def draw_relation_samples(
    sentence: "Sentence",
    neg_limit: int,
    rng: np.random.Generator,
) -> list[PairSample]:
    """Relation training samples for one sentence.

    Positives are the gold relations as ordered (head, tail) span pairs.
    Negatives are drawn uniformly without replacement from the remaining
    ordered pairs of distinct gold entity spans that hold no gold relation
    in that direction.
    """
    if neg_limit < 0:
        raise ValueError("neg_limit must be >= 0")
    positives = []
    seen = set()
    gold_keys = set()
    for rel in sentence.relations:
        head = sentence.entities[rel.head].span
        tail = sentence.entities[rel.tail].span
        if head == tail:
            # distinct entities sharing one span; not expressible as a pair
            log.warning("sentence %s: skipping relation over a single span %s", sentence.id, head)
            continue
        gold_keys.add((head, tail))
        key = (head, tail, rel.label)
        if key in seen:
            continue
        seen.add(key)
        positives.append(PairSample(head, tail, rel.label))
    spans = sorted({ann.span for ann in sentence.entities})
    pool = [
        (a, b)
        for a in spans
        for b in spans
        if a != b and (a, b) not in gold_keys
    ]
    take = min(neg_limit, len(pool))
    picks = rng.permutation(len(pool))[:take]
    negatives = [PairSample(pool[k][0], pool[k][1], None) for k in picks]
    return positives + negatives


def count_span_pairs(span_count: int, include_self: bool) -> int:
    """Number of ordered span pairs over span_count spans."""
    if span_count < 0:
        raise ValueError("span_count must be >= 0")
    if include_self:
        return span_count * span_count
    return span_count * (span_count - 1)
