"""Span enumeration, overlap, and sampling against independent oracles."""
from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spanjer.spans import (
    PairSample,
    Span,
    SpanSample,
    count_span_pairs,
    draw_entity_samples,
    draw_relation_samples,
    enumerate_spans,
    iou,
    iou_fraction,
    max_gold_iou,
)

spans_up_to = lambda n: [Span(i, j) for i in range(n) for j in range(i, n)]


def jaccard_oracle(a: Span, b: Span) -> Fraction:
    """Interval IoU must equal the Jaccard index of the word-index sets."""
    sa, sb = set(a.words()), set(b.words())
    return Fraction(len(sa & sb), len(sa | sb))


class TestSpan:
    def test_rejects_inverted(self):
        with pytest.raises(ValueError):
            Span(3, 2)
        with pytest.raises(ValueError):
            Span(-1, 0)

    def test_width(self):
        assert Span(2, 2).width == 1
        assert Span(1, 4).width == 4

    def test_ordering(self):
        assert sorted([Span(1, 2), Span(0, 5), Span(0, 3)]) == [Span(0, 3), Span(0, 5), Span(1, 2)]


class TestEnumerate:
    def test_triangular_count(self):
        # n == max width: n * (n + 1) / 2 candidates
        assert len(enumerate_spans(11, 11)) == 66
        assert len(enumerate_spans(10, 10)) == 55

    def test_width_cap(self):
        spans = enumerate_spans(40, 10)
        assert all(s.width <= 10 for s in spans)
        assert len(spans) == sum(40 - w + 1 for w in range(1, 11))

    def test_sorted_unique(self):
        spans = enumerate_spans(9, 4)
        assert spans == sorted(spans)
        assert len(set(spans)) == len(spans)

    def test_empty_sentence(self):
        assert enumerate_spans(0, 5) == []

    def test_bad_args(self):
        with pytest.raises(ValueError):
            enumerate_spans(5, 0)
        with pytest.raises(ValueError):
            enumerate_spans(-1, 3)


class TestIou:
    def test_identical(self):
        assert iou(Span(2, 4), Span(2, 4)) == 1.0

    def test_disjoint_and_adjacent(self):
        assert iou(Span(0, 1), Span(3, 4)) == 0.0
        assert iou(Span(0, 1), Span(2, 3)) == 0.0

    def test_nested(self):
        assert iou(Span(1, 2), Span(0, 5)) == pytest.approx(2 / 6)

    def test_partial(self):
        assert iou(Span(0, 2), Span(1, 3)) == 0.5

    def test_symmetry(self):
        a, b = Span(0, 2), Span(2, 7)
        assert iou(a, b) == iou(b, a)
        assert iou_fraction(a, b) == iou_fraction(b, a)

    def test_exhaustive_against_set_jaccard(self):
        # every ordered span pair in sentences up to 8 words
        for n in range(1, 9):
            for a in spans_up_to(n):
                for b in spans_up_to(n):
                    assert iou_fraction(a, b) == jaccard_oracle(a, b)
                    assert iou(a, b) == float(jaccard_oracle(a, b))

    @given(st.integers(0, 30), st.integers(0, 30), st.integers(0, 30), st.integers(0, 30))
    def test_property_matches_jaccard(self, i1, w1, i2, w2):
        a, b = Span(i1, i1 + w1), Span(i2, i2 + w2)
        assert iou_fraction(a, b) == jaccard_oracle(a, b)


class TestMaxGoldIou:
    def test_example(self):
        assert max_gold_iou(Span(0, 1), [Span(1, 3), Span(5, 6)]) == 0.25

    def test_gold_member(self):
        gold = [Span(0, 2), Span(4, 4)]
        assert max_gold_iou(Span(4, 4), gold) == 1.0

    def test_empty_gold(self):
        assert max_gold_iou(Span(0, 3), []) == 0.0

    @given(st.integers(0, 12), st.integers(0, 4), st.integers(1, 5))
    def test_bounded(self, i, w, n_gold):
        gold = [Span(k, k + 1) for k in range(n_gold)]
        assert 0.0 <= max_gold_iou(Span(i, i + w), gold) <= 1.0


class TestSamples:
    def test_span_sample_invariants(self):
        with pytest.raises(ValueError):
            SpanSample(Span(0, 1), "person", 0.5)  # positives carry full overlap
        with pytest.raises(ValueError):
            SpanSample(Span(0, 1), None, 1.5)
        assert not SpanSample(Span(0, 1), None, 0.5).positive

    def test_pair_sample_rejects_self(self):
        with pytest.raises(ValueError):
            PairSample(Span(0, 1), Span(0, 1), "works-for")


class TestDrawEntitySamples:
    def test_counts_and_labels(self, corpus):
        s = corpus[0]  # 5 words, 2 gold spans, L=10 -> 15 spans, 13 negatives
        rng = np.random.default_rng(0)
        samples = draw_entity_samples(s, 10, 120, rng)
        positives = [x for x in samples if x.positive]
        negatives = [x for x in samples if not x.positive]
        assert {(p.span, p.label) for p in positives} == {
            (Span(0, 0), "person"),
            (Span(3, 4), "company"),
        }
        assert len(negatives) == 13
        assert all(n.gold_iou == max_gold_iou(n.span, [Span(0, 0), Span(3, 4)]) for n in negatives)

    def test_limit(self, corpus):
        rng = np.random.default_rng(1)
        samples = draw_entity_samples(corpus[0], 10, 4, rng)
        assert sum(not x.positive for x in samples) == 4

    def test_zero_limit_keeps_gold(self, corpus):
        rng = np.random.default_rng(2)
        samples = draw_entity_samples(corpus[0], 10, 0, rng)
        assert len(samples) == 2 and all(x.positive for x in samples)

    def test_negatives_never_gold(self, corpus):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            samples = draw_entity_samples(corpus[0], 10, 120, rng)
            gold = {x.span for x in samples if x.positive}
            assert all(x.span not in gold for x in samples if not x.positive)

    def test_deterministic_per_seed(self, corpus):
        a = draw_entity_samples(corpus[0], 10, 5, np.random.default_rng(7))
        b = draw_entity_samples(corpus[0], 10, 5, np.random.default_rng(7))
        assert a == b

    def test_negative_limit_validated(self, corpus):
        with pytest.raises(ValueError):
            draw_entity_samples(corpus[0], 10, -1, np.random.default_rng(0))


class TestDrawRelationSamples:
    def test_positives_and_pool(self, corpus):
        s = corpus[0]
        rng = np.random.default_rng(0)
        samples = draw_relation_samples(s, 120, rng)
        positives = [x for x in samples if x.positive]
        negatives = [x for x in samples if not x.positive]
        assert positives == [PairSample(Span(0, 0), Span(3, 4), "works-for")]
        # two gold spans -> 2 ordered pairs, one is gold, one negative remains
        assert negatives == [PairSample(Span(3, 4), Span(0, 0), None)]

    def test_zero_limit(self, corpus):
        samples = draw_relation_samples(corpus[0], 0, np.random.default_rng(0))
        assert all(x.positive for x in samples)

    def test_deterministic_per_seed(self, corpus):
        a = draw_relation_samples(corpus[0], 10, np.random.default_rng(3))
        b = draw_relation_samples(corpus[0], 10, np.random.default_rng(3))
        assert a == b


class TestCountSpanPairs:
    def test_with_and_without_self(self):
        assert count_span_pairs(66, True) == 4356
        assert count_span_pairs(66, False) == 4290
        assert count_span_pairs(66, True) - 1 == 4355

    def test_small(self):
        assert count_span_pairs(0, True) == 0
        assert count_span_pairs(1, False) == 0
        assert count_span_pairs(2, False) == 2

    @given(st.integers(0, 500))
    def test_difference_is_diagonal(self, n):
        assert count_span_pairs(n, True) - count_span_pairs(n, False) == n
