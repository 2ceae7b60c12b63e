"""Precision / recall / F1 scoring of predictions against gold annotations.

Matching is exact: an entity counts when span and type both agree; a
relation counts when both argument spans and the relation type agree.
Relation matching never looks at the argument entities' types.  Duplicate
items on either side are collapsed before counting.
"""
from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .spans import Span

Counts = tuple[int, int, int]  # (tp, fp, fn)


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "PRF":
        """0/0 ratios are defined as 0."""
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        return cls(p, r, f, tp, fp, fn)


def _dedup(items: Iterable) -> list:
    seen = set()
    out = []
    for it in items:
        if it in seen:
            continue
        seen.add(it)
        out.append(it)
    return out


def _match(gold: Iterable, pred: Iterable, type_of) -> dict[str, Counts]:
    gold = _dedup(gold)
    pred = _dedup(pred)
    gold_set = set(gold)
    pred_set = set(pred)
    counts: dict[str, list[int]] = {}
    for it in gold:
        t = type_of(it)
        row = counts.setdefault(t, [0, 0, 0])
        if it in pred_set:
            row[0] += 1
        else:
            row[2] += 1
    for it in pred:
        if it in gold_set:
            continue
        counts.setdefault(type_of(it), [0, 0, 0])[1] += 1
    return {t: (c[0], c[1], c[2]) for t, c in counts.items()}


def match_entities(
    gold: Iterable[tuple[Span, str]], pred: Iterable[tuple[Span, str]]
) -> dict[str, Counts]:
    """Per-type (tp, fp, fn) from exact (span, type) matching."""
    return _match(gold, pred, lambda it: it[1])


def match_relations(
    gold: Iterable[tuple[Span, Span, str]], pred: Iterable[tuple[Span, Span, str]]
) -> dict[str, Counts]:
    """Per-type (tp, fp, fn) from exact (head span, tail span, type) matching."""
    return _match(gold, pred, lambda it: it[2])


def merge_counts(*parts: Mapping[str, Counts]) -> dict[str, Counts]:
    total: dict[str, list[int]] = {}
    for part in parts:
        for t, (tp, fp, fn) in part.items():
            row = total.setdefault(t, [0, 0, 0])
            row[0] += tp
            row[1] += fp
            row[2] += fn
    return {t: (c[0], c[1], c[2]) for t, c in total.items()}


def per_type_prf(counts: Mapping[str, Counts]) -> dict[str, PRF]:
    return {t: PRF.from_counts(*counts[t]) for t in sorted(counts)}


def aggregate(
    counts: Mapping[str, Counts],
    mode: str = "micro",
    all_types: Sequence[str] | None = None,
) -> PRF:
    """Pool per-type counts into one score.

    micro pools the raw counts; macro averages the per-type precision,
    recall, and F1 without weighting (so its F1 is not the harmonic mean
    of its own precision and recall).  Macro averages over the observed
    types unless `all_types` forces the denominator.
    """
    if mode == "micro":
        tp = sum(c[0] for c in counts.values())
        fp = sum(c[1] for c in counts.values())
        fn = sum(c[2] for c in counts.values())
        return PRF.from_counts(tp, fp, fn)
    if mode != "macro":
        raise ValueError(f"unknown aggregation mode {mode!r}")
    types = list(all_types) if all_types is not None else sorted(counts)
    tp = sum(c[0] for c in counts.values())
    fp = sum(c[1] for c in counts.values())
    fn = sum(c[2] for c in counts.values())
    if not types:
        return PRF(0.0, 0.0, 0.0, tp, fp, fn)
    rows = [PRF.from_counts(*counts.get(t, (0, 0, 0))) for t in types]
    return PRF(
        precision=sum(r.precision for r in rows) / len(rows),
        recall=sum(r.recall for r in rows) / len(rows),
        f1=sum(r.f1 for r in rows) / len(rows),
        tp=tp,
        fp=fp,
        fn=fn,
    )


@dataclass(frozen=True)
class FoldSummary:
    """Mean and sample standard deviation of fold scores."""

    n_folds: int
    precision_mean: float
    precision_std: float
    recall_mean: float
    recall_std: float
    f1_mean: float
    f1_std: float


def summarize_folds(fold_scores: Sequence[PRF]) -> FoldSummary:
    if not fold_scores:
        raise ValueError("need at least one fold score")

    def _std(values: list[float]) -> float:
        return statistics.stdev(values) if len(values) > 1 else 0.0

    ps = [s.precision for s in fold_scores]
    rs = [s.recall for s in fold_scores]
    fs = [s.f1 for s in fold_scores]
    return FoldSummary(
        n_folds=len(fold_scores),
        precision_mean=statistics.fmean(ps),
        precision_std=_std(ps),
        recall_mean=statistics.fmean(rs),
        recall_std=_std(rs),
        f1_mean=statistics.fmean(fs),
        f1_std=_std(fs),
    )
