"""Decoding trained classification heads into entity and relation predictions.

Decoding never consults the identification heads: they only shape training.
A candidate is emitted when the squashed probability of its best class
clears the decision threshold; otherwise it decodes to no-class.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import torch

from .corpus import Sentence
from .model import JointExtractor
from .spans import Span, enumerate_spans

if TYPE_CHECKING:
    from .config import RunConfig

log = logging.getLogger(__name__)


@dataclass
class Prediction:
    """Decoded output for one sentence."""

    entities: list[tuple[Span, str, float]] = field(default_factory=list)
    relations: list[tuple[Span, Span, str, float]] = field(default_factory=list)


def decide(scores, theta: float) -> tuple[int | None, float]:
    """Pick the best class if its probability clears theta, else no-class.

    Scores are squashed through a logistic before the comparison, so theta
    lives on the probability scale.  Returns (class index or None, the best
    class's probability); ties pick the lowest index.  An empty score
    vector decodes to (None, 0.0).
    """
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    if not isinstance(scores, torch.Tensor):
        scores = torch.tensor(scores, dtype=torch.float64)
    if scores.ndim != 1:
        raise ValueError("scores must be a vector")
    if scores.shape[0] == 0:
        return None, 0.0
    k = int(torch.argmax(scores))
    p = float(torch.sigmoid(scores[k]))
    if p >= theta:
        return k, p
    return None, p


def predict_sentence(sentence: Sentence, model: JointExtractor, cfg: "RunConfig") -> Prediction:
    """Full decode of one sentence.

    Enumerates spans up to the width limit, classifies them, keeps the
    spans that decode to a class, then classifies every ordered pair of
    surviving spans (self-pairs excluded).
    """
    pred = Prediction()
    ent_types = model.schema.entity_types
    rel_types = model.schema.relation_types
    theta_rel = cfg.theta_relation if cfg.theta_relation is not None else cfg.theta
    with torch.no_grad():
        spans = enumerate_spans(len(sentence.tokens), cfg.max_span_width)
        if not spans or not ent_types:
            return pred
        enc, align = model.encode(sentence)
        reprs = model.span_reprs(spans, enc, align)
        scores = model.entity_scores(reprs)
        surviving: list[int] = []
        for k in range(len(spans)):
            idx, p = decide(scores[k], cfg.theta)
            if idx is not None:
                pred.entities.append((spans[k], ent_types[idx], p))
                surviving.append(k)
        if not rel_types or len(surviving) < 2:
            return pred
        logits = model.prepare_logits(scores)
        for ka in surviving:
            for kb in surviving:
                if ka == kb:
                    continue
                feat = model.pair_feature(spans, ka, kb, reprs, logits, enc, align)
                idx, p = decide(model.relation_cls(feat), theta_rel)
                if idx is not None:
                    pred.relations.append((spans[ka], spans[kb], rel_types[idx], p))
    return pred


def prediction_to_record(sentence: Sentence, pred: Prediction) -> dict:
    """Serialize one prediction in the dataset format (plus score fields)."""
    span_index = {ent[0]: k for k, ent in enumerate(pred.entities)}
    return {
        "id": sentence.id,
        "tokens": list(sentence.tokens),
        "entities": [
            {"type": label, "start": span.i, "end": span.j + 1, "score": round(prob, 6)}
            for span, label, prob in pred.entities
        ],
        "relations": [
            {
                "type": label,
                "head": span_index[head],
                "tail": span_index[tail],
                "score": round(prob, 6),
            }
            for head, tail, label, prob in pred.relations
        ],
    }
