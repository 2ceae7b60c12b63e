"""The joint extractor: encoder, width table, and four scoring heads."""
from __future__ import annotations

import logging
from typing import Sequence

import torch
from torch import nn

from .corpus import LabelSchema, Sentence
from .encoding import EncoderOutput, EncodingError, SubwordAlignment
from .heads import ClassificationHead, IdentificationHead
from .representation import (
    SpanRepr,
    context_vector,
    make_width_embedding,
    relation_input,
    span_repr,
)
from .spans import Span

log = logging.getLogger(__name__)


class JointExtractor(nn.Module):
    """Entity and relation scorer over one shared encoder.

    Entity heads read x(s) = [pooled span; width embedding; sentence vector];
    relation heads read the ordered-pair features built from both spans'
    c(.) vectors, the between-span context, and both spans' entity-class
    score vectors.
    """

    def __init__(
        self,
        encoder: nn.Module,
        schema: LabelSchema,
        max_span_width: int,
        width_dim: int,
        seed: int = 0,
        init_std: float = 0.02,
        logits_normalized: bool = False,
    ):
        super().__init__()
        if max_span_width < 1:
            raise ValueError("max_span_width must be >= 1")
        self.encoder = encoder
        self.schema = schema
        self.max_span_width = max_span_width
        self.logits_normalized = logits_normalized
        d1 = encoder.dim
        d2 = width_dim
        d3 = len(schema.entity_types)
        self.width_embedding = make_width_embedding(max_span_width, width_dim, seed=seed, std=init_std)
        self.entity_in = 2 * d1 + d2
        self.relation_in = 3 * d1 + 2 * d2 + 2 * d3
        self.entity_id = IdentificationHead(self.entity_in, seed=seed + 1, std=init_std)
        self.entity_cls = ClassificationHead(self.entity_in, d3, seed=seed + 2, std=init_std)
        self.relation_id = IdentificationHead(self.relation_in, seed=seed + 3, std=init_std)
        self.relation_cls = ClassificationHead(
            self.relation_in, len(schema.relation_types), seed=seed + 4, std=init_std
        )

    def encode(self, sentence: Sentence) -> tuple[EncoderOutput, SubwordAlignment]:
        """Run the encoder on one sentence, surfacing backend failures."""
        try:
            align = self.encoder.tokenize_align(sentence.tokens)
            out = self.encoder(sentence.tokens)
        except EncodingError:
            raise
        except Exception as exc:
            raise EncodingError(f"encoder failed on sentence {sentence.id!r}: {exc}") from exc
        if out.token_vectors.shape[0] != align.subtoken_count:
            raise EncodingError(
                f"sentence {sentence.id!r}: encoder emitted {out.token_vectors.shape[0]} "
                f"vectors for {align.subtoken_count} subtokens"
            )
        return out, align

    def span_reprs(
        self, spans: Sequence[Span], enc: EncoderOutput, align: SubwordAlignment
    ) -> list[SpanRepr]:
        return [span_repr(s, enc, align, self.width_embedding) for s in spans]

    def entity_scores(self, reprs: Sequence[SpanRepr]) -> torch.Tensor:
        """(len(reprs), n_entity_types) class scores."""
        x = torch.stack([r.x for r in reprs])
        return self.entity_cls(x)

    def entity_probs(self, reprs: Sequence[SpanRepr]) -> torch.Tensor:
        """(len(reprs),) identification probabilities."""
        x = torch.stack([r.x for r in reprs])
        return self.entity_id(x).squeeze(-1)

    def prepare_logits(self, scores: torch.Tensor) -> torch.Tensor:
        """Entity score rows as fed into pair features (optionally softmaxed)."""
        if self.logits_normalized and scores.shape[-1] > 0:
            return torch.softmax(scores, dim=-1)
        return scores

    def pair_feature(
        self,
        spans: Sequence[Span],
        head_k: int,
        tail_k: int,
        reprs: Sequence[SpanRepr],
        logits: torch.Tensor,
        enc: EncoderOutput,
        align: SubwordAlignment,
    ) -> torch.Tensor:
        ctx = context_vector(spans[head_k], spans[tail_k], enc, align)
        return relation_input(reprs[head_k], reprs[tail_k], ctx, logits[head_k], logits[tail_k])
