"""Span and span-pair feature vectors built from encoder output.

For a span s over words i..j:

    v(s) = max-pool of the covered subtoken vectors          (d1)
    c(s) = [v(s); width_embedding(j - i + 1)]                (d1 + d2)
    x(s) = [c(s); sentence_vector]                           (2*d1 + d2)

For an ordered pair (head, tail) with entity-class score vectors p(.):

    r(head, tail) = [c(head); ctx; c(tail); p(head); p(tail)]

where ctx max-pools the words strictly between the two spans (zeros when
they touch or overlap), giving 3*d1 + 2*d2 + 2*d3 features.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .encoding import EncoderOutput, SubwordAlignment
from .spans import Span


@dataclass
class SpanRepr:
    """The three nested feature vectors of one span."""

    v: torch.Tensor
    c: torch.Tensor
    x: torch.Tensor


def make_width_embedding(
    max_width: int,
    dim: int,
    seed: int = 0,
    std: float = 0.02,
) -> nn.Embedding:
    """Lookup table for span widths 1..max_width (row 0 unused)."""
    if max_width < 1 or dim < 1:
        raise ValueError("max_width and dim must be positive")
    table = nn.Embedding(max_width + 1, dim)
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        table.weight.normal_(0.0, std, generator=gen)
    return table


def span_vector(span: Span, enc: EncoderOutput, align: SubwordAlignment) -> torch.Tensor:
    """Max-pool of the subtoken vectors covered by the span's words."""
    a, b = align.span_slice(span.i, span.j)
    return enc.token_vectors[a : b + 1].max(dim=0).values


def span_repr(
    span: Span,
    enc: EncoderOutput,
    align: SubwordAlignment,
    width_embedding: nn.Embedding,
) -> SpanRepr:
    if span.width >= width_embedding.num_embeddings:
        raise ValueError(
            f"span width {span.width} exceeds table limit {width_embedding.num_embeddings - 1}"
        )
    v = span_vector(span, enc, align)
    w = width_embedding(torch.tensor(span.width, dtype=torch.long))
    c = torch.cat([v, w])
    x = torch.cat([c, enc.sentence_vector])
    return SpanRepr(v=v, c=c, x=x)


def context_vector(
    a: Span, b: Span, enc: EncoderOutput, align: SubwordAlignment
) -> torch.Tensor:
    """Max-pool over the words strictly between two spans.

    Zeros when the spans are adjacent or overlap.  Symmetric in its span
    arguments.
    """
    lo = min(a.j, b.j)
    hi = max(a.i, b.i)
    if hi - lo < 2:
        return enc.token_vectors.new_zeros(enc.token_vectors.shape[1])
    s, e = align.span_slice(lo + 1, hi - 1)
    return enc.token_vectors[s : e + 1].max(dim=0).values


def relation_input(
    head: SpanRepr,
    tail: SpanRepr,
    ctx: torch.Tensor,
    head_logits: torch.Tensor,
    tail_logits: torch.Tensor,
) -> torch.Tensor:
    """Ordered-pair feature vector [c(head); ctx; c(tail); p(head); p(tail)]."""
    if head.c.shape != tail.c.shape:
        raise ValueError("head and tail span features disagree in size")
    if ctx.shape != head.v.shape:
        raise ValueError(f"context size {tuple(ctx.shape)} != span pool size {tuple(head.v.shape)}")
    if head_logits.shape != tail_logits.shape or head_logits.ndim != 1:
        raise ValueError("entity score vectors must be 1-d and equally sized")
    return torch.cat([head.c, ctx, tail.c, head_logits, tail_logits])
