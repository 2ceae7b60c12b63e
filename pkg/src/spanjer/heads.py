"""Scoring heads and losses for the identify-then-classify framework.

Both tasks (entities, relations) run two heads over the same input features:

  * identification: a linear layer squashed to a probability, trained with
    binary cross-entropy.  The entity side uses an overlap-scaled variant
    that up-weights negatives overlapping a gold span.
  * classification: bias-free class scores trained with a pairwise ranking
    loss against margins.  There is no column for the no-class outcome; a
    candidate with no gold class only pushes its best-scoring class down.

Losses given plain Python numbers are computed in float64; tensor inputs
keep their dtype so training stays in the model's precision.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import torch
import torch.nn.functional as F
from torch import nn

log = logging.getLogger(__name__)

PROB_EPS = 1e-7


@dataclass(frozen=True)
class RankingLossConfig:
    """Scale and margins of the pairwise ranking loss."""

    gamma: float = 2.0
    m_pos: float = 2.5
    m_neg: float = 0.5

    def __post_init__(self) -> None:
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")


@dataclass(frozen=True)
class TaskLossConfig:
    """Weights combining a task's identification and classification sums."""

    alpha: float = 1.0
    beta: float = 1.0
    delta: float = 0.25

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        if self.delta >= 0.5:
            log.warning("delta=%.3f >= 0.5 weights negatives above positives", self.delta)


def _normal_init(module: nn.Linear, seed: int, std: float) -> None:
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        module.weight.normal_(0.0, std, generator=gen)
        if module.bias is not None:
            module.bias.zero_()


class IdentificationHead(nn.Module):
    """Single-logit binary head producing a probability in (0, 1)."""

    def __init__(self, in_features: int, seed: int = 0, std: float = 0.02):
        super().__init__()
        self.linear = nn.Linear(in_features, 1)
        _normal_init(self.linear, seed, std)

    @property
    def in_features(self) -> int:
        return self.linear.in_features

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.linear(features))


class ClassificationHead(nn.Module):
    """Bias-free linear scores, one column per class and none for no-class."""

    def __init__(self, in_features: int, n_classes: int, seed: int = 0, std: float = 0.02):
        super().__init__()
        self.linear = nn.Linear(in_features, n_classes, bias=False)
        _normal_init(self.linear, seed, std)

    @property
    def in_features(self) -> int:
        return self.linear.in_features

    @property
    def n_classes(self) -> int:
        return self.linear.out_features

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        return self.linear(features)


def class_scores(features: torch.Tensor, head: ClassificationHead) -> torch.Tensor:
    """Score every class for one feature vector (or a batch of them)."""
    if features.shape[-1] != head.in_features:
        raise ValueError(f"feature size {features.shape[-1]} != head input {head.in_features}")
    return head(features)


def _as_loss_tensor(value) -> torch.Tensor:
    if isinstance(value, torch.Tensor):
        return value
    return torch.as_tensor(value, dtype=torch.float64)


def bce(p, q) -> torch.Tensor:
    """Binary cross-entropy -q*log(p) - (1-q)*log(1-p), p clamped away from {0,1}."""
    q = float(q)
    if q not in (0.0, 1.0):
        raise ValueError(f"q must be 0 or 1, got {q}")
    p = _as_loss_tensor(p)
    p = p.clamp(PROB_EPS, 1.0 - PROB_EPS)
    return -(q * torch.log(p)) - ((1.0 - q) * torch.log1p(-p))


def scaled_bce(p, q, overlap, delta: float) -> torch.Tensor:
    """Overlap-weighted binary cross-entropy for span identification.

    Positives are weighted (1 - delta); negatives delta * (1 + overlap),
    where overlap is the span's best IoU against the gold spans.  Negatives
    that nearly coincide with a gold span therefore cost up to twice as
    much as disjoint ones.
    """
    q = float(q)
    if q not in (0.0, 1.0):
        raise ValueError(f"q must be 0 or 1, got {q}")
    overlap = float(overlap)
    if not 0.0 <= overlap <= 1.0:
        raise ValueError(f"overlap must lie in [0, 1], got {overlap}")
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    p = _as_loss_tensor(p)
    p = p.clamp(PROB_EPS, 1.0 - PROB_EPS)
    pos = q * (1.0 - delta) * torch.log(p)
    neg = (1.0 - q) * delta * (1.0 + overlap) * torch.log1p(-p)
    return -pos - neg


def ranking_loss(scores, gold: int | None, cfg: RankingLossConfig) -> torch.Tensor:
    """Margin ranking loss over one candidate's class scores.

    With a gold class: softplus(gamma * (m_pos - score[gold])) pulls the
    gold score above m_pos, and (when another class exists)
    softplus(gamma * (m_neg + max other score)) pushes the single
    best-scoring wrong class below -m_neg.  Without a gold class only the
    push-down term applies, on the best-scoring class overall.  Ties pick
    the lowest class index.
    """
    scores = _as_loss_tensor(scores)
    if scores.ndim == 0:
        scores = scores.reshape(1)
    if scores.ndim != 1:
        raise ValueError("scores must be a vector")
    n = scores.shape[0]
    if gold is None:
        if n == 0:
            return torch.zeros((), dtype=scores.dtype)
        k = int(torch.argmax(scores))
        return F.softplus(cfg.gamma * (cfg.m_neg + scores[k]))
    if not 0 <= gold < n:
        raise ValueError(f"gold class {gold} out of range for {n} classes")
    loss = F.softplus(cfg.gamma * (cfg.m_pos - scores[gold]))
    if n >= 2:
        masked = scores.detach().clone()
        masked[gold] = torch.finfo(scores.dtype).min
        k = int(torch.argmax(masked))
        loss = loss + F.softplus(cfg.gamma * (cfg.m_neg + scores[k]))
    return loss


def _sum_losses(losses: Sequence) -> torch.Tensor:
    if len(losses) == 0:
        return torch.zeros((), dtype=torch.float64)
    return torch.stack([_as_loss_tensor(l) for l in losses]).sum()


def task_loss(id_losses: Sequence, cls_losses: Sequence, cfg: TaskLossConfig) -> torch.Tensor:
    """alpha * sum(identification) + beta * sum(classification)."""
    return cfg.alpha * _sum_losses(id_losses) + cfg.beta * _sum_losses(cls_losses)


def joint_loss(entity_loss, relation_loss) -> torch.Tensor:
    return _as_loss_tensor(entity_loss) + _as_loss_tensor(relation_loss)
