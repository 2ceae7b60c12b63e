"""Training loop, evaluation, cross-validation, and the negative-count sweep."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import torch

from .config import RunConfig, build_model
from .corpus import LabelSchema, Sentence, dataset_hash, make_folds, split_fold
from .heads import (
    RankingLossConfig,
    TaskLossConfig,
    bce,
    joint_loss,
    ranking_loss,
    scaled_bce,
    task_loss,
)
from .inference import predict_sentence
from .metrics import (
    PRF,
    FoldSummary,
    aggregate,
    match_entities,
    match_relations,
    merge_counts,
    per_type_prf,
    summarize_folds,
)
from .model import JointExtractor
from .spans import draw_entity_samples, draw_relation_samples

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    """Training hit a non-recoverable numeric or setup failure."""


@dataclass
class SentenceLosses:
    entity_id: list = field(default_factory=list)
    entity_cls: list = field(default_factory=list)
    relation_id: list = field(default_factory=list)
    relation_cls: list = field(default_factory=list)

    def extend(self, other: "SentenceLosses") -> None:
        self.entity_id.extend(other.entity_id)
        self.entity_cls.extend(other.entity_cls)
        self.relation_id.extend(other.relation_id)
        self.relation_cls.extend(other.relation_cls)


def sentence_losses(
    model: JointExtractor,
    sentence: Sentence,
    cfg: RunConfig,
    rng: np.random.Generator,
) -> SentenceLosses:
    """Per-sample losses for one sentence under fresh negative draws.

    Entity identification uses the overlap-scaled binary cross-entropy;
    relation identification the plain one.  Both classification heads use
    the margin ranking loss.  Gold spans wider than the span limit cannot
    be represented and are skipped (with their relations).
    """
    out = SentenceLosses()
    rank_cfg = RankingLossConfig(gamma=cfg.gamma, m_pos=cfg.m_pos, m_neg=cfg.m_neg)
    enc, align = model.encode(sentence)

    samples = draw_entity_samples(sentence, cfg.max_span_width, cfg.neg_entity, rng)
    usable = [s for s in samples if s.span.width <= cfg.max_span_width]
    if len(usable) < len(samples):
        log.warning(
            "sentence %s: dropping %d gold spans wider than %d words",
            sentence.id,
            len(samples) - len(usable),
            cfg.max_span_width,
        )
    if not usable:
        return out
    spans = [s.span for s in usable]
    reprs = model.span_reprs(spans, enc, align)
    probs = model.entity_probs(reprs)
    scores = model.entity_scores(reprs)
    for k, sample in enumerate(usable):
        q = 1 if sample.positive else 0
        out.entity_id.append(scaled_bce(probs[k], q, sample.gold_iou, cfg.delta))
        gold = model.schema.entity_index(sample.label) if sample.positive else None
        out.entity_cls.append(ranking_loss(scores[k], gold, rank_cfg))

    pairs = draw_relation_samples(sentence, cfg.neg_relation, rng)
    if pairs:
        index = {span: k for k, span in enumerate(spans)}
        logits = model.prepare_logits(scores)
        feats = []
        kept = []
        for ps in pairs:
            kh = index.get(ps.head)
            kt = index.get(ps.tail)
            if kh is None or kt is None:
                log.warning("sentence %s: skipping pair with an unrepresentable span", sentence.id)
                continue
            feats.append(model.pair_feature(spans, kh, kt, reprs, logits, enc, align))
            kept.append(ps)
        if feats:
            stacked = torch.stack(feats)
            rprobs = model.relation_id(stacked).squeeze(-1)
            rscores = model.relation_cls(stacked)
            for k, ps in enumerate(kept):
                out.relation_id.append(bce(rprobs[k], 1 if ps.positive else 0))
                gold = model.schema.relation_index(ps.label) if ps.positive else None
                out.relation_cls.append(ranking_loss(rscores[k], gold, rank_cfg))
    return out


def _lr_factor(step: int, total: int, warmup: int) -> float:
    if step < warmup:
        return step / max(1, warmup)
    return max(0.0, (total - step) / max(1, total - warmup))


@dataclass
class EpochLog:
    epoch: int
    loss: float
    dev_entity_f1: float | None = None
    dev_relation_f1: float | None = None


@dataclass
class TrainResult:
    model: JointExtractor
    config: RunConfig
    schema: LabelSchema
    history: list[EpochLog]
    provenance: dict


def train(
    cfg: RunConfig,
    train_set: Sequence[Sentence],
    schema: LabelSchema,
    dev_set: Sequence[Sentence] | None = None,
    on_step: Callable[[JointExtractor, int], None] | None = None,
) -> TrainResult:
    """Train a fresh model; identical inputs and seed give identical results.

    All randomness (initialization, epoch order, negative draws) derives
    from cfg.seed, so reruns reproduce the same parameters bit for bit.
    """
    if not train_set:
        raise TrainingError("training set is empty")
    model = build_model(cfg, schema)
    model.train()
    task_cfg = TaskLossConfig(alpha=cfg.alpha, beta=cfg.beta, delta=cfg.delta)
    optimizer = torch.optim.Adam(
        model.parameters(), lr=cfg.learning_rate, weight_decay=cfg.weight_decay
    )
    n = len(train_set)
    batches_per_epoch = math.ceil(n / cfg.batch_size)
    total_steps = cfg.epochs * batches_per_epoch
    warmup_steps = int(round(cfg.warmup_fraction * total_steps))
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda s: _lr_factor(s, max(1, total_steps), warmup_steps)
    )
    history: list[EpochLog] = []
    step = 0
    for epoch in range(cfg.epochs):
        order = np.random.default_rng([cfg.seed, 7919, epoch]).permutation(n)
        epoch_loss = 0.0
        for b in range(batches_per_epoch):
            batch_idx = order[b * cfg.batch_size : (b + 1) * cfg.batch_size]
            pooled = SentenceLosses()
            for idx in batch_idx:
                rng = np.random.default_rng([cfg.seed, 104729, epoch, int(idx)])
                pooled.extend(sentence_losses(model, train_set[int(idx)], cfg, rng))
            entity_loss = task_loss(pooled.entity_id, pooled.entity_cls, task_cfg)
            relation_loss = task_loss(pooled.relation_id, pooled.relation_cls, task_cfg)
            total = joint_loss(entity_loss, relation_loss)
            if not bool(torch.isfinite(total)):
                parts = {
                    "entity identification": pooled.entity_id,
                    "entity classification": pooled.entity_cls,
                    "relation identification": pooled.relation_id,
                    "relation classification": pooled.relation_cls,
                }
                bad = [
                    name
                    for name, losses in parts.items()
                    if losses and not bool(torch.isfinite(torch.stack(losses).sum()))
                ]
                ids = [train_set[int(i)].id for i in batch_idx]
                raise TrainingError(
                    f"non-finite loss at epoch {epoch} step {step} on sentences {ids}: "
                    + (", ".join(bad) or "combined")
                )
            optimizer.zero_grad()
            total.backward()
            if cfg.grad_clip > 0:
                torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            optimizer.step()
            scheduler.step()
            step += 1
            epoch_loss += float(total.detach())
            if on_step is not None:
                on_step(model, step)
        entry = EpochLog(epoch=epoch, loss=epoch_loss / batches_per_epoch)
        if dev_set:
            report = evaluate_model(model, cfg, dev_set)
            entry.dev_entity_f1 = report.entity.micro.f1
            entry.dev_relation_f1 = report.relation.micro.f1
            log.info(
                "epoch %d: loss %.4f, dev entity F1 %.4f, dev relation F1 %.4f",
                epoch,
                entry.loss,
                entry.dev_entity_f1,
                entry.dev_relation_f1,
            )
        else:
            log.info("epoch %d: loss %.4f", epoch, entry.loss)
        history.append(entry)
    model.eval()
    provenance = {
        "dataset_hash": dataset_hash(train_set),
        "n_sentences": n,
        "seed": cfg.seed,
        "epochs_run": cfg.epochs,
    }
    return TrainResult(model=model, config=cfg, schema=schema, history=history, provenance=provenance)


@dataclass
class TaskScores:
    per_type: dict[str, PRF]
    micro: PRF
    macro: PRF


@dataclass
class EvalReport:
    n_sentences: int
    mode: str
    entity: TaskScores
    relation: TaskScores

    def headline(self) -> tuple[PRF, PRF]:
        if self.mode == "macro":
            return self.entity.macro, self.relation.macro
        return self.entity.micro, self.relation.micro


def evaluate_model(
    model: JointExtractor,
    cfg: RunConfig,
    sentences: Sequence[Sentence],
    mode: str = "micro",
) -> EvalReport:
    """Predict every sentence and score against its gold annotations."""
    if mode not in ("micro", "macro"):
        raise ValueError(f"unknown aggregation mode {mode!r}")
    ent_counts: dict = {}
    rel_counts: dict = {}
    for sentence in sentences:
        pred = predict_sentence(sentence, model, cfg)
        gold_entities = [(e.span, e.label) for e in sentence.entities]
        gold_relations = [
            (sentence.entities[r.head].span, sentence.entities[r.tail].span, r.label)
            for r in sentence.relations
        ]
        ent_counts = merge_counts(
            ent_counts, match_entities(gold_entities, [(s, t) for s, t, _ in pred.entities])
        )
        rel_counts = merge_counts(
            rel_counts,
            match_relations(gold_relations, [(h, t, l) for h, t, l, _ in pred.relations]),
        )
    return EvalReport(
        n_sentences=len(sentences),
        mode=mode,
        entity=TaskScores(
            per_type=per_type_prf(ent_counts),
            micro=aggregate(ent_counts, "micro"),
            macro=aggregate(ent_counts, "macro"),
        ),
        relation=TaskScores(
            per_type=per_type_prf(rel_counts),
            micro=aggregate(rel_counts, "micro"),
            macro=aggregate(rel_counts, "macro"),
        ),
    )


# --- report rendering (deterministic: fixed precision, no timestamps) ---


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def render_report_text(report: EvalReport, extra: dict | None = None) -> str:
    lines = [
        f"sentences = {report.n_sentences}",
        f"mode = {report.mode}",
    ]
    for key, value in (extra or {}).items():
        lines.append(f"{key} = {value}")
    for task_name, task in (("entity", report.entity), ("relation", report.relation)):
        for agg_name, prf in (("micro", task.micro), ("macro", task.macro)):
            lines.append(f"{task_name}.{agg_name}.precision = {_fmt(prf.precision)}")
            lines.append(f"{task_name}.{agg_name}.recall = {_fmt(prf.recall)}")
            lines.append(f"{task_name}.{agg_name}.f1 = {_fmt(prf.f1)}")
    return "\n".join(lines) + "\n"


def render_report_table(report: EvalReport) -> str:
    rows = ["task\ttype\ttp\tfp\tfn\tprecision\trecall\tf1"]
    for task_name, task in (("entity", report.entity), ("relation", report.relation)):
        for type_name in sorted(task.per_type):
            p = task.per_type[type_name]
            rows.append(
                f"{task_name}\t{type_name}\t{p.tp}\t{p.fp}\t{p.fn}"
                f"\t{_fmt(p.precision)}\t{_fmt(p.recall)}\t{_fmt(p.f1)}"
            )
        for agg_name, p in (("micro", task.micro), ("macro", task.macro)):
            rows.append(
                f"{task_name}\t[{agg_name}]\t{p.tp}\t{p.fp}\t{p.fn}"
                f"\t{_fmt(p.precision)}\t{_fmt(p.recall)}\t{_fmt(p.f1)}"
            )
    return "\n".join(rows) + "\n"


# --- cross-validation ---


@dataclass
class FoldRow:
    fold: int
    entity: PRF
    relation: PRF


@dataclass
class CrossValResult:
    rows: list[FoldRow]
    entity_summary: FoldSummary
    relation_summary: FoldSummary
    mode: str


def cross_validate(
    cfg: RunConfig,
    sentences: Sequence[Sentence],
    schema: LabelSchema,
    k: int,
    mode: str = "micro",
) -> CrossValResult:
    """k-fold train/evaluate; fold seeds derive from the master seed."""
    plan = make_folds(sentences, k, cfg.seed)
    rows = []
    for fold in range(k):
        fold_train, fold_held = split_fold(plan, sentences, fold)
        fold_cfg = replace(cfg, seed=cfg.seed + fold + 1)
        result = train(fold_cfg, fold_train, schema)
        report = evaluate_model(result.model, fold_cfg, fold_held, mode=mode)
        ent, rel = report.headline()
        rows.append(FoldRow(fold=fold, entity=ent, relation=rel))
        log.info("fold %d: entity F1 %.4f, relation F1 %.4f", fold, ent.f1, rel.f1)
    return CrossValResult(
        rows=rows,
        entity_summary=summarize_folds([r.entity for r in rows]),
        relation_summary=summarize_folds([r.relation for r in rows]),
        mode=mode,
    )


def render_fold_table(result: CrossValResult) -> str:
    rows = ["fold\tentity_precision\tentity_recall\tentity_f1\trelation_precision\trelation_recall\trelation_f1"]
    for r in result.rows:
        rows.append(
            f"{r.fold}\t{_fmt(r.entity.precision)}\t{_fmt(r.entity.recall)}\t{_fmt(r.entity.f1)}"
            f"\t{_fmt(r.relation.precision)}\t{_fmt(r.relation.recall)}\t{_fmt(r.relation.f1)}"
        )
    for name, s in (("entity", result.entity_summary), ("relation", result.relation_summary)):
        rows.append(
            f"{name}[mean±std]\t{_fmt(s.precision_mean)}±{_fmt(s.precision_std)}"
            f"\t{_fmt(s.recall_mean)}±{_fmt(s.recall_std)}"
            f"\t{_fmt(s.f1_mean)}±{_fmt(s.f1_std)}"
        )
    return "\n".join(rows) + "\n"


# --- negative-count sweep ---


@dataclass
class SweepRow:
    negatives: int
    entity: PRF
    relation: PRF


def sweep_negatives(
    cfg: RunConfig,
    train_set: Sequence[Sentence],
    schema: LabelSchema,
    counts: Sequence[int],
    eval_set: Sequence[Sentence] | None = None,
    mode: str = "micro",
) -> list[SweepRow]:
    """Retrain with each negative-sample budget and score on eval_set.

    Both the entity and relation budgets are set to each count.  When
    eval_set is omitted the training set is scored, which isolates the
    effect of negative sampling on fitting rather than generalization.
    """
    if not counts:
        raise ValueError("need at least one negative count")
    held = eval_set if eval_set is not None else train_set
    rows = []
    for count in counts:
        run_cfg = replace(cfg, neg_entity=int(count), neg_relation=int(count))
        result = train(run_cfg, train_set, schema)
        report = evaluate_model(result.model, run_cfg, held, mode=mode)
        ent, rel = report.headline()
        rows.append(SweepRow(negatives=int(count), entity=ent, relation=rel))
        log.info("negatives %d: entity F1 %.4f, relation F1 %.4f", count, ent.f1, rel.f1)
    return rows


def render_sweep_table(rows: Sequence[SweepRow]) -> str:
    out = ["negatives\tentity_precision\tentity_recall\tentity_f1\trelation_precision\trelation_recall\trelation_f1"]
    for r in rows:
        out.append(
            f"{r.negatives}\t{_fmt(r.entity.precision)}\t{_fmt(r.entity.recall)}\t{_fmt(r.entity.f1)}"
            f"\t{_fmt(r.relation.precision)}\t{_fmt(r.relation.recall)}\t{_fmt(r.relation.f1)}"
        )
    return "\n".join(out) + "\n"
