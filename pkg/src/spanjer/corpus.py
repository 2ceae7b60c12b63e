"""Annotated-corpus data model: loading, validation, serialization, folds.

The on-disk dataset format is a JSON file holding a list of records:

    {"id": "...", "tokens": [...],
     "entities": [{"type": "...", "start": 0, "end": 2}, ...],
     "relations": [{"type": "...", "head": 0, "tail": 1}, ...]}

`start`/`end` are word offsets with an exclusive end; `head`/`tail` index
into the record's entity list.  Internally entity spans are inclusive
(Span.i, Span.j).  Unknown record keys are ignored so that files carrying
extra fields (scores, provenance) still load.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .spans import Span

log = logging.getLogger(__name__)


class DatasetFormatError(ValueError):
    """The file is not structurally a dataset (bad JSON, wrong shapes)."""


class ValidationError(ValueError):
    """The dataset is well-formed but semantically inconsistent."""


@dataclass(frozen=True)
class EntityAnnotation:
    label: str
    span: Span


@dataclass(frozen=True)
class RelationAnnotation:
    label: str
    head: int
    tail: int


@dataclass(frozen=True)
class Sentence:
    id: str
    tokens: tuple[str, ...]
    entities: tuple[EntityAnnotation, ...] = ()
    relations: tuple[RelationAnnotation, ...] = ()


@dataclass(frozen=True)
class LabelSchema:
    """The closed sets of entity and relation type names.

    The no-relation / no-entity outcome is implicit and never listed.
    """

    entity_types: tuple[str, ...]
    relation_types: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "entity_types", tuple(self.entity_types))
        object.__setattr__(self, "relation_types", tuple(self.relation_types))
        for kind, names in (("entity", self.entity_types), ("relation", self.relation_types)):
            if len(set(names)) != len(names):
                raise ValidationError(f"duplicate {kind} type names: {names}")
            for name in names:
                if not name or not isinstance(name, str):
                    raise ValidationError(f"{kind} type names must be non-empty strings")
                if name == "NA":
                    raise ValidationError("'NA' is reserved for the no-class outcome")

    def entity_index(self, name: str) -> int:
        try:
            return self.entity_types.index(name)
        except ValueError:
            raise ValidationError(
                f"unknown entity type {name!r}; known: {list(self.entity_types)}"
            ) from None

    def relation_index(self, name: str) -> int:
        try:
            return self.relation_types.index(name)
        except ValueError:
            raise ValidationError(
                f"unknown relation type {name!r}; known: {list(self.relation_types)}"
            ) from None


def _require(cond: bool, where: str, message: str) -> None:
    if not cond:
        raise DatasetFormatError(f"{where}: {message}")


def _as_index(value, where: str, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise DatasetFormatError(f"{where}: {what} must be an integer, got {value!r}")
    return value


def read_records(path: str | Path) -> list[dict]:
    """Parse the dataset file into raw record dicts with structural checks only."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetFormatError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{path}: not valid JSON (line {exc.lineno}): {exc.msg}") from exc
    _require(isinstance(data, list), str(path), "top level must be a list of records")
    for idx, rec in enumerate(data):
        where = f"{path} record {idx}"
        _require(isinstance(rec, dict), where, "record must be an object")
        tokens = rec.get("tokens")
        _require(isinstance(tokens, list) and len(tokens) > 0, where, "tokens must be a non-empty list")
        _require(
            all(isinstance(t, str) and t != "" for t in tokens),
            where,
            "tokens must be non-empty strings",
        )
        for key in ("entities", "relations"):
            val = rec.get(key, [])
            _require(isinstance(val, list), where, f"{key} must be a list")
            _require(all(isinstance(x, dict) for x in val), where, f"{key} entries must be objects")
    return data


def sentence_from_record(rec: dict, schema: LabelSchema, fallback_id: str) -> Sentence:
    """Build one validated Sentence from a raw record."""
    rec_id = rec.get("id", rec.get("orig_id", fallback_id))
    rec_id = str(rec_id)
    where = f"record {rec_id!r}"
    tokens = tuple(rec["tokens"])
    entities = []
    for k, ent in enumerate(rec.get("entities", [])):
        label = ent.get("type")
        if not isinstance(label, str):
            raise DatasetFormatError(f"{where} entity {k}: missing type")
        start = _as_index(ent.get("start"), where, f"entity {k} start")
        end = _as_index(ent.get("end"), where, f"entity {k} end")
        if not (0 <= start < end <= len(tokens)):
            raise ValidationError(
                f"{where} entity {k}: offsets [{start}, {end}) out of bounds for {len(tokens)} tokens"
            )
        if label not in schema.entity_types:
            raise ValidationError(
                f"{where} entity {k}: unknown entity type {label!r}; known: {list(schema.entity_types)}"
            )
        entities.append(EntityAnnotation(label, Span(start, end - 1)))
    relations = []
    for k, rel in enumerate(rec.get("relations", [])):
        label = rel.get("type")
        if not isinstance(label, str):
            raise DatasetFormatError(f"{where} relation {k}: missing type")
        head = _as_index(rel.get("head"), where, f"relation {k} head")
        tail = _as_index(rel.get("tail"), where, f"relation {k} tail")
        n_ent = len(entities)
        if not (0 <= head < n_ent and 0 <= tail < n_ent):
            raise ValidationError(
                f"{where} relation {k}: argument index out of range (have {n_ent} entities)"
            )
        if head == tail:
            raise ValidationError(f"{where} relation {k}: head and tail are the same entity")
        if label not in schema.relation_types:
            raise ValidationError(
                f"{where} relation {k}: unknown relation type {label!r}; known: {list(schema.relation_types)}"
            )
        relations.append(RelationAnnotation(label, head, tail))
    return Sentence(rec_id, tokens, tuple(entities), tuple(relations))


def build_sentences(records: Sequence[dict], schema: LabelSchema) -> list[Sentence]:
    return [
        sentence_from_record(rec, schema, fallback_id=f"s{idx:04d}")
        for idx, rec in enumerate(records)
    ]


def load_dataset(path: str | Path, schema: LabelSchema) -> list[Sentence]:
    """Load and validate a dataset file against a label schema."""
    return build_sentences(read_records(path), schema)


def collect_labels(records: Iterable[dict]) -> tuple[list[str], list[str]]:
    """Sorted unique entity and relation type names appearing in raw records."""
    ent, rel = set(), set()
    for rec in records:
        for e in rec.get("entities", []):
            if isinstance(e.get("type"), str):
                ent.add(e["type"])
        for r in rec.get("relations", []):
            if isinstance(r.get("type"), str):
                rel.add(r["type"])
    return sorted(ent), sorted(rel)


def schema_from_records(records: Iterable[dict]) -> LabelSchema:
    ent, rel = collect_labels(records)
    return LabelSchema(tuple(ent), tuple(rel))


def sentence_to_record(sentence: Sentence) -> dict:
    return {
        "id": sentence.id,
        "tokens": list(sentence.tokens),
        "entities": [
            {"type": e.label, "start": e.span.i, "end": e.span.j + 1}
            for e in sentence.entities
        ],
        "relations": [
            {"type": r.label, "head": r.head, "tail": r.tail}
            for r in sentence.relations
        ],
    }


def save_dataset(sentences: Iterable[Sentence], path: str | Path) -> None:
    records = [sentence_to_record(s) for s in sentences]
    Path(path).write_text(json.dumps(records, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")


def dataset_hash(sentences: Iterable[Sentence]) -> str:
    """Stable content hash of a dataset, independent of file layout."""
    canon = json.dumps([sentence_to_record(s) for s in sentences], sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of sentence ids to folds 0..k-1."""

    k: int
    seed: int
    assignment: dict[str, int] = field(hash=False)

    def fold_sizes(self) -> list[int]:
        sizes = [0] * self.k
        for f in self.assignment.values():
            sizes[f] += 1
        return sizes


def make_folds(sentences: Sequence[Sentence], k: int, seed: int) -> FoldPlan:
    """Shuffle-and-deal fold assignment; fold sizes differ by at most one."""
    if k < 2:
        raise ValidationError(f"need at least 2 folds, got {k}")
    if k > len(sentences):
        raise ValidationError(f"cannot split {len(sentences)} sentences into {k} folds")
    ids = [s.id for s in sentences]
    if len(set(ids)) != len(ids):
        raise ValidationError("sentence ids must be unique for fold assignment")
    order = np.random.default_rng(seed).permutation(len(sentences))
    assignment = {ids[int(idx)]: pos % k for pos, idx in enumerate(order)}
    return FoldPlan(k=k, seed=seed, assignment=assignment)


def split_fold(
    plan: FoldPlan, sentences: Sequence[Sentence], fold: int
) -> tuple[list[Sentence], list[Sentence]]:
    """(train, held-out) partition of `sentences` for one fold."""
    if not 0 <= fold < plan.k:
        raise ValidationError(f"fold {fold} out of range for k={plan.k}")
    train, held = [], []
    for s in sentences:
        (held if plan.assignment[s.id] == fold else train).append(s)
    return train, held
