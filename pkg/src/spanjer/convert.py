"""Converters from common raw corpus releases into the dataset format.

Supported inputs:

  * json    — a file already shaped like our format (possibly with extra
              keys such as orig_id); records are normalized and re-checked.
  * scierc  — one JSON document per line with doc-level token indices and
              inclusive span ends; split into per-sentence records.
  * ade     — the pipe-separated drug/adverse-effect relation file.  Its
              character offsets refer to the enclosing abstract, not the
              quoted sentence, so entity strings are located by a
              token-boundary search inside the sentence text; records
              whose entities cannot be aligned are skipped and counted.

Converters return raw record dicts; full schema validation happens when
the written file is loaded again.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import DatasetFormatError, read_records

log = logging.getLogger(__name__)

ADE_DRUG = "Drug"
ADE_EFFECT = "Adverse-Effect"
ADE_RELATION = "Adverse-Effect"


@dataclass
class ConvertStats:
    records_in: int = 0
    records_out: int = 0
    skipped: int = 0
    warnings: list[str] = field(default_factory=list)

    def warn(self, message: str) -> None:
        self.warnings.append(message)
        log.warning("%s", message)


def convert_json(path: str | Path) -> tuple[list[dict], ConvertStats]:
    """Normalize a file already in (or near) the dataset format."""
    stats = ConvertStats()
    records = read_records(path)
    out = []
    for idx, rec in enumerate(records):
        stats.records_in += 1
        rec_id = rec.get("id", rec.get("orig_id", f"s{idx:04d}"))
        out.append(
            {
                "id": str(rec_id),
                "tokens": list(rec["tokens"]),
                "entities": [
                    {"type": e["type"], "start": e["start"], "end": e["end"]}
                    for e in rec.get("entities", [])
                ],
                "relations": [
                    {"type": r["type"], "head": r["head"], "tail": r["tail"]}
                    for r in rec.get("relations", [])
                ],
            }
        )
        stats.records_out += 1
    return out, stats


def convert_scierc(path: str | Path) -> tuple[list[dict], ConvertStats]:
    """Split doc-level jsonl annotations into per-sentence records.

    Expects per line: {"doc_key", "sentences": [[w, ...], ...],
    "ner": [[[start, end, type], ...], ...],
    "relations": [[[h_start, h_end, t_start, t_end, type], ...], ...]}
    with token indices counted over the whole document and inclusive ends.
    """
    path = Path(path)
    stats = ConvertStats()
    out = []
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DatasetFormatError(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        stats.records_in += 1
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"{path} line {lineno}: invalid JSON: {exc.msg}") from exc
        doc_key = doc.get("doc_key", f"doc{lineno}")
        sentences = doc.get("sentences")
        if not isinstance(sentences, list) or not sentences:
            raise DatasetFormatError(f"{path} line {lineno}: missing sentences")
        ner = doc.get("ner", [[] for _ in sentences])
        relations = doc.get("relations", [[] for _ in sentences])
        if len(ner) != len(sentences) or len(relations) != len(sentences):
            raise DatasetFormatError(
                f"{path} line {lineno}: ner/relations do not align with sentences"
            )
        offset = 0
        for s_idx, tokens in enumerate(sentences):
            n = len(tokens)
            entities = []
            span_index: dict[tuple[int, int], int] = {}
            for start, end, label in ner[s_idx]:
                a, b = start - offset, end - offset
                if not (0 <= a <= b < n):
                    stats.warn(f"{doc_key} sentence {s_idx}: entity ({start}, {end}) out of bounds")
                    continue
                key = (a, b)
                if key not in span_index:
                    span_index[key] = len(entities)
                    entities.append({"type": label, "start": a, "end": b + 1})
            rels = []
            for h_start, h_end, t_start, t_end, label in relations[s_idx]:
                hk = (h_start - offset, h_end - offset)
                tk = (t_start - offset, t_end - offset)
                if hk not in span_index or tk not in span_index:
                    stats.warn(f"{doc_key} sentence {s_idx}: relation argument has no entity")
                    continue
                if span_index[hk] == span_index[tk]:
                    stats.warn(f"{doc_key} sentence {s_idx}: dropping self-relation")
                    continue
                rels.append({"type": label, "head": span_index[hk], "tail": span_index[tk]})
            out.append(
                {
                    "id": f"{doc_key}-{s_idx}",
                    "tokens": list(tokens),
                    "entities": entities,
                    "relations": rels,
                }
            )
            stats.records_out += 1
            offset += n
    return out, stats


def _token_offsets(tokens: list[str], text: str) -> list[tuple[int, int]]:
    """Character [start, end) of each whitespace token inside text."""
    offsets = []
    pos = 0
    for tok in tokens:
        start = text.index(tok, pos)
        offsets.append((start, start + len(tok)))
        pos = start + len(tok)
    return offsets


def _locate(surface: str, text: str, offsets: list[tuple[int, int]]) -> tuple[int, int] | None:
    """First occurrence of surface aligned to token boundaries, as token span."""
    starts = {s: k for k, (s, _) in enumerate(offsets)}
    ends = {e: k for k, (_, e) in enumerate(offsets)}
    pos = 0
    while True:
        at = text.find(surface, pos)
        if at == -1:
            return None
        stop = at + len(surface)
        if at in starts and stop in ends:
            return starts[at], ends[stop]
        pos = at + 1


def convert_ade(path: str | Path) -> tuple[list[dict], ConvertStats]:
    """Build sentence records from pipe-separated adverse-effect lines.

    Line format: pmid | sentence | effect text | . | . | drug text | . | .
    (offset columns are ignored; see module docstring).  Lines sharing the
    same (pmid, sentence) merge into one record.  Relations point from the
    effect span to the drug span.
    """
    path = Path(path)
    stats = ConvertStats()
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DatasetFormatError(f"cannot read {path}: {exc}") from exc
    grouped: dict[tuple[str, str], list[tuple[str, str]]] = {}
    order: list[tuple[str, str]] = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        stats.records_in += 1
        parts = [p.strip() for p in line.split("|")]
        if len(parts) < 8:
            stats.warn(f"line {lineno}: expected 8 pipe-separated fields, got {len(parts)}")
            stats.skipped += 1
            continue
        pmid, text, effect, _, _, drug = parts[0], parts[1], parts[2], parts[3], parts[4], parts[5]
        key = (pmid, text)
        if key not in grouped:
            grouped[key] = []
            order.append(key)
        grouped[key].append((effect, drug))
    out = []
    for seq, key in enumerate(order):
        pmid, text = key
        tokens = text.split()
        if not tokens:
            stats.warn(f"{pmid}: empty sentence text")
            stats.skipped += 1
            continue
        offsets = _token_offsets(tokens, text)
        entities: list[dict] = []
        span_index: dict[tuple[int, int, str], int] = {}

        def _entity(surface: str, label: str) -> int | None:
            span = _locate(surface, text, offsets)
            if span is None:
                return None
            ekey = (span[0], span[1], label)
            if ekey not in span_index:
                span_index[ekey] = len(entities)
                entities.append({"type": label, "start": span[0], "end": span[1] + 1})
            return span_index[ekey]

        rels = []
        ok = True
        for effect, drug in grouped[key]:
            e_idx = _entity(effect, ADE_EFFECT)
            d_idx = _entity(drug, ADE_DRUG)
            if e_idx is None or d_idx is None:
                missing = effect if e_idx is None else drug
                stats.warn(f"{pmid}: cannot align {missing!r} to token boundaries")
                ok = False
                break
            if e_idx == d_idx:
                stats.warn(f"{pmid}: effect and drug collapse to one span; dropping relation")
                continue
            rels.append({"type": ADE_RELATION, "head": e_idx, "tail": d_idx})
        if not ok:
            stats.skipped += 1
            continue
        out.append(
            {
                "id": f"{pmid}-{seq}",
                "tokens": tokens,
                "entities": entities,
                "relations": rels,
            }
        )
        stats.records_out += 1
    return out, stats


CONVERTERS = {
    "json": convert_json,
    "conll04": convert_json,  # the distributed conll04 JSON is already in this shape
    "scierc": convert_scierc,
    "ade": convert_ade,
}


def convert(format_name: str, path: str | Path) -> tuple[list[dict], ConvertStats]:
    try:
        fn = CONVERTERS[format_name]
    except KeyError:
        raise ValueError(
            f"unknown format {format_name!r}; choose from {sorted(CONVERTERS)}"
        ) from None
    return fn(path)
