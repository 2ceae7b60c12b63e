"""Raw corpus converters on small synthetic inputs."""
from __future__ import annotations

import json

import pytest

from spanjer.convert import ConvertStats, convert, convert_ade, convert_json, convert_scierc
from spanjer.corpus import DatasetFormatError, build_sentences, schema_from_records


SCIERC_DOC = {
    "doc_key": "d1",
    "sentences": [["deep", "nets", "classify", "images"], ["they", "need", "data"]],
    "ner": [[[0, 1, "Method"], [3, 3, "Task"]], [[6, 6, "Material"]]],
    "relations": [[[0, 1, 3, 3, "Used-for"]], []],
}


class TestJsonPassthrough:
    def test_normalizes_and_keeps_ids(self, tmp_path):
        records = [
            {
                "tokens": ["a", "b"],
                "entities": [{"type": "x", "start": 0, "end": 1, "junk": 1}],
                "relations": [],
                "orig_id": "orig7",
            },
            {"tokens": ["c"], "entities": [], "relations": [], "id": "keep"},
        ]
        path = tmp_path / "in.json"
        path.write_text(json.dumps(records))
        out, stats = convert_json(path)
        assert stats.records_in == stats.records_out == 2
        assert out[0]["id"] == "orig7"
        assert out[1]["id"] == "keep"
        assert "junk" not in out[0]["entities"][0]


class TestScierc:
    def test_splits_and_reindexes(self, tmp_path):
        path = tmp_path / "in.jsonl"
        path.write_text(json.dumps(SCIERC_DOC) + "\n")
        out, stats = convert_scierc(path)
        assert stats.records_out == 2
        first, second = out
        assert first["id"] == "d1-0"
        assert first["tokens"] == ["deep", "nets", "classify", "images"]
        # inclusive doc-level (0, 1) becomes end-exclusive sentence-level (0, 2)
        assert first["entities"] == [
            {"type": "Method", "start": 0, "end": 2},
            {"type": "Task", "start": 3, "end": 4},
        ]
        assert first["relations"] == [{"type": "Used-for", "head": 0, "tail": 1}]
        # second sentence offsets by 4 tokens
        assert second["entities"] == [{"type": "Material", "start": 2, "end": 3}]
        assert second["relations"] == []

    def test_output_loads_cleanly(self, tmp_path):
        path = tmp_path / "in.jsonl"
        path.write_text(json.dumps(SCIERC_DOC) + "\n")
        out, _ = convert_scierc(path)
        sentences = build_sentences(out, schema_from_records(out))
        assert len(sentences) == 2

    def test_relation_without_entity_dropped(self, tmp_path):
        doc = dict(SCIERC_DOC, ner=[[[0, 1, "Method"]], []])
        path = tmp_path / "in.jsonl"
        path.write_text(json.dumps(doc) + "\n")
        out, stats = convert_scierc(path)
        assert out[0]["relations"] == []
        assert any("no entity" in w for w in stats.warnings)

    def test_bad_json_line(self, tmp_path):
        path = tmp_path / "in.jsonl"
        path.write_text("{broken\n")
        with pytest.raises(DatasetFormatError, match="line 1"):
            convert_scierc(path)

    def test_misaligned_annotations(self, tmp_path):
        doc = dict(SCIERC_DOC, ner=[[]])
        path = tmp_path / "in.jsonl"
        path.write_text(json.dumps(doc) + "\n")
        with pytest.raises(DatasetFormatError, match="align"):
            convert_scierc(path)


ADE_LINES = "\n".join(
    [
        "100|the drug aspirin caused severe rash today|severe rash|26|37|aspirin|9|16",
        "100|the drug aspirin caused severe rash today|rash|33|37|aspirin|9|16",
        "101|patients on ibuprofen developed nausea|nausea|99|99|ibuprofen|99|99",
    ]
)


class TestAde:
    def test_groups_by_sentence(self, tmp_path):
        path = tmp_path / "ade.rel"
        path.write_text(ADE_LINES + "\n")
        out, stats = convert_ade(path)
        assert stats.records_in == 3
        assert stats.records_out == 2
        first = out[0]
        assert first["tokens"] == ["the", "drug", "aspirin", "caused", "severe", "rash", "today"]
        assert {e["type"] for e in first["entities"]} == {"Adverse-Effect", "Drug"}
        # two relations (severe rash -> aspirin, rash -> aspirin), three entities
        assert len(first["entities"]) == 3
        assert len(first["relations"]) == 2
        heads = {r["head"] for r in first["relations"]}
        for rel in first["relations"]:
            assert first["entities"][rel["head"]]["type"] == "Adverse-Effect"
            assert first["entities"][rel["tail"]]["type"] == "Drug"

    def test_offsets_ignored_alignment_by_text(self, tmp_path):
        # bogus character offsets (99) must not matter
        path = tmp_path / "ade.rel"
        path.write_text(ADE_LINES.splitlines()[2] + "\n")
        out, _ = convert_ade(path)
        assert out[0]["entities"] == [
            {"type": "Adverse-Effect", "start": 4, "end": 5},
            {"type": "Drug", "start": 2, "end": 3},
        ]

    def test_unalignable_record_skipped(self, tmp_path):
        path = tmp_path / "ade.rel"
        path.write_text("102|short sentence here|missing words|0|0|sentence|0|0\n")
        out, stats = convert_ade(path)
        assert out == []
        assert stats.skipped == 1
        assert any("cannot align" in w for w in stats.warnings)

    def test_substring_not_on_token_boundary(self, tmp_path):
        # "pir" occurs inside "aspirin" but never as whole tokens
        path = tmp_path / "ade.rel"
        path.write_text("103|aspirin helps|pir|0|0|aspirin|0|0\n")
        out, stats = convert_ade(path)
        assert out == []
        assert stats.skipped == 1

    def test_short_line_counted(self, tmp_path):
        path = tmp_path / "ade.rel"
        path.write_text("104|only|three\n")
        out, stats = convert_ade(path)
        assert out == []
        assert stats.skipped == 1

    def test_output_loads_cleanly(self, tmp_path):
        path = tmp_path / "ade.rel"
        path.write_text(ADE_LINES + "\n")
        out, _ = convert_ade(path)
        sentences = build_sentences(out, schema_from_records(out))
        assert len(sentences) == 2


class TestDispatch:
    def test_known_formats(self):
        from spanjer.convert import CONVERTERS

        assert set(CONVERTERS) == {"json", "conll04", "scierc", "ade"}

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError, match="unknown format"):
            convert("tacred", tmp_path / "x")
