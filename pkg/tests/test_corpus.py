"""Dataset loading, validation, serialization, and fold assignment."""
from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from spanjer.corpus import (
    DatasetFormatError,
    EntityAnnotation,
    LabelSchema,
    Sentence,
    ValidationError,
    dataset_hash,
    load_dataset,
    make_folds,
    save_dataset,
    schema_from_records,
    split_fold,
)
from spanjer.spans import Span


def write(tmp_path, payload, name="data.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


GOOD = [
    {
        "id": "a",
        "tokens": ["alice", "works", "at", "acme", "corp"],
        "entities": [
            {"type": "person", "start": 0, "end": 1},
            {"type": "company", "start": 3, "end": 5},
        ],
        "relations": [{"type": "works-for", "head": 0, "tail": 1}],
    }
]


class TestLabelSchema:
    def test_indices(self, schema):
        assert schema.entity_index("company") == 1
        assert schema.relation_index("works-for") == 0

    def test_unknown_label(self, schema):
        with pytest.raises(ValidationError, match="unknown entity type"):
            schema.entity_index("planet")

    def test_rejects_duplicates(self):
        with pytest.raises(ValidationError):
            LabelSchema(("a", "a"), ())

    def test_rejects_reserved_name(self):
        with pytest.raises(ValidationError):
            LabelSchema(("NA",), ())


class TestLoad:
    def test_good_record(self, tmp_path, schema):
        sentences = load_dataset(write(tmp_path, GOOD), schema)
        assert len(sentences) == 1
        s = sentences[0]
        assert s.id == "a"
        assert s.entities[0] == EntityAnnotation("person", Span(0, 0))
        assert s.entities[1].span == Span(3, 4)  # exclusive end becomes inclusive
        assert s.relations[0].head == 0 and s.relations[0].tail == 1

    def test_missing_ids_generated(self, tmp_path, schema):
        rec = {k: v for k, v in GOOD[0].items() if k != "id"}
        sentences = load_dataset(write(tmp_path, [rec, rec]), schema)
        assert [s.id for s in sentences] == ["s0000", "s0001"]

    def test_empty_dataset(self, tmp_path, schema):
        assert load_dataset(write(tmp_path, []), schema) == []

    def test_extra_keys_ignored(self, tmp_path, schema):
        rec = dict(GOOD[0], extra="x", orig_id="ignored-when-id-present")
        assert load_dataset(write(tmp_path, [rec]), schema)[0].id == "a"

    def test_not_json(self, tmp_path, schema):
        path = tmp_path / "data.json"
        path.write_text("tokens: alice", encoding="utf-8")
        with pytest.raises(DatasetFormatError, match="not valid JSON"):
            load_dataset(path, schema)

    def test_missing_file(self, tmp_path, schema):
        with pytest.raises(DatasetFormatError, match="cannot read"):
            load_dataset(tmp_path / "nope.json", schema)

    def test_not_a_list(self, tmp_path, schema):
        with pytest.raises(DatasetFormatError, match="top level"):
            load_dataset(write(tmp_path, {"tokens": []}), schema)

    def test_empty_tokens(self, tmp_path, schema):
        with pytest.raises(DatasetFormatError, match="tokens"):
            load_dataset(write(tmp_path, [{"tokens": []}]), schema)

    def test_span_out_of_bounds(self, tmp_path, schema):
        rec = dict(GOOD[0], entities=[{"type": "person", "start": 0, "end": 9}])
        with pytest.raises(ValidationError, match="record 'a'"):
            load_dataset(write(tmp_path, [rec]), schema)

    def test_empty_span(self, tmp_path, schema):
        rec = dict(GOOD[0], entities=[{"type": "person", "start": 2, "end": 2}])
        with pytest.raises(ValidationError, match="out of bounds"):
            load_dataset(write(tmp_path, [rec]), schema)

    def test_unknown_entity_type(self, tmp_path, schema):
        rec = dict(GOOD[0], entities=[{"type": "planet", "start": 0, "end": 1}])
        with pytest.raises(ValidationError, match="planet"):
            load_dataset(write(tmp_path, [rec]), schema)

    def test_self_relation_rejected(self, tmp_path, schema):
        rec = dict(GOOD[0], relations=[{"type": "works-for", "head": 1, "tail": 1}])
        with pytest.raises(ValidationError, match="same entity"):
            load_dataset(write(tmp_path, [rec]), schema)

    def test_relation_index_out_of_range(self, tmp_path, schema):
        rec = dict(GOOD[0], relations=[{"type": "works-for", "head": 0, "tail": 5}])
        with pytest.raises(ValidationError, match="out of range"):
            load_dataset(write(tmp_path, [rec]), schema)

    def test_overlapping_entities_allowed(self, tmp_path, schema):
        rec = dict(
            GOOD[0],
            entities=[
                {"type": "person", "start": 0, "end": 2},
                {"type": "company", "start": 1, "end": 4},
            ],
            relations=[],
        )
        sentences = load_dataset(write(tmp_path, [rec]), schema)
        assert len(sentences[0].entities) == 2


class TestRoundTrip:
    def test_save_load_identity(self, tmp_path, schema, corpus):
        path = tmp_path / "roundtrip.json"
        save_dataset(corpus, path)
        again = load_dataset(path, schema)
        assert again == corpus
        assert dataset_hash(again) == dataset_hash(corpus)

    def test_hash_ignores_layout(self, tmp_path, schema):
        a = write(tmp_path, GOOD, "a.json")
        b = tmp_path / "b.json"
        b.write_text(json.dumps(GOOD, indent=4), encoding="utf-8")
        assert dataset_hash(load_dataset(a, schema)) == dataset_hash(load_dataset(b, schema))

    def test_schema_from_records(self):
        assert schema_from_records(GOOD) == LabelSchema(("company", "person"), ("works-for",))


def _tiny(n):
    return [Sentence(f"s{k}", ("w",)) for k in range(n)]


class TestFolds:
    def test_partition_and_sizes(self):
        sentences = _tiny(4272)
        plan = make_folds(sentences, 10, seed=5)
        sizes = plan.fold_sizes()
        assert sorted(set(sizes)) == [427, 428]
        assert sum(sizes) == 4272

    def test_split_disjoint_and_complete(self):
        sentences = _tiny(23)
        plan = make_folds(sentences, 5, seed=0)
        for fold in range(5):
            train, held = split_fold(plan, sentences, fold)
            assert len(train) + len(held) == 23
            assert not {s.id for s in train} & {s.id for s in held}

    def test_deterministic(self):
        sentences = _tiny(50)
        assert make_folds(sentences, 7, seed=3) == make_folds(sentences, 7, seed=3)
        assert make_folds(sentences, 7, seed=3) != make_folds(sentences, 7, seed=4)

    def test_k_validation(self):
        with pytest.raises(ValidationError):
            make_folds(_tiny(5), 1, seed=0)
        with pytest.raises(ValidationError):
            make_folds(_tiny(5), 6, seed=0)

    def test_duplicate_ids_rejected(self):
        bad = [Sentence("x", ("w",)), Sentence("x", ("w",))]
        with pytest.raises(ValidationError, match="unique"):
            make_folds(bad, 2, seed=0)

    @given(st.integers(2, 12), st.integers(12, 80), st.integers(0, 10))
    def test_property_balanced_partition(self, k, n, seed):
        sentences = _tiny(n)
        plan = make_folds(sentences, k, seed)
        sizes = plan.fold_sizes()
        assert sum(sizes) == n
        assert max(sizes) - min(sizes) <= 1
        assert set(plan.assignment) == {s.id for s in sentences}
