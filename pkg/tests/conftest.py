"""Shared fixtures: a small deterministic corpus the toy model can overfit."""
from __future__ import annotations

import pytest

from spanjer.config import RunConfig
from spanjer.corpus import (
    EntityAnnotation,
    LabelSchema,
    RelationAnnotation,
    Sentence,
    save_dataset,
)
from spanjer.spans import Span

SCHEMA = LabelSchema(("person", "company"), ("works-for",))


def _sentence(sid, tokens, ents, rels):
    return Sentence(
        sid,
        tuple(tokens),
        tuple(EntityAnnotation(label, Span(a, b)) for label, a, b in ents),
        tuple(RelationAnnotation(label, h, t) for label, h, t in rels),
    )


def make_corpus() -> list[Sentence]:
    """Eight sentences, two entity types, one relation type.

    Multi-word company names guarantee negatives that overlap gold spans,
    so overlap-scaled identification actually differs from the plain one.
    """
    w = "works-for"
    return [
        _sentence("s1", ["alice", "works", "at", "acme", "corp"],
                  [("person", 0, 0), ("company", 3, 4)], [(w, 0, 1)]),
        _sentence("s2", ["bob", "joined", "globex", "inc"],
                  [("person", 0, 0), ("company", 2, 3)], [(w, 0, 1)]),
        _sentence("s3", ["carol", "leads", "initech"],
                  [("person", 0, 0), ("company", 2, 2)], [(w, 0, 1)]),
        _sentence("s4", ["dave", "works", "at", "umbrella", "labs"],
                  [("person", 0, 0), ("company", 3, 4)], [(w, 0, 1)]),
        _sentence("s5", ["alice", "joined", "initech"],
                  [("person", 0, 0), ("company", 2, 2)], [(w, 0, 1)]),
        _sentence("s6", ["bob", "leads", "acme", "corp"],
                  [("person", 0, 0), ("company", 2, 3)], [(w, 0, 1)]),
        _sentence("s7", ["carol", "works", "at", "globex", "inc"],
                  [("person", 0, 0), ("company", 3, 4)], [(w, 0, 1)]),
        _sentence("s8", ["dave", "joined", "umbrella", "labs"],
                  [("person", 0, 0), ("company", 2, 3)], [(w, 0, 1)]),
    ]


def overfit_config(**overrides) -> RunConfig:
    """50 epochs x 4 batches = 200 steps; enough to drive the corpus to zero error."""
    base = dict(epochs=50, batch_size=2, learning_rate=0.02, seed=13, encoder_dim=32)
    base.update(overrides)
    return RunConfig(**base)


@pytest.fixture(scope="session")
def schema() -> LabelSchema:
    return SCHEMA


@pytest.fixture(scope="session")
def corpus() -> list[Sentence]:
    return make_corpus()


@pytest.fixture(scope="session")
def corpus_file(tmp_path_factory, corpus):
    path = tmp_path_factory.mktemp("data") / "corpus.json"
    save_dataset(corpus, path)
    return path


@pytest.fixture(scope="session")
def trained(corpus, schema):
    """One overfit training run shared by the tests that need a good model."""
    from spanjer.training import train

    cfg = overfit_config()
    return train(cfg, corpus, schema)
