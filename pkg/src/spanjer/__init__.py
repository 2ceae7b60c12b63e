"""Span-based joint entity and relation extraction.

Candidate word spans and ordered span pairs are scored by a shared encoder
feeding two heads per task: a binary identification head that shapes
training (with overlap-scaled cross-entropy on the entity side) and a
margin-ranking classification head that decodes through a probability
threshold, with no explicit no-class column.
"""

from .config import RunConfig, build_model, load_checkpoint, save_checkpoint
from .corpus import (
    EntityAnnotation,
    LabelSchema,
    RelationAnnotation,
    Sentence,
    load_dataset,
    make_folds,
    save_dataset,
)
from .inference import Prediction, decide, predict_sentence
from .metrics import PRF, aggregate, match_entities, match_relations, summarize_folds
from .model import JointExtractor
from .spans import Span, enumerate_spans, iou, max_gold_iou
from .training import cross_validate, evaluate_model, sweep_negatives, train

__version__ = "0.1.0"

__all__ = [
    "EntityAnnotation",
    "JointExtractor",
    "LabelSchema",
    "PRF",
    "Prediction",
    "RelationAnnotation",
    "RunConfig",
    "Sentence",
    "Span",
    "aggregate",
    "build_model",
    "cross_validate",
    "decide",
    "enumerate_spans",
    "evaluate_model",
    "iou",
    "load_checkpoint",
    "load_dataset",
    "make_folds",
    "match_entities",
    "match_relations",
    "max_gold_iou",
    "predict_sentence",
    "save_checkpoint",
    "save_dataset",
    "summarize_folds",
    "sweep_negatives",
    "train",
    "__version__",
]
