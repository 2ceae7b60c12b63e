"""Run configuration, model construction, and checkpoint persistence."""
from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import torch

from .corpus import LabelSchema
from .encoding import build_encoder
from .model import JointExtractor

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


class ConfigError(ValueError):
    """A configuration value or file is invalid."""


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to rebuild and retrain a model deterministically."""

    max_span_width: int = 10
    neg_entity: int = 120
    neg_relation: int = 120
    epochs: int = 20
    batch_size: int = 2
    learning_rate: float = 5e-5
    warmup_fraction: float = 0.1
    weight_decay: float = 0.0
    grad_clip: float = 0.0
    width_dim: int = 25
    gamma: float = 2.0
    m_pos: float = 2.5
    m_neg: float = 0.5
    delta: float = 0.25
    theta: float = 0.85
    theta_relation: float | None = None
    alpha: float = 1.0
    beta: float = 1.0
    seed: int = 42
    init_std: float = 0.02
    logits_normalized: bool = False
    encoder_kind: str = "toy"
    encoder_dim: int = 32
    encoder_model_name: str = ""
    encoder_buckets: int = 2048
    encoder_subwords: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        checks = [
            (self.max_span_width >= 1, "max_span_width must be >= 1"),
            (self.neg_entity >= 0, "neg_entity must be >= 0"),
            (self.neg_relation >= 0, "neg_relation must be >= 0"),
            (self.epochs >= 0, "epochs must be >= 0"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (self.learning_rate > 0, "learning_rate must be positive"),
            (0.0 <= self.warmup_fraction < 1.0, "warmup_fraction must lie in [0, 1)"),
            (self.weight_decay >= 0, "weight_decay must be >= 0"),
            (self.grad_clip >= 0, "grad_clip must be >= 0 (0 disables clipping)"),
            (self.width_dim >= 1, "width_dim must be >= 1"),
            (self.gamma > 0, "gamma must be positive"),
            (0.0 <= self.delta <= 1.0, "delta must lie in [0, 1]"),
            (0.0 < self.theta <= 1.0, "theta must lie in (0, 1]"),
            (
                self.theta_relation is None or 0.0 < self.theta_relation <= 1.0,
                "theta_relation must lie in (0, 1]",
            ),
            (self.alpha >= 0, "alpha must be >= 0"),
            (self.beta >= 0, "beta must be >= 0"),
            (self.seed >= 0, "seed must be >= 0"),
            (self.init_std > 0, "init_std must be positive"),
            (self.encoder_kind in ("toy", "pretrained"), "encoder_kind must be 'toy' or 'pretrained'"),
            (self.encoder_dim >= 1, "encoder_dim must be >= 1"),
            (self.encoder_buckets >= 1, "encoder_buckets must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        object.__setattr__(self, "encoder_subwords", tuple(self.encoder_subwords))


def config_to_dict(cfg: RunConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["encoder_subwords"] = list(d["encoder_subwords"])
    return d


def config_from_dict(values: dict) -> RunConfig:
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {unknown}")
    return RunConfig(**values)


def load_config_file(path: str | Path) -> dict:
    """Read a configuration file: JSON, or one `key = value` pair per line."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config JSON must be an object")
        return data
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path} line {lineno}: expected key = value")
        key, _, raw = line.partition("=")
        raw = raw.strip()
        try:
            values[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            values[key.strip()] = raw
    return values


def build_model(cfg: RunConfig, schema: LabelSchema) -> JointExtractor:
    """Construct the extractor with seeded initialization throughout."""
    encoder = build_encoder(
        kind=cfg.encoder_kind,
        dim=cfg.encoder_dim,
        model_name=cfg.encoder_model_name,
        buckets=cfg.encoder_buckets,
        subwords=cfg.encoder_subwords,
        seed=cfg.seed,
    )
    return JointExtractor(
        encoder,
        schema,
        max_span_width=cfg.max_span_width,
        width_dim=cfg.width_dim,
        seed=cfg.seed + 1,
        init_std=cfg.init_std,
        logits_normalized=cfg.logits_normalized,
    )


@dataclass
class LoadedCheckpoint:
    model: JointExtractor
    config: RunConfig
    schema: LabelSchema
    provenance: dict


def save_checkpoint(
    path: str | Path,
    model: JointExtractor,
    cfg: RunConfig,
    schema: LabelSchema,
    provenance: dict | None = None,
) -> None:
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "config": config_to_dict(cfg),
        "schema": {
            "entity_types": list(schema.entity_types),
            "relation_types": list(schema.relation_types),
        },
        "model_state": model.state_dict(),
        "provenance": provenance or {},
    }
    torch.save(payload, str(path))


def load_checkpoint(path: str | Path) -> LoadedCheckpoint:
    try:
        payload = torch.load(str(path), map_location="cpu", weights_only=True)
    except Exception as exc:
        raise ConfigError(f"cannot load checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise ConfigError(f"{path}: not a checkpoint file")
    version = payload["format_version"]
    if version != CHECKPOINT_VERSION:
        raise ConfigError(f"{path}: checkpoint version {version} unsupported (want {CHECKPOINT_VERSION})")
    cfg = config_from_dict(payload["config"])
    schema = LabelSchema(
        tuple(payload["schema"]["entity_types"]),
        tuple(payload["schema"]["relation_types"]),
    )
    model = build_model(cfg, schema)
    model.load_state_dict(payload["model_state"])
    model.eval()
    return LoadedCheckpoint(model=model, config=cfg, schema=schema, provenance=payload["provenance"])
