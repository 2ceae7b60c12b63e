"""Command-line interface.

Subcommands: convert, train, evaluate, predict, cross-validate,
sweep-negatives.  Exit codes: 0 on success, 1 on configuration or data
validation problems, 2 on runtime failures.
"""
from __future__ import annotations

import argparse
import json
import logging
import time
from pathlib import Path

from .config import (
    ConfigError,
    RunConfig,
    config_from_dict,
    config_to_dict,
    load_checkpoint,
    load_config_file,
    save_checkpoint,
)
from .convert import CONVERTERS, convert
from .corpus import (
    DatasetFormatError,
    LabelSchema,
    ValidationError,
    build_sentences,
    collect_labels,
    dataset_hash,
    load_dataset,
    read_records,
    schema_from_records,
)
from .encoding import EncodingError
from .inference import predict_sentence, prediction_to_record
from .training import (
    TrainingError,
    cross_validate,
    evaluate_model,
    render_fold_table,
    render_report_table,
    render_report_text,
    render_sweep_table,
    sweep_negatives,
    train,
)

log = logging.getLogger(__name__)


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we report exit code 1
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage().rstrip()}")


_CONFIG_FLAGS = [
    ("--max-span-width", "max_span_width", int),
    ("--neg-entity", "neg_entity", int),
    ("--neg-relation", "neg_relation", int),
    ("--epochs", "epochs", int),
    ("--batch-size", "batch_size", int),
    ("--learning-rate", "learning_rate", float),
    ("--warmup-fraction", "warmup_fraction", float),
    ("--weight-decay", "weight_decay", float),
    ("--grad-clip", "grad_clip", float),
    ("--width-dim", "width_dim", int),
    ("--gamma", "gamma", float),
    ("--m-pos", "m_pos", float),
    ("--m-neg", "m_neg", float),
    ("--delta", "delta", float),
    ("--theta", "theta", float),
    ("--theta-relation", "theta_relation", float),
    ("--alpha", "alpha", float),
    ("--beta", "beta", float),
    ("--seed", "seed", int),
    ("--init-std", "init_std", float),
    ("--logits-normalized", "logits_normalized", lambda s: _parse_bool(s)),
    ("--encoder-kind", "encoder_kind", str),
    ("--encoder-dim", "encoder_dim", int),
    ("--encoder-model-name", "encoder_model_name", str),
    ("--encoder-buckets", "encoder_buckets", int),
]


def _parse_bool(value: str) -> bool:
    low = value.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {value!r}")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="configuration file (JSON or key = value lines)")
    group = parser.add_argument_group("configuration overrides")
    for flag, dest, typ in _CONFIG_FLAGS:
        group.add_argument(flag, dest=dest, type=typ, default=None)


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, overridden by the config file, overridden by explicit flags."""
    values: dict = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    for _, dest, _ in _CONFIG_FLAGS:
        flag_value = getattr(args, dest, None)
        if flag_value is not None:
            values[dest] = flag_value
    return config_from_dict(values)


def _load_schema_file(path: str) -> LabelSchema:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read schema {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid schema JSON: {exc.msg}") from exc
    if not isinstance(data, dict) or "entity_types" not in data or "relation_types" not in data:
        raise ConfigError(f"{path}: schema must define entity_types and relation_types")
    return LabelSchema(tuple(data["entity_types"]), tuple(data["relation_types"]))


def _resolve_schema(args: argparse.Namespace, records: list[dict]) -> LabelSchema:
    if getattr(args, "schema", None):
        return _load_schema_file(args.schema)
    schema = schema_from_records(records)
    log.info(
        "derived schema from data: %d entity types, %d relation types",
        len(schema.entity_types),
        len(schema.relation_types),
    )
    return schema


def _make_run_dir(out: str, run_name: str | None) -> Path:
    base = Path(out)
    base.mkdir(parents=True, exist_ok=True)
    if run_name:
        run = base / run_name
        if run.exists():
            raise ConfigError(f"run directory {run} already exists (runs are append-only)")
        run.mkdir()
        return run
    stamp = time.strftime("%Y%m%d-%H%M%S")
    for n in range(1000):
        run = base / (f"run-{stamp}" if n == 0 else f"run-{stamp}-{n}")
        if not run.exists():
            run.mkdir()
            return run
    raise ConfigError(f"cannot allocate a run directory under {base}")


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def cmd_convert(args: argparse.Namespace) -> int:
    records, stats = convert(args.format, args.input)
    # self-check: the output must load back under its own derived schema
    build_sentences(records, schema_from_records(records))
    Path(args.output).write_text(json.dumps(records, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")
    if args.schema_out:
        ent, rel = collect_labels(records)
        _write_json(Path(args.schema_out), {"entity_types": ent, "relation_types": rel})
    log.info(
        "converted %d input records into %d sentences (%d skipped, %d warnings)",
        stats.records_in,
        stats.records_out,
        stats.skipped,
        len(stats.warnings),
    )
    print(args.output)
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    records = read_records(args.train)
    schema = _resolve_schema(args, records)
    train_set = build_sentences(records, schema)
    dev_set = load_dataset(args.dev, schema) if args.dev else None
    result = train(cfg, train_set, schema, dev_set=dev_set)
    run_dir = _make_run_dir(args.out, args.run_name)
    _write_json(run_dir / "config.json", config_to_dict(cfg))
    save_checkpoint(run_dir / "checkpoint.pt", result.model, cfg, schema, result.provenance)
    eval_set = dev_set if dev_set else train_set
    report = evaluate_model(result.model, cfg, eval_set, mode=args.mode)
    extra = {
        "evaluated_on": "dev" if dev_set else "train",
        "dataset_hash": result.provenance["dataset_hash"],
    }
    (run_dir / "report.txt").write_text(render_report_text(report, extra), encoding="utf-8")
    (run_dir / "report.tsv").write_text(render_report_table(report), encoding="utf-8")
    history = ["epoch\tloss\tdev_entity_f1\tdev_relation_f1"]
    for h in result.history:
        dev_e = "" if h.dev_entity_f1 is None else f"{h.dev_entity_f1:.6f}"
        dev_r = "" if h.dev_relation_f1 is None else f"{h.dev_relation_f1:.6f}"
        history.append(f"{h.epoch}\t{h.loss:.6f}\t{dev_e}\t{dev_r}")
    (run_dir / "history.tsv").write_text("\n".join(history) + "\n", encoding="utf-8")
    print(run_dir)
    return 0


def _load_eval_data(ckpt, data_path: str):
    records = read_records(data_path)
    ent, rel = collect_labels(records)
    unknown_e = [t for t in ent if t not in ckpt.schema.entity_types]
    unknown_r = [t for t in rel if t not in ckpt.schema.relation_types]
    if unknown_e or unknown_r:
        raise ValidationError(
            f"dataset labels absent from checkpoint schema: "
            f"entity types {unknown_e}, relation types {unknown_r}"
        )
    return build_sentences(records, ckpt.schema)


def cmd_evaluate(args: argparse.Namespace) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    data = _load_eval_data(ckpt, args.data)
    report = evaluate_model(ckpt.model, ckpt.config, data, mode=args.mode)
    text = render_report_text(report, extra={"dataset_hash": dataset_hash(data)})
    print(text, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(text, encoding="utf-8")
        (out / "report.tsv").write_text(render_report_table(report), encoding="utf-8")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    data = _load_eval_data(ckpt, args.data)
    records = [
        prediction_to_record(s, predict_sentence(s, ckpt.model, ckpt.config)) for s in data
    ]
    Path(args.output).write_text(json.dumps(records, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")
    print(args.output)
    return 0


def cmd_cross_validate(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    records = read_records(args.data)
    schema = _resolve_schema(args, records)
    sentences = build_sentences(records, schema)
    result = cross_validate(cfg, sentences, schema, k=args.folds, mode=args.mode)
    table = render_fold_table(result)
    run_dir = _make_run_dir(args.out, args.run_name)
    _write_json(run_dir / "config.json", config_to_dict(cfg))
    (run_dir / "folds.tsv").write_text(table, encoding="utf-8")
    print(table, end="")
    return 0


def cmd_sweep_negatives(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    records = read_records(args.data)
    schema = _resolve_schema(args, records)
    train_set = build_sentences(records, schema)
    eval_set = load_dataset(args.eval_data, schema) if args.eval_data else None
    try:
        counts = [int(c) for c in args.counts.split(",") if c.strip() != ""]
    except ValueError:
        raise UsageError(f"--counts expects comma-separated integers, got {args.counts!r}") from None
    rows = sweep_negatives(cfg, train_set, schema, counts, eval_set=eval_set, mode=args.mode)
    table = render_sweep_table(rows)
    run_dir = _make_run_dir(args.out, args.run_name)
    _write_json(run_dir / "config.json", config_to_dict(cfg))
    (run_dir / "sweep.tsv").write_text(table, encoding="utf-8")
    print(table, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spanjer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("convert", help="convert a raw corpus release into the dataset format")
    p.add_argument("--format", required=True, choices=sorted(CONVERTERS))
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--schema-out", dest="schema_out", default=None)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("train", help="train a model and write a run directory")
    p.add_argument("--train", required=True)
    p.add_argument("--dev", default=None)
    p.add_argument("--schema", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--run-name", dest="run_name", default=None)
    p.add_argument("--mode", choices=("micro", "macro"), default="micro")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint against a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--mode", choices=("micro", "macro"), default="micro")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="write predictions for a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("cross-validate", help="k-fold cross-validation")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--run-name", dest="run_name", default=None)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--mode", choices=("micro", "macro"), default="micro")
    _add_config_flags(p)
    p.set_defaults(func=cmd_cross_validate)

    p = sub.add_parser("sweep-negatives", help="retrain across negative-sample budgets")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--run-name", dest="run_name", default=None)
    p.add_argument("--counts", required=True, help="comma-separated budgets, e.g. 0,60,120")
    p.add_argument("--eval-data", dest="eval_data", default=None)
    p.add_argument("--mode", choices=("micro", "macro"), default="micro")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep_negatives)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (UsageError, ConfigError, ValidationError, DatasetFormatError) as exc:
        log.error("%s", exc)
        return 1
    except ValueError as exc:
        log.error("%s", exc)
        return 1
    except (TrainingError, EncodingError) as exc:
        log.error("%s", exc)
        return 2
    except KeyboardInterrupt:
        return 2
    except Exception:
        log.exception("unexpected failure")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
