"""Command-line entry point: validate, train, evaluate, score, inspect-weights.

Training runs are described by an INI-style config file:

    [model]
    mode = regression              ; or classification
    repr_source = weighted_sum     ; or last_layer
    use_adapter = true
    adapter_dim = 256
    head_hidden = 128

    [training]
    epochs = 30
    batch_size = 5
    lr = 1e-4
    seed = 0
    selection_metric = system_lcc  ; or system_srcc / system_mse

    [data]
    train_manifest = train.ndjson
    valid_manifest = valid.ndjson  ; omit to split train_manifest instead
    repr_dir = reprs/
    split_fraction = 0.8           ; used only when valid_manifest is absent
    split_seed = <training seed>

    [output]
    out_dir = runs/exp1

Every key except the data paths and out_dir has the default shown above.
The resolved config (all defaults materialized) is echoed into the output
directory for provenance; L and D are inferred from the representation
files themselves.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from pathlib import Path

from .errors import ConfigError, VoicesimError
from .metrics import evaluate
from .model import (
    MODE_CLASSIFICATION,
    MODE_REGRESSION,
    SOURCE_LAST_LAYER,
    SOURCE_WEIGHTED_SUM,
    ModelConfig,
    forward,
    layer_weights,
    load_checkpoint,
    save_checkpoint,
)
from .repr_store import load_manifest, read_lrp, split_dataset, validate_manifest
from .training import SELECTION_METRICS, TrainConfig, train, write_history

_MODEL_DEFAULTS = {
    "mode": MODE_REGRESSION,
    "repr_source": SOURCE_WEIGHTED_SUM,
    "use_adapter": "true",
    "adapter_dim": "256",
    "head_hidden": "128",
}
_TRAINING_DEFAULTS = {
    "epochs": "30",
    "batch_size": "5",
    "lr": "1e-4",
    "seed": "0",
    "selection_metric": "system_lcc",
}


def _load_run_config(path: Path) -> configparser.ConfigParser:
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    for section, defaults in (("model", _MODEL_DEFAULTS), ("training", _TRAINING_DEFAULTS)):
        if not parser.has_section(section):
            parser.add_section(section)
        for key, value in defaults.items():
            if not parser.has_option(section, key):
                parser.set(section, key, value)
    for section in ("data", "output"):
        if not parser.has_section(section):
            raise ConfigError(f"config is missing the [{section}] section")
    for key in ("train_manifest", "repr_dir"):
        if not parser.has_option("data", key):
            raise ConfigError(f"config is missing data.{key}")
    if not parser.has_option("output", "out_dir"):
        raise ConfigError("config is missing output.out_dir")
    if not parser.has_option("data", "split_fraction"):
        parser.set("data", "split_fraction", "0.8")
    if not parser.has_option("data", "split_seed"):
        parser.set("data", "split_seed", parser.get("training", "seed"))
    return parser


def _getint(parser, section, key) -> int:
    try:
        return parser.getint(section, key)
    except ValueError as exc:
        raise ConfigError(f"{section}.{key} must be an integer") from exc


def _getfloat(parser, section, key) -> float:
    try:
        return parser.getfloat(section, key)
    except ValueError as exc:
        raise ConfigError(f"{section}.{key} must be a number") from exc


def _getbool(parser, section, key) -> bool:
    try:
        return parser.getboolean(section, key)
    except ValueError as exc:
        raise ConfigError(f"{section}.{key} must be a boolean") from exc


def cmd_validate(args) -> int:
    problems = validate_manifest(args.manifest, args.repr_dir)
    if problems:
        for problem in problems:
            print(f"error: {problem}", file=sys.stderr)
        print(f"{len(problems)} problem(s) found", file=sys.stderr)
        return 1
    ds = load_manifest(args.manifest, args.repr_dir)
    print(f"{len(ds)} pairs OK (L={ds.num_layers}, D={ds.dim})")
    return 0


def cmd_train(args) -> int:
    parser = _load_run_config(Path(args.config))
    base = Path(args.config).parent

    def data_path(key):
        p = Path(parser.get("data", key))
        return p if p.is_absolute() else base / p

    mode = parser.get("model", "mode")
    repr_source = parser.get("model", "repr_source")
    if mode not in (MODE_REGRESSION, MODE_CLASSIFICATION):
        raise ConfigError(f"model.mode must be regression or classification, got '{mode}'")
    if repr_source not in (SOURCE_WEIGHTED_SUM, SOURCE_LAST_LAYER):
        raise ConfigError(
            f"model.repr_source must be weighted_sum or last_layer, got '{repr_source}'"
        )
    selection_metric = parser.get("training", "selection_metric")
    if selection_metric not in SELECTION_METRICS:
        raise ConfigError(
            f"training.selection_metric must be one of {', '.join(SELECTION_METRICS)}"
        )

    repr_dir = data_path("repr_dir")
    train_ds = load_manifest(data_path("train_manifest"), repr_dir)
    if parser.has_option("data", "valid_manifest"):
        valid_ds = load_manifest(data_path("valid_manifest"), repr_dir)
        if (valid_ds.num_layers, valid_ds.dim) != (train_ds.num_layers, train_ds.dim):
            raise ConfigError(
                "train and valid manifests disagree on representation dimensions"
            )
    else:
        train_ds, valid_ds = split_dataset(
            train_ds,
            _getfloat(parser, "data", "split_fraction"),
            _getint(parser, "data", "split_seed"),
        )

    cfg = ModelConfig(
        mode=mode,
        repr_source=repr_source,
        use_adapter=_getbool(parser, "model", "use_adapter"),
        num_layers=train_ds.num_layers,
        repr_dim=train_ds.dim,
        adapter_dim=_getint(parser, "model", "adapter_dim"),
        head_hidden=_getint(parser, "model", "head_hidden"),
    )
    tcfg = TrainConfig(
        epochs=_getint(parser, "training", "epochs"),
        batch_size=_getint(parser, "training", "batch_size"),
        lr=_getfloat(parser, "training", "lr"),
        seed=_getint(parser, "training", "seed"),
        selection_metric=selection_metric,
    )
    tcfg.validate()

    out_dir = Path(parser.get("output", "out_dir"))
    if not out_dir.is_absolute():
        out_dir = base / out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "resolved.cfg", "w", encoding="utf-8") as fh:
        parser.write(fh)

    def on_epoch(record):
        block = record["valid"]["system"]
        print(
            f"epoch {record['epoch']:4d}  loss {record['train_loss']:.6f}  "
            f"system lcc {block['lcc'] if block['lcc'] is not None else 'n/a'}  "
            f"srcc {block['srcc'] if block['srcc'] is not None else 'n/a'}  "
            f"mse {block['mse']:.6f}"
        )

    result = train(train_ds, valid_ds, cfg, tcfg, on_epoch=on_epoch)
    save_checkpoint(out_dir / "best.svs1", result.best_params, cfg)
    save_checkpoint(out_dir / "final.svs1", result.final_params, cfg)
    write_history(out_dir / "history.ndjson", result.history)
    print(
        f"selected epoch {result.best_epoch} by {tcfg.selection_metric}; "
        f"checkpoints and history written to {out_dir}"
    )
    return 0


def cmd_evaluate(args) -> int:
    params, cfg = load_checkpoint(args.checkpoint)
    ds = load_manifest(args.manifest, args.repr_dir)
    report = evaluate(params, cfg, ds)
    text = report.to_json()
    print(text)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text + "\n", encoding="utf-8")
    if args.per_system_csv:
        report.write_per_system_csv(args.per_system_csv)
    return 0


def cmd_score(args) -> int:
    params, cfg = load_checkpoint(args.checkpoint)
    repr_t = read_lrp(args.test_lrp)
    repr_r = read_lrp(args.ref_lrp)
    output = forward(repr_t, repr_r, params, cfg)
    print(f"{output.score:.6f}")
    return 0


def cmd_inspect_weights(args) -> int:
    params, cfg = load_checkpoint(args.checkpoint)
    if cfg.repr_source != SOURCE_WEIGHTED_SUM:
        print(
            "checkpoint uses the last-layer representation; "
            "no layer weights are learned in this mode"
        )
        return 0
    weights = layer_weights(params.layer_logits)
    print("layer  weight")
    for idx, weight in enumerate(weights):
        print(f"{idx:5d}  {weight:.6f}")
    print(f"  sum  {weights.sum():.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voicesim",
        description="Speaker voice similarity scoring on precomputed representations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a manifest and its representation files")
    p.add_argument("manifest")
    p.add_argument("repr_dir")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("train", help="train a scorer from a run config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a manifest")
    p.add_argument("checkpoint")
    p.add_argument("manifest")
    p.add_argument("repr_dir")
    p.add_argument("-o", "--out", default="metrics_report.json")
    p.add_argument("--per-system-csv", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("score", help="score one test/reference file pair")
    p.add_argument("checkpoint")
    p.add_argument("test_lrp")
    p.add_argument("ref_lrp")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("inspect-weights", help="print the learned layer weights")
    p.add_argument("checkpoint")
    p.set_defaults(func=cmd_inspect_weights)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except VoicesimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
