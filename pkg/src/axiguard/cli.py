"""Command-line entry point for the full pipeline.

Subcommands: gen, preprocess, train, quantize, eval, monitor, bench.
Every default reproduces the reference desk-scale experiment (16,383
normal + 3,242 malicious samples, seed 42); all randomness flows from
--seed.  Values resolve CLI > config file > defaults.  Exit codes:
0 success, 1 runtime error, 2 input/config error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys

import numpy as np

from . import attacks as attacks_mod
from .attacks import AttackKind, DEFAULT_ATTACK_MIX, build_attack_corpus
from .capture import Dataset, capture, export_csv, export_raw, export_vcd, \
    import_csv
from .errors import (AxiGuardError, ConfigError, CsvFormatError, FormatError,
                     InsufficientData, SchemaError)
from .features import (FeatureSet, FeatureTransform, correlation_prune,
                       decode, load_feature_csv, pca_fit, save_feature_csv,
                       transform)
from .fixedpoint import FixedFormat
from .metrics import evaluate
from .mlp import MlpModel, train
from .monitor import bench, monitor, write_verdicts_jsonl
from .quantized import QuantizedMlpModel, train_quantized
from .sampling import smote, split_indices, take
from .sim import Arbitration, SimConfig, generate_normal_corpus

_INPUT_ERRORS = (ConfigError, SchemaError, CsvFormatError, FormatError,
                 InsufficientData)


def _sim_config(args, cycles: int = 50_000) -> SimConfig:
    return SimConfig(num_masters=args.masters, num_targets=args.targets,
                     cycles=cycles, seed=args.seed,
                     load_percent=args.load,
                     arbitration=Arbitration(args.arbitration))


def _load_mix(spec: str) -> dict:
    if spec == "default":
        return dict(DEFAULT_ATTACK_MIX)
    if spec == "none":
        return {}
    with open(spec) as f:
        raw = json.load(f)
    by_value = {k.value: k for k in AttackKind}
    mix = {}
    for name, count in raw.items():
        if name not in by_value:
            raise ConfigError(f"unknown attack kind {name!r} in mix file")
        mix[by_value[name]] = int(count)
    return mix


def _load_model(path: str):
    with open(path) as f:
        doc = json.load(f)
    kind = doc.get("kind")
    if kind == "float":
        return MlpModel.from_json(json.dumps(doc))
    if kind == "quantized":
        return QuantizedMlpModel.from_json(json.dumps(doc))
    raise SchemaError(f"unrecognized model kind {kind!r} in {path}")


# ---------------------------------------------------------------------------
# subcommands

def _cmd_gen(args) -> int:
    os.makedirs(args.output, exist_ok=True)
    mix = _load_mix(args.attack_mix)
    cfg = _sim_config(args)
    if mix:
        trace = build_attack_corpus(cfg, mix, normal_count=args.normal)
    else:
        trace = generate_normal_corpus(cfg, count=args.normal)
    ds = capture(trace)
    csv_path = export_csv(ds, os.path.join(args.output, "dataset.csv"))
    vcd_path = export_vcd(trace, os.path.join(args.output, "trace.vcd"))
    raw_path = export_raw(ds, os.path.join(args.output, "trace.raw"))
    counts = ds.class_counts
    print(f"generated {len(ds)} samples "
          f"({counts[0]} normal, {counts[1]} malicious), "
          f"bus utilization {trace.utilization:.2f}")
    for p in (csv_path, vcd_path, raw_path):
        print(p)
    return 0


def _cmd_preprocess(args) -> int:
    os.makedirs(args.output, exist_ok=True)
    ds = import_csv(args.input)
    if len(ds) < 2:
        raise InsufficientData("dataset too small to preprocess")
    both_classes = 0 < int(ds.labels.sum()) < len(ds)
    if both_classes:
        train_idx, test_idx = split_indices(ds.labels, args.train_frac,
                                            args.seed)
    else:
        train_idx = np.arange(len(ds))
        test_idx = np.array([], dtype=np.int64)
    train_ds = Dataset(ds.values[train_idx], ds.labels[train_idx],
                       [ds.attack_kinds[i] for i in train_idx],
                       schema=ds.schema)
    decoded = decode(train_ds)
    pruned, kept = correlation_prune(decoded, args.corr_threshold)
    ft = pca_fit(pruned, args.variance,
                 corr_threshold=args.corr_threshold)
    print(f"stage 1 decode: {len(ds.schema)} -> {len(decoded.schema)} "
          "features (debug signals removed)")
    print(f"stage 2 correlation (|r| >= {args.corr_threshold}): "
          f"{len(decoded.schema)} -> {len(kept)} features")
    print(f"stage 3 pca: {len(kept)} -> {ft.n_components} components "
          f"({ft.cumulative_variance * 100:.1f}% variance, "
          f"target {args.variance * 100:.0f}%)")
    fs = transform(ft, ds)
    split = np.zeros(len(ds), dtype=np.int64)
    split[test_idx] = 1
    tr_path = ft.save(os.path.join(args.output, "transform.json"))
    fe_path = save_feature_csv(os.path.join(args.output, "features.csv"),
                               fs, split)
    print(tr_path)
    print(fe_path)
    return 0


def _train_features(args):
    fs, split = load_feature_csv(args.input)
    train_fs = take(fs, np.flatnonzero(split == 0))
    if args.smote and 0 < int(train_fs.y.sum()) < len(train_fs):
        train_fs = smote(train_fs, k=args.smote_k, seed=args.seed)
    return train_fs


def _cmd_train(args) -> int:
    train_fs = _train_features(args)
    model = train(train_fs.X, train_fs.y, l2=args.l2, epochs=args.epochs,
                  lr=args.lr, batch_size=args.batch, seed=args.seed)
    model.save(args.output)
    curve = model.training_meta["loss_curve"]
    acc = float(((model.predict_scores(train_fs.X) >= 0.5)
                 == train_fs.y.astype(bool)).mean())
    print(f"trained float model on {len(train_fs)} rows "
          f"({int(train_fs.synthetic.sum())} synthetic): "
          f"loss {curve[0]:.4f} -> {curve[-1]:.4f}, train acc {acc:.4f}")
    print(args.output)
    return 0


def _cmd_quantize(args) -> int:
    train_fs = _train_features(args)
    fmt = FixedFormat.parse(args.fmt)
    act = (None if args.act_fmt == "auto"
           else FixedFormat.parse(args.act_fmt))
    model = train_quantized(train_fs.X, train_fs.y, fmt,
                            sparsity_target=args.sparsity, l2=args.l2,
                            epochs=args.epochs, lr=args.lr,
                            batch_size=args.batch, seed=args.seed,
                            activation_format=act)
    model.save(args.output)
    print(f"trained quantized {fmt} model on {len(train_fs)} rows: "
          f"sparsity {model.sparsity:.3f}")
    print(args.output)
    return 0


def _cmd_eval(args) -> int:
    fs, split = load_feature_csv(args.input)
    test_fs = take(fs, np.flatnonzero(split == 1))
    if len(test_fs) == 0:
        raise InsufficientData("features file has no test rows")
    model = _load_model(args.model)
    report = evaluate(model, test_fs, threshold=args.threshold)
    print(report.to_text())
    return 0


def _cmd_monitor(args) -> int:
    ft = FeatureTransform.load(args.transform)
    model = _load_model(args.model)
    cfg = _sim_config(args, cycles=args.cycles)
    mix = _load_mix(args.attack_mix)
    injections = ()
    if mix:
        plans = attacks_mod.build_plans(cfg, mix)
        injections = attacks_mod.compile_plans(plans, cfg)
    result = monitor(cfg, ft, model, threshold=args.threshold,
                     injections=injections)
    write_verdicts_jsonl(result.verdicts, args.output)
    print(f"monitored {len(result.verdicts)} transactions, "
          f"{result.flagged} flagged malicious")
    print(args.output)
    return 0


def _cmd_bench(args) -> int:
    ft = FeatureTransform.load(args.transform)
    model = _load_model(args.model)
    loads = [int(x) for x in args.loads.split(",") if x]
    if any(not 1 <= l <= 100 for l in loads):
        raise ConfigError("loads must be within [1, 100]")
    cfg = _sim_config(args)
    report = bench(loads, cfg, ft, model, duration_s=args.duration)
    print(report.to_text())
    if args.output:
        with open(args.output, "w") as f:
            f.write(report.to_csv_text())
        print(args.output)
    return 0


# ---------------------------------------------------------------------------
# argument plumbing

def _add_sim_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=42,
                   help="all randomness flows from this (default 42)")
    p.add_argument("--load", type=int, default=60,
                   help="target bus utilization percent (default 60)")
    p.add_argument("--masters", type=int, default=4)
    p.add_argument("--targets", type=int, default=2)
    p.add_argument("--arbitration", default="qos_priority",
                   choices=[a.value for a in Arbitration])


def _add_train_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("-i", "--input", required=True,
                   help="features.csv from preprocess")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--smote", action=argparse.BooleanOptionalAction,
                   default=True, help="balance classes on the train split")
    p.add_argument("--smote-k", type=int, default=5)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="axiguard",
        description="AXI4 traffic simulation, DoS attack synthesis, and "
                    "ML-based bus monitoring")
    parser.add_argument("--config", help="INI config file; CLI flags "
                                         "override its values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate the dual-mode sample corpus")
    _add_sim_args(p)
    p.add_argument("--normal", type=int, default=16_383,
                   help="clean transaction count (default 16383)")
    p.add_argument("--attack-mix", default="default",
                   help="'default', 'none', or a JSON file of kind->count")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("preprocess",
                       help="fit decode/correlation/PCA on the train split")
    p.add_argument("-i", "--input", required=True, help="dataset.csv")
    p.add_argument("--variance", type=float, default=0.95,
                   choices=[0.90, 0.95, 0.97],
                   help="cumulative explained-variance target")
    p.add_argument("--corr-threshold", type=float, default=0.95)
    p.add_argument("--train-frac", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("train", help="train the float detector")
    _add_train_args(p)
    p.add_argument("-o", "--output", default="model.json")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("quantize",
                       help="quantization-aware training with pruning")
    _add_train_args(p)
    p.add_argument("--fmt", default="8,5",
                   help="weight fixed-point format W,I (default 8,5)")
    p.add_argument("--act-fmt", default="auto",
                   help="activation format, or 'auto' to follow the weight "
                        "level (8,5 -> 16,8)")
    p.add_argument("--sparsity", type=float, default=0.80)
    p.add_argument("-o", "--output", default="qmodel.json")
    p.set_defaults(func=_cmd_quantize)

    p = sub.add_parser("eval", help="evaluate a model on the test split")
    p.add_argument("-i", "--input", required=True, help="features.csv")
    p.add_argument("-m", "--model", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("monitor",
                       help="stream live traffic through the detector")
    _add_sim_args(p)
    p.add_argument("--transform", required=True, help="transform.json")
    p.add_argument("--model", required=True)
    p.add_argument("--cycles", type=int, default=20_000)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--attack-mix", default="none",
                   help="'none', 'default', or a JSON mix file")
    p.add_argument("-o", "--output", default="verdicts.jsonl")
    p.set_defaults(func=_cmd_monitor)

    p = sub.add_parser("bench",
                       help="latency/throughput across bus loads")
    _add_sim_args(p)
    p.add_argument("--transform", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--loads", default="10,25,50,75,100")
    p.add_argument("--duration", type=float, default=0.5,
                   help="seconds of sustained-throughput measurement "
                        "per load")
    p.add_argument("-o", "--output", default="")
    p.set_defaults(func=_cmd_bench)
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list) -> list:
    """Set INI values as parser defaults so CLI flags still win."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return argv
    ini = configparser.ConfigParser()
    read = ini.read(known.config)
    if not read:
        raise ConfigError(f"config file {known.config!r} not found")
    command = next((a for a in argv if not a.startswith("-")), None)
    overrides = {}
    for section in ("sim", command or ""):
        if section and ini.has_section(section):
            for key, value in ini.items(section):
                overrides[key.replace("-", "_")] = _coerce(value)
    if overrides:
        for action in parser._subparsers._group_actions:
            if command in getattr(action, "choices", {}):
                action.choices[command].set_defaults(
                    **{k: v for k, v in overrides.items()})
    return argv


def _coerce(value: str):
    for caster in (int, float):
        try:
            return caster(value)
        except ValueError:
            continue
    if value.lower() in ("true", "false"):
        return value.lower() == "true"
    return value


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (AxiGuardError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
