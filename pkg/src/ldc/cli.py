"""Command-line entry point.

Subcommands: train, eval, robust, info. Dataset files are resolved under
--data-root (or $LDC_DATA_ROOT); nothing is downloaded. Exit codes:
0 success, 1 user/configuration error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from pathlib import Path

import numpy as np

from . import data as data_mod
from . import harness, hdc, network, store, train as train_mod

HDC_DEFAULT_DIM = 8000


class CliError(Exception):
    """User-facing error: bad flags, missing files, malformed inputs."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ldc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--data-root", default=os.environ.get("LDC_DATA_ROOT"),
                       help="dataset root directory (default: $LDC_DATA_ROOT)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help="output directory")

    p_train = sub.add_parser("train", help="train a model and save it")
    add_common(p_train)
    p_train.add_argument("--dataset", required=True, choices=sorted(data_mod.DATASETS))
    p_train.add_argument("--model", default="ldc", choices=["ldc", "hdc-basic", "hdc-retrain"])
    p_train.add_argument("--dim", type=int, default=None, help="HDC hypervector dimension")
    p_train.add_argument("--dv", type=int, default=None, help="value vector dimension")
    p_train.add_argument("--df", type=int, default=None, help="feature vector dimension")
    p_train.add_argument("--lr", type=float, default=None)
    p_train.add_argument("--wd", type=float, default=None, help="weight decay")
    p_train.add_argument("--epochs", type=int, default=50)
    p_train.add_argument("--batch-size", type=int, default=64)
    p_train.add_argument("--schedule", default=None, choices=train_mod.SCHEDULES,
                         help="LR schedule (default: the dataset preset)")
    p_train.add_argument("--retrain-epochs", type=int, default=20)
    p_train.add_argument("--retrain-rate", type=float, default=1.0)
    p_train.add_argument("--quiet", action="store_true", help="suppress per-epoch metrics")

    p_eval = sub.add_parser("eval", help="evaluate a saved model")
    add_common(p_eval)
    p_eval.add_argument("model_file")
    p_eval.add_argument("--dataset", required=True, choices=sorted(data_mod.DATASETS))

    p_rob = sub.add_parser("robust", help="bit-error robustness sweep")
    add_common(p_rob)
    p_rob.add_argument("model_file")
    p_rob.add_argument("--dataset", required=True, choices=sorted(data_mod.DATASETS))
    p_rob.add_argument("--rates", default="0,1e-4,1e-3,1e-2",
                       help="comma-separated bit error rates, ascending")
    p_rob.add_argument("--runs", type=int, default=5)

    p_info = sub.add_parser("info", help="print a model file's header and size audit")
    p_info.add_argument("model_file")
    return parser


def _out_dir(args, default_name: str) -> Path:
    out = Path(args.out) if args.out else Path("runs") / default_name
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_splits(args):
    name = args.dataset
    if name != "synthetic" and not data_mod.dataset_available(name, args.data_root):
        raise CliError(
            f"dataset {name!r} not found under data root {args.data_root!r}; "
            "see scripts/fetch_datasets.py"
        )
    return data_mod.load_dataset(name, args.data_root, seed=args.seed)


def _config_echo(args, keys) -> dict:
    return {k: getattr(args, k) for k in keys if hasattr(args, k)}


def cmd_train(args) -> int:
    info = data_mod.DATASETS[args.dataset]
    train_split, test_split = _load_splits(args)
    out = _out_dir(args, f"{args.dataset}-{args.model}-seed{args.seed}")

    if args.model == "ldc":
        defaults = info.ldc
        cfg = network.LdcConfig(
            n_features=train_split.n_features, n_classes=train_split.n_classes,
            dim_value=args.dv or defaults.dim_value,
            dim_feature=args.df or defaults.dim_feature,
            n_levels=train_split.n_levels, seed=args.seed,
        )
        tcfg = train_mod.TrainConfig(
            lr=defaults.lr if args.lr is None else args.lr,
            weight_decay=defaults.weight_decay if args.wd is None else args.wd,
            batch_size=args.batch_size, epochs=args.epochs,
            schedule=args.schedule or defaults.schedule, seed=args.seed,
        )
        net = network.LdcNetwork.init(cfg)
        fit_result = train_mod.fit(
            net, train_split, tcfg, log_path=out / "metrics.jsonl", echo=not args.quiet
        )
        model = network.extract(net)
        extra = {
            "train": {"best_epoch": fit_result.best_epoch,
                      "best_val_accuracy": fit_result.best_val_accuracy},
            "ldc_config": {"dim_value": cfg.dim_value, "dim_feature": cfg.dim_feature},
            "train_config": {"lr": tcfg.lr, "weight_decay": tcfg.weight_decay,
                             "batch_size": tcfg.batch_size, "epochs": tcfg.epochs,
                             "schedule": tcfg.schedule},
        }
    else:
        cfg = hdc.HdcConfig(
            n_features=train_split.n_features, n_classes=train_split.n_classes,
            dim=args.dim or HDC_DEFAULT_DIM, n_levels=train_split.n_levels,
            seed=args.seed, retrain_epochs=args.retrain_epochs,
            retrain_rate=args.retrain_rate,
        )
        model = hdc.train_hdc(cfg, train_split, retrained=args.model == "hdc-retrain")
        extra = {"hdc_config": {"dim": cfg.dim, "retrain_epochs": cfg.retrain_epochs,
                                "retrain_rate": cfg.retrain_rate}}
        if model.retrained:
            extra["retrain_misses"] = model.assoc_memory.miss_history

    result = harness.evaluate(model, test_split)
    desc = store.describe(model)
    cycles = harness.cycle_estimate(desc)
    model_path = out / "model.ldc"
    store.save(model, model_path)

    print(f"dataset         : {args.dataset}")
    print(f"model           : {args.model}")
    print(f"test accuracy   : {result.accuracy:.4f}")
    print(f"model size      : {store.model_size_bits(desc)} bits"
          f" = {store.model_size_kb(desc):.2f} KB")
    print(f"cycle estimate  : {cycles.total_cycles} cycles"
          f" ({cycles.latency_us:.2f} us at {cycles.clock_hz / 1e6:.0f} MHz)")
    print(f"model file      : {model_path}")

    harness.write_run_summary(out / "run_summary.json", {
        "command": "train",
        "config": _config_echo(args, [
            "dataset", "model", "dim", "dv", "df", "lr", "wd", "epochs",
            "batch_size", "schedule", "retrain_epochs", "retrain_rate", "seed",
        ]),
        "results": {
            "test_accuracy": result.accuracy,
            "model_size_bits": store.model_size_bits(desc),
            "model_size_kb": store.model_size_kb(desc),
            "cycle_estimate": cycles.to_dict(),
            "model_file": str(model_path),
        },
        **extra,
    })
    return 0


def cmd_eval(args) -> int:
    model = store.load(args.model_file)
    _, test_split = _load_splits(args)
    result = harness.evaluate(model, test_split)
    print(f"test accuracy   : {result.accuracy:.4f}")
    print("confusion matrix:")
    print(result.confusion)
    out = _out_dir(args, f"eval-{args.dataset}")
    harness.write_run_summary(out / "run_summary.json", {
        "command": "eval",
        "config": {"model_file": args.model_file, "dataset": args.dataset,
                   "seed": args.seed},
        "results": {"test_accuracy": result.accuracy,
                    "confusion": result.confusion.tolist()},
    })
    return 0


def cmd_robust(args) -> int:
    model = store.load(args.model_file)
    _, test_split = _load_splits(args)
    try:
        rates = [float(r) for r in args.rates.split(",") if r.strip()]
    except ValueError:
        raise CliError(f"bad --rates value {args.rates!r}") from None
    report = harness.robustness_sweep(model, test_split, rates, runs=args.runs, seed=args.seed)
    print(report.as_table())
    out = _out_dir(args, f"robust-{args.dataset}")
    harness.write_run_summary(out / "run_summary.json", {
        "command": "robust",
        "config": {"model_file": args.model_file, "dataset": args.dataset,
                   "rates": rates, "runs": args.runs, "seed": args.seed},
        "results": report.to_dict(),
    })
    return 0


def cmd_info(args) -> int:
    header = store.read_header(args.model_file)
    desc = store.ModelDescriptor(
        kind=header["kind"], n_features=header["n_features"],
        n_levels=header["n_levels"], n_classes=header["n_classes"],
        dim_value=header["dim_value"], dim_feature=header["dim_feature"],
    )
    store.load(args.model_file)  # full checksum + structure validation
    actual = Path(args.model_file).stat().st_size
    expected = store.expected_file_size(desc)
    print(json.dumps(header, indent=2, sort_keys=True, default=int))
    print(f"model size      : {store.model_size_bits(desc)} bits"
          f" = {store.model_size_kb(desc):.2f} KB")
    print(f"file size       : {actual} bytes (expected {expected})")
    print(f"section bits    : {sum(header['section_bits'])}"
          f" == model_size_bits: {sum(header['section_bits']) == store.model_size_bits(desc)}")
    return 0


_COMMANDS = {"train": cmd_train, "eval": cmd_eval, "robust": cmd_robust, "info": cmd_info}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, data_mod.DatasetError, store.StoreError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except train_mod.TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
