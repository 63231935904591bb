#!/usr/bin/env python3
"""Accuracy table over datasets x classifiers, mean +/- std over seeds.

Example:
    python scripts/reproduce_accuracy.py --data-root data \\
        --datasets ctg mnist --models ldc hdc-basic hdc-retrain --seeds 5
"""

import argparse
import os
import sys
import time

import numpy as np

from ldc import harness, hdc
from ldc.data import DATASETS, dataset_available, load_dataset
from ldc.network import LdcConfig, LdcNetwork, extract
from ldc.train import TrainConfig, fit


def ldc_accuracy(train, test, info, seed, epochs):
    cfg = LdcConfig(
        n_features=train.n_features, n_classes=info.n_classes,
        dim_value=info.ldc.dim_value, dim_feature=info.ldc.dim_feature, seed=seed,
    )
    net = LdcNetwork.init(cfg)
    fit(net, train, TrainConfig(lr=info.ldc.lr, weight_decay=info.ldc.weight_decay,
                                schedule=info.ldc.schedule, epochs=epochs, seed=seed))
    return harness.evaluate(extract(net), test).accuracy


def hdc_accuracies(train, test, seed, dim):
    """(basic, retrained) accuracy from one shared encoding pass."""
    cfg = hdc.HdcConfig(n_features=train.n_features, n_classes=train.n_classes,
                        dim=dim, seed=seed)
    im = hdc.ItemMemory.generate(cfg)
    enc_train = hdc.encode_dataset(im, train.levels)
    enc_test = hdc.encode_dataset(im, test.levels)
    labels = np.asarray(test.labels)
    am = hdc.train_basic(im, train, encoded=enc_train)
    basic = float((hdc.predict_packed(am, enc_test) == labels).mean())
    am_r = hdc.retrain(am, im, train, cfg, encoded=enc_train)
    retrained = float((hdc.predict_packed(am_r, enc_test) == labels).mean())
    return basic, retrained


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data-root", default=os.environ.get("LDC_DATA_ROOT", "data"))
    parser.add_argument("--datasets", nargs="+",
                        default=["ctg"], choices=sorted(DATASETS))
    parser.add_argument("--models", nargs="+", default=["ldc"],
                        choices=["ldc", "hdc-basic", "hdc-retrain"])
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--epochs", type=int, default=50)
    parser.add_argument("--hdc-dim", type=int, default=8000)
    args = parser.parse_args()

    print(f"{'dataset':<10} {'model':<12} {'accuracy':<18} seconds")
    for name in args.datasets:
        if not dataset_available(name, args.data_root):
            print(f"{name:<10} -- files not found under {args.data_root}, skipped")
            continue
        train, test = load_dataset(name, args.data_root)
        info = DATASETS[name]
        want_hdc = {"hdc-basic", "hdc-retrain"} & set(args.models)
        if "ldc" in args.models:
            t0 = time.time()
            accs = [ldc_accuracy(train, test, info, s, args.epochs)
                    for s in range(args.seeds)]
            print(f"{name:<10} {'ldc':<12} "
                  f"{np.mean(accs) * 100:6.2f} +/- {np.std(accs, ddof=1) * 100:.2f}  "
                  f"{time.time() - t0:7.1f}")
        if want_hdc:
            t0 = time.time()
            pairs = [hdc_accuracies(train, test, s, args.hdc_dim)
                     for s in range(args.seeds)]
            for label, col in (("hdc-basic", 0), ("hdc-retrain", 1)):
                if label in args.models:
                    vals = [p[col] for p in pairs]
                    print(f"{name:<10} {label:<12} "
                          f"{np.mean(vals) * 100:6.2f} +/- {np.std(vals, ddof=1) * 100:.2f}  "
                          f"{time.time() - t0:7.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
