#!/usr/bin/env python3
"""Bit-error robustness curve for a saved model: TSV to stdout, optional
JSON next to it.

Example:
    python scripts/robustness_curve.py runs/ctg/model.ldc --dataset ctg \\
        --rates 0 1e-4 1e-3 1e-2 1e-1 --runs 5 --data-root data
"""

import argparse
import json
import os
import sys
from pathlib import Path

from ldc import harness, store
from ldc.data import DATASETS, load_dataset


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("model_file")
    parser.add_argument("--dataset", required=True, choices=sorted(DATASETS))
    parser.add_argument("--data-root", default=os.environ.get("LDC_DATA_ROOT", "data"))
    parser.add_argument("--rates", nargs="+", type=float,
                        default=[0.0, 1e-4, 1e-3, 1e-2, 1e-1])
    parser.add_argument("--runs", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--json-out", default=None)
    args = parser.parse_args()

    model = store.load(args.model_file)
    _, test = load_dataset(args.dataset, args.data_root)
    report = harness.robustness_sweep(
        model, test, sorted(args.rates), runs=args.runs, seed=args.seed
    )
    print(report.as_table())
    if args.json_out:
        Path(args.json_out).write_text(json.dumps(report.to_dict(), indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
