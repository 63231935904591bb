#!/usr/bin/env python3
"""Download and lay out the evaluation datasets.

Usage: python scripts/fetch_datasets.py [--root DATA_ROOT] [--only NAME ...]

Creates DATA_ROOT/<name>/ with the file names the loaders expect:

  mnist/    train-images-idx3-ubyte.gz  train-labels-idx1-ubyte.gz
            t10k-images-idx3-ubyte.gz   t10k-labels-idx1-ubyte.gz
  fashion/  (same four names)
  ucihar/   X_train.txt y_train.txt X_test.txt y_test.txt
  isolet/   isolet1+2+3+4.data isolet5.data
  ctg/      ctg.csv  (converted from the distributed CTG.xls)

This script is the only place anything is downloaded; the library and CLI
never fetch data on their own. ISOLET ships .Z-compressed (LZW); the
script shells out to `gzip -d`, which handles that format.
"""

import argparse
import io
import subprocess
import sys
import urllib.request
import zipfile
from pathlib import Path

MNIST_BASE = "https://ossci-datasets.s3.amazonaws.com/mnist/"
FASHION_BASE = "https://github.com/zalandoresearch/fashion-mnist/raw/master/data/fashion/"
IDX_FILES = [
    "train-images-idx3-ubyte.gz", "train-labels-idx1-ubyte.gz",
    "t10k-images-idx3-ubyte.gz", "t10k-labels-idx1-ubyte.gz",
]
UCIHAR_URL = (
    "https://archive.ics.uci.edu/static/public/240/"
    "human+activity+recognition+using+smartphones.zip"
)
ISOLET_URL = "https://archive.ics.uci.edu/static/public/54/isolet.zip"
CTG_URL = "https://archive.ics.uci.edu/static/public/193/cardiotocography.zip"


def download(url: str, dest: Path) -> None:
    if dest.exists():
        print(f"  have {dest}")
        return
    print(f"  {url}")
    dest.parent.mkdir(parents=True, exist_ok=True)
    with urllib.request.urlopen(url) as resp:
        dest.write_bytes(resp.read())


def fetch_idx(root: Path, name: str, base: str) -> None:
    for fname in IDX_FILES:
        download(base + fname, root / name / fname)


def fetch_ucihar(root: Path) -> None:
    outer = root / "ucihar" / "har.zip"
    download(UCIHAR_URL, outer)
    with zipfile.ZipFile(outer) as zf:
        inner_name = next(n for n in zf.namelist() if n.endswith("UCI HAR Dataset.zip"))
        inner = zipfile.ZipFile(io.BytesIO(zf.read(inner_name)))
    wanted = {
        "UCI HAR Dataset/train/X_train.txt": "X_train.txt",
        "UCI HAR Dataset/train/y_train.txt": "y_train.txt",
        "UCI HAR Dataset/test/X_test.txt": "X_test.txt",
        "UCI HAR Dataset/test/y_test.txt": "y_test.txt",
    }
    for member, out_name in wanted.items():
        (root / "ucihar" / out_name).write_bytes(inner.read(member))
        print(f"  extracted {out_name}")


def fetch_isolet(root: Path) -> None:
    archive = root / "isolet" / "isolet.zip"
    download(ISOLET_URL, archive)
    with zipfile.ZipFile(archive) as zf:
        for member in ("isolet1+2+3+4.data.Z", "isolet5.data.Z"):
            target_z = root / "isolet" / member
            target = target_z.with_suffix("")
            if target.exists():
                continue
            target_z.write_bytes(zf.read(member))
            # gzip understands LZW-compressed .Z archives
            subprocess.run(["gzip", "-d", "-f", str(target_z)], check=True)
            print(f"  decompressed {target.name}")


def fetch_ctg(root: Path) -> None:
    archive = root / "ctg" / "ctg.zip"
    download(CTG_URL, archive)
    xls = root / "ctg" / "CTG.xls"
    if not xls.exists():
        with zipfile.ZipFile(archive) as zf:
            member = next(n for n in zf.namelist() if n.lower().endswith(".xls"))
            xls.write_bytes(zf.read(member))
    csv_path = root / "ctg" / "ctg.csv"
    if csv_path.exists():
        return
    try:
        convert_ctg_xls(xls, csv_path)
        print(f"  wrote {csv_path}")
    except Exception as exc:  # pandas/xlrd missing or sheet surprises
        print(
            f"  could not convert {xls} automatically ({exc}).\n"
            "  Export the 'Data' sheet to CSV manually, keeping the 21 feature\n"
            "  columns (LB..Tendency) and the NSP column, as ctg/ctg.csv.",
            file=sys.stderr,
        )


def convert_ctg_xls(xls: Path, csv_path: Path) -> None:
    import pandas as pd

    from ldc.data import CTG_FEATURE_COLUMNS, CTG_LABEL_COLUMN

    sheet = pd.read_excel(xls, sheet_name="Data", header=None)
    header_row = None
    for i in range(min(5, len(sheet))):
        cells = sheet.iloc[i].astype(str).str.strip().tolist()
        if "LB" in cells and CTG_LABEL_COLUMN in cells:
            header_row = i
            break
    if header_row is None:
        raise ValueError("no header row containing LB and NSP")
    frame = pd.read_excel(xls, sheet_name="Data", header=header_row)
    frame.columns = [str(c).strip() for c in frame.columns]
    cols = CTG_FEATURE_COLUMNS + [CTG_LABEL_COLUMN]
    frame = frame[cols].dropna()
    frame.to_csv(csv_path, index=False)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--root", default="data")
    parser.add_argument("--only", nargs="*", default=None,
                        choices=["mnist", "fashion", "ucihar", "isolet", "ctg"])
    args = parser.parse_args()
    root = Path(args.root)
    jobs = {
        "mnist": lambda: fetch_idx(root, "mnist", MNIST_BASE),
        "fashion": lambda: fetch_idx(root, "fashion", FASHION_BASE),
        "ucihar": lambda: fetch_ucihar(root),
        "isolet": lambda: fetch_isolet(root),
        "ctg": lambda: fetch_ctg(root),
    }
    failures = 0
    for name, job in jobs.items():
        if args.only and name not in args.only:
            continue
        print(f"[{name}]")
        try:
            job()
        except Exception as exc:
            failures += 1
            print(f"  failed: {exc}", file=sys.stderr)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
