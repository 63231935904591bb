"""Dataset ingestion: IDX images, delimited text, 8-bit quantization.

Feature values are normalized per feature to [0, 255] using min/max from
the training split and rounded to integer levels; the test split reuses
the training parameters and clamps. Nothing is ever downloaded here;
files are resolved under an explicit data root.
"""

from __future__ import annotations

import csv
import gzip
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


class DatasetError(ValueError):
    pass


class IdxBadMagicError(DatasetError):
    pass


class IdxTruncatedError(DatasetError):
    pass


class IdxCountMismatchError(DatasetError):
    pass


@dataclass
class RawDataset:
    """Real-valued features with integer labels, before quantization."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise DatasetError("features must be 2-d (samples x features)")
        if self.labels.shape != (self.features.shape[0],):
            raise DatasetError("labels must align with feature rows")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]


@dataclass
class NormParams:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.float64)
        self.hi = np.asarray(self.hi, dtype=np.float64)
        if not (np.isfinite(self.lo).all() and np.isfinite(self.hi).all()):
            raise DatasetError("normalization parameters must be finite")


@dataclass
class QuantizedDataset:
    """Samples of integer feature levels in {0..n_levels-1} plus labels."""

    levels: np.ndarray
    labels: np.ndarray
    n_levels: int
    n_classes: int
    split: str = ""
    norm_params: NormParams | None = None

    def __post_init__(self):
        self.levels = np.asarray(self.levels)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.levels.ndim != 2:
            raise DatasetError("levels must be 2-d (samples x features)")
        if self.labels.shape != (self.levels.shape[0],):
            raise DatasetError("labels must align with level rows")
        if self.levels.size:
            if int(self.levels.min()) < 0 or int(self.levels.max()) >= self.n_levels:
                raise DatasetError(f"levels outside [0, {self.n_levels - 1}]")
            if int(self.labels.min()) < 0 or int(self.labels.max()) >= self.n_classes:
                raise DatasetError(f"labels outside [0, {self.n_classes - 1}]")

    @property
    def n_samples(self) -> int:
        return self.levels.shape[0]

    @property
    def n_features(self) -> int:
        return self.levels.shape[1]

    def subset(self, idx) -> "QuantizedDataset":
        return QuantizedDataset(
            self.levels[idx],
            self.labels[idx],
            self.n_levels,
            self.n_classes,
            split=self.split,
            norm_params=self.norm_params,
        )


def _open_maybe_gzip(path):
    with open(path, "rb") as f:
        head = f.read(2)
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_idx(path, expected_magic: int):
    with _open_maybe_gzip(path) as f:
        header = f.read(4)
        if len(header) < 4:
            raise IdxTruncatedError(f"{path}: file shorter than the magic number")
        (magic,) = struct.unpack(">i", header)
        if magic != expected_magic:
            raise IdxBadMagicError(
                f"{path}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}"
            )
        ndims = magic & 0xFF
        dim_bytes = f.read(4 * ndims)
        if len(dim_bytes) < 4 * ndims:
            raise IdxTruncatedError(f"{path}: header ends inside the dimension list")
        dims = struct.unpack(f">{ndims}i", dim_bytes)
        payload = f.read()
    expected = int(np.prod(dims))
    if len(payload) != expected:
        raise IdxTruncatedError(
            f"{path}: payload holds {len(payload)} bytes, expected {expected}"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def load_idx(images_path, labels_path) -> RawDataset:
    """Load an IDX image/label file pair (plain or gzipped)."""
    images = _read_idx(images_path, IDX_IMAGE_MAGIC)
    labels = _read_idx(labels_path, IDX_LABEL_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise IdxCountMismatchError(
            f"{images.shape[0]} images vs {labels.shape[0]} labels"
        )
    flat = images.reshape(images.shape[0], -1).astype(np.float64)
    return RawDataset(flat, labels.astype(np.int64))


@dataclass
class DelimitedSchema:
    """How to read one delimited text file.

    delimiter None means any whitespace. label_column indexes the parsed
    row (negative from the end); None means labels come from a separate
    file. label_offset is subtracted to reach 0-based classes.
    """

    delimiter: str | None = None
    label_column: int | None = -1
    label_offset: int = 0
    drop_incomplete: bool = False


def _parse_delimited(path, schema: DelimitedSchema):
    rows = []
    with open(path, "r") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(schema.delimiter) if schema.delimiter else line.split()
            try:
                rows.append(([float(p) for p in parts], lineno))
            except ValueError:
                if schema.drop_incomplete:
                    continue
                raise DatasetError(f"{path}:{lineno}: non-numeric cell") from None
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    width = len(rows[0][0])
    for values, lineno in rows:
        if len(values) != width:
            raise DatasetError(f"{path}:{lineno}: ragged row ({len(values)} != {width})")
    return np.array([v for v, _ in rows], dtype=np.float64)


def load_delimited(path, schema: DelimitedSchema, labels_path=None) -> RawDataset:
    """Load a delimited text file; labels either in-row or from a second
    single-column file."""
    table = _parse_delimited(path, schema)
    if schema.label_column is not None:
        col = schema.label_column % table.shape[1]
        labels = table[:, col]
        features = np.delete(table, col, axis=1)
    else:
        if labels_path is None:
            raise DatasetError("schema expects a separate labels file")
        labels = _parse_delimited(labels_path, schema).ravel()
        features = table
        if labels.shape[0] != features.shape[0]:
            raise DatasetError(
                f"{labels.shape[0]} labels vs {features.shape[0]} feature rows"
            )
    labels_int = np.rint(labels).astype(np.int64) - schema.label_offset
    if labels_int.min() < 0:
        raise DatasetError("labels fall below 0 after offset")
    return RawDataset(features, labels_int)


def quantize(
    raw: RawDataset,
    norm: NormParams | None = None,
    n_levels: int = 256,
    n_classes: int | None = None,
    split: str = "",
) -> QuantizedDataset:
    """Map features to integer levels: round((L-1) * (x - lo) / (hi - lo)),
    clamped to [0, L-1]; constant features map to level 0.

    When ``norm`` is omitted the min/max are taken from this split (i.e.
    this is the training split).
    """
    if norm is None:
        norm = NormParams(raw.features.min(axis=0), raw.features.max(axis=0))
    span = norm.hi - norm.lo
    safe_span = np.where(span > 0, span, 1.0)
    scaled = (raw.features - norm.lo) / safe_span * (n_levels - 1)
    scaled = np.where(span > 0, scaled, 0.0)
    levels = np.clip(np.rint(scaled), 0, n_levels - 1)
    dtype = np.uint8 if n_levels <= 256 else np.int32
    if n_classes is None:
        n_classes = int(raw.labels.max()) + 1
    return QuantizedDataset(
        levels.astype(dtype),
        raw.labels,
        n_levels=n_levels,
        n_classes=n_classes,
        split=split,
        norm_params=norm,
    )


def stratified_split(labels: np.ndarray, test_fraction: float, seed: int):
    """Per-class split with largest-remainder apportionment so the total
    test count equals round(fraction * n) exactly. Returns (train_idx,
    test_idx), each sorted."""
    labels = np.asarray(labels)
    n = labels.shape[0]
    target_total = int(round(test_fraction * n))
    classes = np.unique(labels)
    ideal = {k: test_fraction * np.sum(labels == k) for k in classes}
    take = {k: int(np.floor(v)) for k, v in ideal.items()}
    leftovers = sorted(
        classes, key=lambda k: (-(ideal[k] - take[k]), k)
    )
    short = target_total - sum(take.values())
    for k in leftovers[:short]:
        take[k] += 1
    rng = np.random.default_rng(seed)
    test_parts = []
    for k in classes:
        idx = np.flatnonzero(labels == k)
        idx = rng.permutation(idx)
        test_parts.append(idx[: take[k]])
    test_idx = np.sort(np.concatenate(test_parts))
    mask = np.ones(n, dtype=bool)
    mask[test_idx] = False
    return np.flatnonzero(mask), test_idx


@dataclass(frozen=True)
class LdcDefaults:
    dim_value: int
    dim_feature: int
    lr: float
    weight_decay: float
    # accuracy-reproduction presets train with linearly decaying rates;
    # stepwise halving starves the later epochs
    schedule: str = "linear-decay"


@dataclass(frozen=True)
class DatasetInfo:
    name: str
    n_features: int
    n_classes: int
    ldc: LdcDefaults
    kind: str  # idx | delimited-pair | delimited | synthetic
    files: dict = field(default_factory=dict)


DATASETS = {
    "mnist": DatasetInfo(
        "mnist", 784, 10, LdcDefaults(4, 64, 1e-4, 0.0), "idx",
        files={
            "train_images": "train-images-idx3-ubyte",
            "train_labels": "train-labels-idx1-ubyte",
            "test_images": "t10k-images-idx3-ubyte",
            "test_labels": "t10k-labels-idx1-ubyte",
        },
    ),
    "fashion": DatasetInfo(
        "fashion", 784, 10, LdcDefaults(4, 64, 2e-4, 1e-5), "idx",
        files={
            "train_images": "train-images-idx3-ubyte",
            "train_labels": "train-labels-idx1-ubyte",
            "test_images": "t10k-images-idx3-ubyte",
            "test_labels": "t10k-labels-idx1-ubyte",
        },
    ),
    "ucihar": DatasetInfo(
        "ucihar", 561, 6, LdcDefaults(4, 128, 1e-3, 1e-4), "delimited-pair",
        files={
            "train_features": "X_train.txt",
            "train_labels": "y_train.txt",
            "test_features": "X_test.txt",
            "test_labels": "y_test.txt",
        },
    ),
    "isolet": DatasetInfo(
        "isolet", 617, 26, LdcDefaults(4, 128, 5e-3, 1e-4), "delimited",
        files={"train": "isolet1+2+3+4.data", "test": "isolet5.data"},
    ),
    "ctg": DatasetInfo(
        "ctg", 21, 3, LdcDefaults(4, 64, 8e-3, 1e-4), "delimited",
        files={"table": "ctg.csv"},
    ),
    "synthetic": DatasetInfo(
        "synthetic", 32, 4, LdcDefaults(4, 64, 1e-3, 1e-4), "synthetic"
    ),
}

CTG_FEATURE_COLUMNS = [
    "LB", "AC", "FM", "UC", "DL", "DS", "DP", "ASTV", "MSTV", "ALTV", "MLTV",
    "Width", "Min", "Max", "Nmax", "Nzeros", "Mode", "Mean", "Median",
    "Variance", "Tendency",
]
CTG_LABEL_COLUMN = "NSP"
CTG_TEST_FRACTION = 0.2


def _resolve(root: Path, name: str, filename: str) -> Path:
    """Find a dataset file under a few conventional layouts (always scoped
    to the dataset's own directory; mnist and fashion share file names)."""
    candidates = [
        root / name / filename,
        root / name / (filename + ".gz"),
        root / name / "train" / filename,
        root / name / "test" / filename,
        root / name / "UCI HAR Dataset" / "train" / filename,
        root / name / "UCI HAR Dataset" / "test" / filename,
    ]
    for cand in candidates:
        if cand.is_file():
            return cand
    raise FileNotFoundError(
        f"dataset file {filename!r} for {name!r} not found under {root}"
    )


def _load_ctg_table(path) -> RawDataset:
    with open(path, "r", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise DatasetError(f"{path}: missing header row")
        header = {h.strip(): h for h in reader.fieldnames}
        missing = [c for c in CTG_FEATURE_COLUMNS + [CTG_LABEL_COLUMN] if c not in header]
        if missing:
            raise DatasetError(f"{path}: missing columns {missing}")
        feats, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            cells = [row[header[c]] for c in CTG_FEATURE_COLUMNS + [CTG_LABEL_COLUMN]]
            if any(c is None or str(c).strip() == "" for c in cells):
                continue  # the upstream spreadsheet export carries blank separator rows
            try:
                values = [float(c) for c in cells]
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: non-numeric cell") from None
            feats.append(values[:-1])
            labels.append(int(round(values[-1])) - 1)
    if not feats:
        raise DatasetError(f"{path}: no usable rows")
    return RawDataset(np.array(feats), np.array(labels))


def make_synthetic(
    n_features: int = 32,
    n_classes: int = 4,
    n_train: int = 2000,
    n_test: int = 1000,
    n_levels: int = 256,
    noise: float = 0.15,
    seed: int = 0,
):
    """Deterministic Gaussian-blob dataset pushed through the real
    quantization path; test labels are balanced."""
    rng = np.random.default_rng([0x5EED, seed])
    prototypes = rng.random((n_classes, n_features))

    def draw(n, balanced):
        if balanced:
            labels = np.arange(n) % n_classes
        else:
            labels = rng.integers(0, n_classes, size=n)
        feats = prototypes[labels] + noise * rng.standard_normal((n, n_features))
        return RawDataset(np.clip(feats, 0.0, 1.0) * 255.0, labels)

    raw_train = draw(n_train, balanced=False)
    raw_test = draw(n_test, balanced=True)
    train = quantize(raw_train, n_levels=n_levels, n_classes=n_classes, split="train")
    test = quantize(
        raw_test, norm=train.norm_params, n_levels=n_levels, n_classes=n_classes,
        split="test",
    )
    return train, test


def _apply_manifest(root: Path, name: str, info: DatasetInfo) -> dict:
    """File name overrides from <root>/manifest.json, if present."""
    manifest_path = root / "manifest.json"
    files = dict(info.files)
    if manifest_path.is_file():
        with open(manifest_path) as f:
            manifest = json.load(f)
        files.update(manifest.get(name, {}))
    return files


def load_dataset(name: str, data_root, seed: int = 0):
    """Load + quantize a named dataset; returns (train, test) splits.

    The test split is normalized with the training split's parameters.
    ``synthetic`` needs no files and ignores ``data_root``.
    """
    if name not in DATASETS:
        raise DatasetError(f"unknown dataset {name!r}; known: {sorted(DATASETS)}")
    info = DATASETS[name]
    if info.kind == "synthetic":
        return make_synthetic(seed=seed)
    root = Path(data_root) if data_root else Path(".")
    files = _apply_manifest(root, name, info)

    if info.kind == "idx":
        raw_train = load_idx(
            _resolve(root, name, files["train_images"]),
            _resolve(root, name, files["train_labels"]),
        )
        raw_test = load_idx(
            _resolve(root, name, files["test_images"]),
            _resolve(root, name, files["test_labels"]),
        )
    elif info.kind == "delimited-pair":
        schema = DelimitedSchema(delimiter=None, label_column=None, label_offset=1)
        raw_train = load_delimited(
            _resolve(root, name, files["train_features"]), schema,
            labels_path=_resolve(root, name, files["train_labels"]),
        )
        raw_test = load_delimited(
            _resolve(root, name, files["test_features"]), schema,
            labels_path=_resolve(root, name, files["test_labels"]),
        )
    elif name == "isolet":
        schema = DelimitedSchema(
            delimiter=",", label_column=-1, label_offset=1, drop_incomplete=True
        )
        raw_train = load_delimited(_resolve(root, name, files["train"]), schema)
        raw_test = load_delimited(_resolve(root, name, files["test"]), schema)
    elif name == "ctg":
        raw_all = _load_ctg_table(_resolve(root, name, files["table"]))
        train_idx, test_idx = stratified_split(raw_all.labels, CTG_TEST_FRACTION, seed)
        raw_train = RawDataset(raw_all.features[train_idx], raw_all.labels[train_idx])
        raw_test = RawDataset(raw_all.features[test_idx], raw_all.labels[test_idx])
    else:  # pragma: no cover
        raise DatasetError(f"unhandled dataset kind {info.kind!r}")

    train = quantize(raw_train, n_classes=info.n_classes, split="train")
    test = quantize(
        raw_test, norm=train.norm_params, n_classes=info.n_classes, split="test"
    )
    return train, test


def dataset_available(name: str, data_root) -> bool:
    """True when every file needed by ``name`` resolves under the root."""
    info = DATASETS.get(name)
    if info is None:
        return False
    if info.kind == "synthetic":
        return True
    if not data_root:
        return False
    root = Path(data_root)
    try:
        files = _apply_manifest(root, name, info)
        for filename in files.values():
            _resolve(root, name, filename)
    except (FileNotFoundError, json.JSONDecodeError):
        return False
    return True
