"""Reference binary HDC classifier.

Random item-memory generation, majority-sum encoding, one-shot class
bundling, and mis-classification-driven online retraining. Inference is
nearest class vector by normalized Hamming distance, which is the same
ranking as the +/-1 dot product.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import bitvec
from ._kernels import encode_counts, retrain_pass
from .bitvec import Accumulator, BipolarVector

_FEATURE_STREAM = 0x1D01
_VALUE_STREAM = 0x1D02


@dataclass(frozen=True)
class HdcConfig:
    n_features: int
    n_classes: int
    dim: int = 8000
    n_levels: int = 256
    seed: int = 0
    retrain_epochs: int = 20
    retrain_rate: float = 1.0

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.n_levels < 2:
            raise ValueError("n_levels must be >= 2")
        if self.n_features < 1 or self.n_classes < 1:
            raise ValueError("need at least one feature and one class")
        if self.retrain_epochs < 0:
            raise ValueError("retrain_epochs must be non-negative")
        if self.retrain_rate <= 0:
            raise ValueError("retrain_rate must be positive")
        if (self.n_levels - 1) * self.flips_per_level > self.dim:
            raise ValueError("value-vector flip schedule exceeds dimension")

    @property
    def flips_per_level(self) -> int:
        """Bits flipped between adjacent value levels."""
        return int(round(self.dim / (2 * (self.n_levels - 1))))


class ItemMemory:
    """Stored value and feature vectors used by the encoder.

    Value and feature vectors may have different lengths (they do in the
    low-dimensional model); the plain HDC encoder requires them equal.
    """

    def __init__(self, value_words, value_dim, feature_words, feature_dim):
        self.value_words = np.ascontiguousarray(np.atleast_2d(value_words), dtype=np.uint64)
        self.feature_words = np.ascontiguousarray(np.atleast_2d(feature_words), dtype=np.uint64)
        self.value_dim = int(value_dim)
        self.feature_dim = int(feature_dim)
        if self.value_words.shape[1] != bitvec.words_for(self.value_dim):
            raise ValueError("value section word count does not match value_dim")
        if self.feature_words.shape[1] != bitvec.words_for(self.feature_dim):
            raise ValueError("feature section word count does not match feature_dim")
        self._value_signs = None
        self._feature_signs = None

    @property
    def n_levels(self) -> int:
        return self.value_words.shape[0]

    @property
    def n_features(self) -> int:
        return self.feature_words.shape[0]

    @classmethod
    def from_vectors(cls, values, features) -> "ItemMemory":
        vdim = values[0].dim
        fdim = features[0].dim
        if any(v.dim != vdim for v in values) or any(f.dim != fdim for f in features):
            raise ValueError("inhomogeneous dims within a vector family")
        return cls(
            np.stack([v.words for v in values]),
            vdim,
            np.stack([f.words for f in features]),
            fdim,
        )

    @classmethod
    def generate(cls, cfg: HdcConfig) -> "ItemMemory":
        return cls.from_vectors(gen_value_hvs(cfg), gen_feature_hvs(cfg))

    def value_vector(self, i: int) -> BipolarVector:
        return BipolarVector(self.value_dim, self.value_words[i])

    def feature_vector(self, i: int) -> BipolarVector:
        return BipolarVector(self.feature_dim, self.feature_words[i])

    @property
    def value_vectors(self) -> list[BipolarVector]:
        return [self.value_vector(i) for i in range(self.n_levels)]

    @property
    def feature_vectors(self) -> list[BipolarVector]:
        return [self.feature_vector(i) for i in range(self.n_features)]

    @property
    def value_signs(self) -> np.ndarray:
        if self._value_signs is None:
            self._value_signs = bitvec.unpack_signs(self.value_words, self.value_dim)
        return self._value_signs

    @property
    def feature_signs(self) -> np.ndarray:
        if self._feature_signs is None:
            self._feature_signs = bitvec.unpack_signs(self.feature_words, self.feature_dim)
        return self._feature_signs


def gen_feature_hvs(cfg: HdcConfig) -> list[BipolarVector]:
    """N i.i.d. uniform +/-1 vectors; random pairs land near Hamming 0.5."""
    rng = np.random.default_rng([_FEATURE_STREAM, cfg.seed])
    bits = rng.integers(0, 2, size=(cfg.n_features, cfg.dim), dtype=np.uint8)
    return [BipolarVector.from_bits(row) for row in bits]


def gen_value_hvs(cfg: HdcConfig) -> list[BipolarVector]:
    """Level vectors on a cumulative flip schedule.

    One random permutation of the bit positions is consumed in order:
    level m differs from the base vector in exactly m * flips_per_level
    positions, so hamm(V_i, V_j) == |i - j| * flips_per_level / dim holds
    exactly (the flip sets are nested).
    """
    rng = np.random.default_rng([_VALUE_STREAM, cfg.seed])
    base = rng.integers(0, 2, size=cfg.dim, dtype=np.uint8)
    perm = rng.permutation(cfg.dim)
    q = cfg.flips_per_level
    if (cfg.n_levels - 1) * q > cfg.dim:
        raise ValueError("flip schedule exceeds dimension")
    rank = np.empty(cfg.dim, dtype=np.int64)
    rank[perm] = np.arange(cfg.dim)
    flip_counts = np.arange(cfg.n_levels, dtype=np.int64)[:, None] * q
    bits = base[None, :] ^ (rank[None, :] < flip_counts).astype(np.uint8)
    return [BipolarVector.from_bits(row) for row in bits]


def _check_levels(im: ItemMemory, levels: np.ndarray) -> np.ndarray:
    levels = np.asarray(levels, dtype=np.int64)
    if levels.min(initial=0) < 0 or levels.max(initial=0) >= im.n_levels:
        bad = levels[(levels < 0) | (levels >= im.n_levels)][0]
        raise ValueError(f"feature level {bad} outside [0, {im.n_levels - 1}]")
    return levels


def encode(im: ItemMemory, levels) -> BipolarVector:
    """Encode one sample: majority sign of the N value/feature bindings."""
    if im.value_dim != im.feature_dim:
        raise ValueError("plain HDC encoding needs equal value/feature dims")
    levels = _check_levels(im, levels)
    if levels.shape != (im.n_features,):
        raise ValueError(f"expected {im.n_features} feature levels, got {levels.shape}")
    counts = encode_counts(im.value_signs, im.feature_signs, levels[None, :])[0]
    return BipolarVector.from_bits(counts < 0)


def encode_dataset(im: ItemMemory, levels_matrix, chunk: int = 256) -> np.ndarray:
    """Encode many samples; returns the packed (n, words) query matrix."""
    if im.value_dim != im.feature_dim:
        raise ValueError("plain HDC encoding needs equal value/feature dims")
    levels_matrix = _check_levels(im, levels_matrix)
    if levels_matrix.ndim != 2 or levels_matrix.shape[1] != im.n_features:
        raise ValueError(f"expected (samples, {im.n_features}) feature levels")
    n = levels_matrix.shape[0]
    out = np.empty((n, bitvec.words_for(im.feature_dim)), dtype=np.uint64)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        counts = encode_counts(im.value_signs, im.feature_signs, levels_matrix[lo:hi])
        out[lo:hi] = bitvec.pack_bool_matrix(counts < 0)
    return out


class AssociativeMemory:
    """Class vectors plus their pre-binarization accumulators.

    The packed class rows always equal the binarized accumulators (with
    ties going to +1); every update re-binarizes the touched rows.
    """

    def __init__(self, dim: int, n_classes: int):
        self.dim = dim
        self.acc_counts = np.zeros((n_classes, dim), dtype=np.float64)
        self.acc_n = np.zeros(n_classes, dtype=np.int64)
        self.class_words = np.zeros((n_classes, bitvec.words_for(dim)), dtype=np.uint64)
        self.miss_history: list[int] = []

    @property
    def n_classes(self) -> int:
        return self.acc_counts.shape[0]

    def rebinarize(self, classes=None) -> None:
        ks = range(self.n_classes) if classes is None else classes
        for k in ks:
            self.class_words[k] = bitvec.pack_bool_matrix(self.acc_counts[k] < 0)[0]

    def class_vector(self, k: int) -> BipolarVector:
        return BipolarVector(self.dim, self.class_words[k])

    @property
    def class_vectors(self) -> list[BipolarVector]:
        return [self.class_vector(k) for k in range(self.n_classes)]

    @property
    def class_accumulators(self) -> list[Accumulator]:
        return [
            Accumulator.from_counts(self.acc_counts[k].copy(), int(self.acc_n[k]))
            for k in range(self.n_classes)
        ]

    def copy(self) -> "AssociativeMemory":
        am = AssociativeMemory(self.dim, self.n_classes)
        am.acc_counts[:] = self.acc_counts
        am.acc_n[:] = self.acc_n
        am.class_words[:] = self.class_words
        am.miss_history = list(self.miss_history)
        return am


def train_basic(im: ItemMemory, data, encoded: np.ndarray | None = None) -> AssociativeMemory:
    """Bundle the encoded training samples of each class into its class
    vector. ``encoded`` may pass in a precomputed packed query matrix to
    avoid re-encoding."""
    labels = np.asarray(data.labels)
    if labels.size == 0:
        raise ValueError("empty training set")
    n_classes = data.n_classes
    counts_per_class = np.bincount(labels, minlength=n_classes)
    for k in range(n_classes):
        if counts_per_class[k] == 0:
            raise ValueError(f"class {k} has no training samples")
    if encoded is None:
        encoded = encode_dataset(im, data.levels)
    am = AssociativeMemory(im.feature_dim, n_classes)
    chunk = 2048
    for lo in range(0, encoded.shape[0], chunk):
        hi = min(lo + chunk, encoded.shape[0])
        signs = bitvec.unpack_signs(encoded[lo:hi], im.feature_dim, dtype=np.float64)
        for k in np.unique(labels[lo:hi]):
            rows = signs[labels[lo:hi] == k]
            am.acc_counts[k] += rows.sum(axis=0)
            am.acc_n[k] += rows.shape[0]
    am.rebinarize()
    return am


def retrain(
    am: AssociativeMemory,
    im: ItemMemory,
    data,
    cfg: HdcConfig,
    encoded: np.ndarray | None = None,
) -> AssociativeMemory:
    """Online mis-classification updates over seeded shuffles.

    Each epoch revisits every sample; a miss adds rate * sample to the true
    class accumulator, subtracts it from the predicted one, and immediately
    re-binarizes both rows. Stops early once an epoch is clean. The input
    memory is left untouched.
    """
    if am.dim != im.feature_dim:
        raise ValueError(f"dimension mismatch: memory {am.dim} != encoder {im.feature_dim}")
    if encoded is None:
        encoded = encode_dataset(im, data.levels)
    labels = np.ascontiguousarray(data.labels, dtype=np.int64)
    out = am.copy()
    out.miss_history = []
    for epoch in range(cfg.retrain_epochs):
        order = np.random.default_rng(cfg.seed + epoch).permutation(encoded.shape[0])
        n_miss = retrain_pass(
            encoded, labels, order, out.class_words, out.acc_counts, out.dim, cfg.retrain_rate
        )
        out.miss_history.append(n_miss)
        if n_miss == 0:
            break
    return out


def predict(am: AssociativeMemory, query: BipolarVector) -> int:
    """Nearest class row by Hamming distance; ties take the lowest index."""
    if query.dim != am.dim:
        raise ValueError(f"dimension mismatch: {query.dim} != {am.dim}")
    dists = bitvec.hamming_matrix(query.words[None, :], am.class_words)[0]
    return int(np.argmin(dists))


def predict_packed(am: AssociativeMemory, query_words: np.ndarray) -> np.ndarray:
    """Batch variant of :func:`predict` on a packed (n, words) matrix."""
    dists = bitvec.hamming_matrix(query_words, am.class_words)
    return np.argmin(dists, axis=1)


@dataclass
class HdcModel:
    """Trained HDC classifier bundle used by evaluation and storage."""

    config: HdcConfig
    item_memory: ItemMemory
    assoc_memory: AssociativeMemory
    retrained: bool = False
    kind: str = field(init=False)

    def __post_init__(self):
        self.kind = "hdc-retrain" if self.retrained else "hdc-basic"

    @property
    def n_classes(self) -> int:
        return self.assoc_memory.n_classes

    def predict_batch(self, levels_matrix) -> np.ndarray:
        encoded = encode_dataset(self.item_memory, levels_matrix)
        return predict_packed(self.assoc_memory, encoded)


def train_hdc(cfg: HdcConfig, data, retrained: bool = False) -> HdcModel:
    """End-to-end baseline training: generate memories, bundle classes and
    optionally run the retraining passes."""
    im = ItemMemory.generate(cfg)
    encoded = encode_dataset(im, data.levels)
    am = train_basic(im, data, encoded=encoded)
    if retrained:
        am = retrain(am, im, data, cfg, encoded=encoded)
    return HdcModel(config=cfg, item_memory=im, assoc_memory=am, retrained=retrained)
