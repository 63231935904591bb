"""Accuracy evaluation, bit-error injection, and the pipeline cycle model.

The cycle model is analytical: one binding block processed per cycle
gives N+1 encode cycles, and the comparator pipeline costs the class
count plus the popcount adder-tree depth, less a fixed overlap credit
(the comparator starts before the final bundle stages retire). The
credit was fitted once against measured accelerator latencies at
200 MHz and is frozen here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bitvec
from .hdc import HdcModel
from .network import LdcBinaryModel
from .store import ModelDescriptor

_INJECT_STREAM = 0xB17F
SIMILARITY_OVERLAP_CREDIT = -3
DEFAULT_CLOCK_HZ = 200e6


@dataclass
class EvalResult:
    accuracy: float
    confusion: np.ndarray
    n_samples: int


def evaluate(model, dataset) -> EvalResult:
    """Fraction of correct predictions plus the K x K confusion matrix
    (rows = true class, columns = predicted)."""
    labels = np.asarray(dataset.labels, dtype=np.int64)
    predicted = model.predict_batch(dataset.levels)
    k = model.n_classes
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (labels, predicted), 1)
    accuracy = float((predicted == labels).mean()) if labels.size else 0.0
    return EvalResult(accuracy=accuracy, confusion=confusion, n_samples=labels.size)


def _flip_words(words: np.ndarray, dim: int, rate: float, rng) -> np.ndarray:
    mask = rng.random((words.shape[0], dim)) < rate
    return words ^ bitvec.pack_bool_matrix(mask)


def inject_bit_errors(model, rate: float, seed, include_item_memory: bool = False):
    """Return a copy of the model with each associative-memory bit flipped
    independently with probability ``rate``. The input model is untouched.

    ``include_item_memory`` extends the injection to the value and feature
    vectors as well (off by default).
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError("error rate must be in [0, 1]")
    rng = np.random.default_rng([_INJECT_STREAM] + np.atleast_1d(seed).tolist())

    if isinstance(model, LdcBinaryModel):
        dim = model.config.dim_feature
        class_words = _flip_words(model.class_words, dim, rate, rng)
        im = model.item_memory
        if include_item_memory:
            from .hdc import ItemMemory

            im = ItemMemory(
                _flip_words(im.value_words, im.value_dim, rate, rng), im.value_dim,
                _flip_words(im.feature_words, im.feature_dim, rate, rng), im.feature_dim,
            )
        return LdcBinaryModel(config=model.config, item_memory=im, class_words=class_words)

    if isinstance(model, HdcModel):
        from .hdc import AssociativeMemory, ItemMemory

        am_src = model.assoc_memory
        am = AssociativeMemory(am_src.dim, am_src.n_classes)
        am.class_words[:] = _flip_words(am_src.class_words, am_src.dim, rate, rng)
        am.acc_counts[:] = bitvec.unpack_signs(am.class_words, am.dim, dtype=np.float64)
        am.acc_n[:] = 1
        im = model.item_memory
        if include_item_memory:
            im = ItemMemory(
                _flip_words(im.value_words, im.value_dim, rate, rng), im.value_dim,
                _flip_words(im.feature_words, im.feature_dim, rate, rng), im.feature_dim,
            )
        return HdcModel(
            config=model.config, item_memory=im, assoc_memory=am, retrained=model.retrained
        )

    raise TypeError(f"cannot inject errors into {type(model).__name__}")


@dataclass
class RobustnessReport:
    rates: list
    accuracies: np.ndarray  # (n_rates, runs)
    seed: int = 0
    means: np.ndarray = field(init=False)
    stds: np.ndarray = field(init=False)

    def __post_init__(self):
        self.accuracies = np.atleast_2d(np.asarray(self.accuracies, dtype=np.float64))
        self.means = self.accuracies.mean(axis=1)
        ddof = 1 if self.accuracies.shape[1] > 1 else 0
        self.stds = self.accuracies.std(axis=1, ddof=ddof)

    def as_table(self) -> str:
        lines = ["rate\tmean_accuracy\tstd_accuracy\truns"]
        for rate, mean, std, row in zip(self.rates, self.means, self.stds, self.accuracies):
            cells = "\t".join(f"{a:.6f}" for a in row)
            lines.append(f"{rate:g}\t{mean:.6f}\t{std:.6f}\t{cells}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "rates": [float(r) for r in self.rates],
            "mean": self.means.tolist(),
            "std": self.stds.tolist(),
            "accuracies": self.accuracies.tolist(),
            "seed": self.seed,
        }


def robustness_sweep(model, dataset, rates, runs: int = 5, seed: int = 0) -> RobustnessReport:
    """Accuracy under injected bit errors, averaged over seeded runs.

    Each (rate, run) pair corrupts one fresh model copy under the derived
    seed [seed, rate_index, run]; a rate of zero reproduces the clean
    accuracy exactly."""
    rates = list(rates)
    if sorted(rates) != rates:
        raise ValueError("rates must be sorted ascending")
    accs = np.zeros((len(rates), runs))
    for i, rate in enumerate(rates):
        for j in range(runs):
            corrupted = inject_bit_errors(model, rate, seed=[seed, i, j])
            accs[i, j] = evaluate(corrupted, dataset).accuracy
    return RobustnessReport(rates=rates, accuracies=accs, seed=seed)


@dataclass
class CycleEstimate:
    encode_cycles: int
    similarity_cycles: int
    clock_hz: float

    @property
    def total_cycles(self) -> int:
        return self.encode_cycles + self.similarity_cycles

    @property
    def latency_us(self) -> float:
        return self.total_cycles / self.clock_hz * 1e6

    def to_dict(self) -> dict:
        return {
            "encode_cycles": self.encode_cycles,
            "similarity_cycles": self.similarity_cycles,
            "total_cycles": self.total_cycles,
            "clock_hz": self.clock_hz,
            "latency_us": self.latency_us,
        }


def cycle_estimate(desc: ModelDescriptor, clock_hz: float = DEFAULT_CLOCK_HZ) -> CycleEstimate:
    """Pipelined single-multiplier latency: N+1 cycles to stream the
    encoder, then the class comparisons and popcount tree."""
    if clock_hz <= 0:
        raise ValueError("clock must be positive")
    encode = desc.n_features + 1
    tree_depth = math.ceil(math.log2(desc.dim_feature))
    similarity = max(1, desc.n_classes + tree_depth + SIMILARITY_OVERLAP_CREDIT)
    return CycleEstimate(encode_cycles=encode, similarity_cycles=similarity, clock_hz=clock_hz)


def write_run_summary(path, payload: dict) -> None:
    """Machine-readable record sufficient to reproduce the invocation."""
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
