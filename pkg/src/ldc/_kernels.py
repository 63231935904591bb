"""Hot loops for encoding and online retraining.

Compiled with numba when available; the numpy fallbacks are exact
functional twins so results never depend on which path ran. Kernels are
deliberately serial: the retraining pass is order-dependent by definition
and encode batches are chunked by the callers.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


def encode_counts_numpy(value_signs, feature_signs, levels):
    """Binding sums for a batch: out[b, j] = sum_i F[i, j] * V[levels[b, i], j].

    value_signs: (M, D) int8, feature_signs: (N, D) int8, levels: (B, N) int.
    Returns (B, D) int32.
    """
    batch, n_features = levels.shape
    dim = value_signs.shape[1]
    out = np.zeros((batch, dim), dtype=np.int32)
    for i in range(n_features):
        gathered = value_signs[levels[:, i]].astype(np.int32)
        gathered *= feature_signs[i].astype(np.int32)
        out += gathered
    return out


@njit(cache=True)
def _encode_counts_jit(value_signs, feature_signs, levels, out):  # pragma: no cover
    batch, n_features = levels.shape
    dim = value_signs.shape[1]
    for b in range(batch):
        acc = out[b]
        for i in range(n_features):
            v = value_signs[levels[b, i]]
            f = feature_signs[i]
            for j in range(dim):
                acc[j] += np.int32(f[j]) * np.int32(v[j])
    return out


def encode_counts(value_signs, feature_signs, levels):
    levels = np.ascontiguousarray(levels, dtype=np.int64)
    if not NUMBA_AVAILABLE:
        return encode_counts_numpy(value_signs, feature_signs, levels)
    out = np.zeros((levels.shape[0], value_signs.shape[1]), dtype=np.int32)
    return _encode_counts_jit(
        np.ascontiguousarray(value_signs, dtype=np.int8),
        np.ascontiguousarray(feature_signs, dtype=np.int8),
        levels,
        out,
    )


@njit(cache=True)
def _popcount64(x):  # pragma: no cover
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)


@njit(cache=True)
def _retrain_pass_jit(sample_words, labels, order, class_words, acc, dim, alpha):  # pragma: no cover
    n_words = sample_words.shape[1]
    n_classes = class_words.shape[0]
    n_miss = 0
    for idx in order:
        s = sample_words[idx]
        best = 0
        best_d = np.int64(dim + 1)
        for k in range(n_classes):
            d = np.int64(0)
            for w in range(n_words):
                d += np.int64(_popcount64(s[w] ^ class_words[k, w]))
            if d < best_d:
                best_d = d
                best = k
        true_k = labels[idx]
        if best != true_k:
            n_miss += 1
            for j in range(dim):
                bit = (s[j >> 6] >> np.uint64(j & 63)) & np.uint64(1)
                sj = 1.0 - 2.0 * np.float64(bit)
                acc[true_k, j] += alpha * sj
                acc[best, j] -= alpha * sj
            for k in (true_k, best):
                for w in range(n_words):
                    word = np.uint64(0)
                    base = w << 6
                    top = min(64, dim - base)
                    for t in range(top):
                        if acc[k, base + t] < 0.0:
                            word |= np.uint64(1) << np.uint64(t)
                    class_words[k, w] = word
    return n_miss


def _retrain_pass_numpy(sample_words, labels, order, class_words, acc, dim, alpha):
    from . import bitvec

    n_miss = 0
    for idx in order:
        s = sample_words[idx]
        dists = bitvec.popcount_words(s[None, :] ^ class_words).sum(axis=1)
        best = int(np.argmin(dists))
        true_k = int(labels[idx])
        if best != true_k:
            n_miss += 1
            signs = bitvec.unpack_signs(s, dim, dtype=np.float64)[0]
            acc[true_k] += alpha * signs
            acc[best] -= alpha * signs
            class_words[true_k] = bitvec.pack_bool_matrix(acc[true_k] < 0)[0]
            class_words[best] = bitvec.pack_bool_matrix(acc[best] < 0)[0]
    return n_miss


def retrain_pass(sample_words, labels, order, class_words, acc, dim, alpha):
    """One sequential mis-classification pass; mutates class_words and acc
    in place, returns the number of mis-classified samples."""
    args = (
        np.ascontiguousarray(sample_words, dtype=np.uint64),
        np.ascontiguousarray(labels, dtype=np.int64),
        np.ascontiguousarray(order, dtype=np.int64),
        class_words,
        acc,
        dim,
        float(alpha),
    )
    if NUMBA_AVAILABLE:
        return int(_retrain_pass_jit(*args))
    return int(_retrain_pass_numpy(*args))
