"""Bit-packed bipolar vector arithmetic.

A bipolar vector is a fixed-length sequence over {+1, -1}, stored packed
into little-endian 64-bit words with bit 1 encoding -1 and bit 0 encoding
+1 (so the all-zero word block is the all-(+1) vector). Hamming distance
and dot products reduce to XOR + popcount on the packed words:

    dot(a, b) = D - 2 * popcount(a ^ b)
    hamm(a, b) = popcount(a ^ b) / D

Padding bits beyond the logical length are kept at 0 by every constructor
and operation, so popcounts never need masking.
"""

from __future__ import annotations

import numpy as np

WORD_BITS = 64


def words_for(dim: int) -> int:
    """Number of 64-bit words needed to hold ``dim`` bits."""
    return (dim + WORD_BITS - 1) // WORD_BITS


def _padding_mask(dim: int) -> np.ndarray:
    """Per-word AND mask that zeroes bits at positions >= dim."""
    mask = np.full(words_for(dim), ~np.uint64(0), dtype=np.uint64)
    tail = dim % WORD_BITS
    if tail:
        mask[-1] = (np.uint64(1) << np.uint64(tail)) - np.uint64(1)
    return mask


def pack_bool_matrix(bits: np.ndarray) -> np.ndarray:
    """Pack a (rows, dim) 0/1 matrix into (rows, words) uint64, bit i of a
    row at word i//64, position i%64. Padding bits are zero."""
    bits = np.ascontiguousarray(bits, dtype=np.uint8)
    if bits.ndim == 1:
        bits = bits[None, :]
    rows, dim = bits.shape
    nwords = words_for(dim)
    packed_bytes = np.packbits(bits, axis=1, bitorder="little")
    padded = np.zeros((rows, nwords * 8), dtype=np.uint8)
    padded[:, : packed_bytes.shape[1]] = packed_bytes
    return padded.view("<u8").copy()


def unpack_bit_matrix(words: np.ndarray, dim: int) -> np.ndarray:
    """Inverse of :func:`pack_bool_matrix`; returns a (rows, dim) uint8 0/1
    matrix."""
    words = np.ascontiguousarray(words, dtype=np.uint64)
    if words.ndim == 1:
        words = words[None, :]
    as_bytes = words.view(np.uint8).astype(np.uint8, copy=False)
    bits = np.unpackbits(as_bytes.reshape(words.shape[0], -1), axis=1, bitorder="little")
    return bits[:, :dim]


def pack_signs(signs: np.ndarray) -> np.ndarray:
    """Pack a (rows, dim) or (dim,) array of +/-1 values (negative -> bit 1)."""
    return pack_bool_matrix(np.asarray(signs) < 0)


def unpack_signs(words: np.ndarray, dim: int, dtype=np.int8) -> np.ndarray:
    """Unpack packed words back to +/-1 values."""
    bits = unpack_bit_matrix(words, dim)
    return (1 - 2 * bits.astype(np.int16)).astype(dtype)


def popcount_words(words: np.ndarray) -> np.ndarray:
    """Per-word set-bit counts."""
    return np.bitwise_count(words)


class BipolarVector:
    """Immutable fixed-length vector over {+1, -1}, bit-packed.

    ``words`` is read-only; all operations return new vectors.
    """

    __slots__ = ("dim", "words")

    def __init__(self, dim: int, words: np.ndarray):
        if dim < 1:
            raise ValueError(f"dim must be positive, got {dim}")
        words = np.ascontiguousarray(words, dtype=np.uint64)
        if words.shape != (words_for(dim),):
            raise ValueError(
                f"expected {words_for(dim)} words for dim {dim}, got shape {words.shape}"
            )
        words = words & _padding_mask(dim)
        words.flags.writeable = False
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "words", words)

    def __setattr__(self, name, value):
        raise AttributeError("BipolarVector is immutable")

    @classmethod
    def from_signs(cls, signs) -> "BipolarVector":
        signs = np.asarray(signs)
        if signs.ndim != 1 or signs.size == 0:
            raise ValueError("signs must be a non-empty 1-d array")
        if not np.all(np.abs(signs) == 1):
            raise ValueError("entries must be +1 or -1")
        return cls(signs.size, pack_signs(signs)[0])

    @classmethod
    def from_bits(cls, bits) -> "BipolarVector":
        """Build from a 0/1 array, bit 1 meaning -1."""
        bits = np.asarray(bits)
        return cls(bits.size, pack_bool_matrix(bits)[0])

    @classmethod
    def random(cls, dim: int, rng: np.random.Generator) -> "BipolarVector":
        bits = rng.integers(0, 2, size=dim, dtype=np.uint8)
        return cls.from_bits(bits)

    def to_signs(self, dtype=np.int8) -> np.ndarray:
        return unpack_signs(self.words, self.dim, dtype=dtype)[0]

    def to_bits(self) -> np.ndarray:
        return unpack_bit_matrix(self.words, self.dim)[0]

    def complement(self) -> "BipolarVector":
        return BipolarVector(self.dim, ~self.words)

    def bind(self, other: "BipolarVector") -> "BipolarVector":
        """Elementwise (Hadamard) product; XOR on the packed words."""
        _check_dims(self, other)
        return BipolarVector(self.dim, self.words ^ other.words)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BipolarVector)
            and self.dim == other.dim
            and bool(np.array_equal(self.words, other.words))
        )

    def __hash__(self):
        return hash((self.dim, self.words.tobytes()))

    def __len__(self) -> int:
        return self.dim

    def __repr__(self) -> str:
        head = "".join("-" if b else "+" for b in self.to_bits()[:16])
        tail = "..." if self.dim > 16 else ""
        return f"BipolarVector(dim={self.dim}, {head}{tail})"


def _check_dims(a: BipolarVector, b: BipolarVector) -> None:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} != {b.dim}")


def hamming_count(a: BipolarVector, b: BipolarVector) -> int:
    """Number of differing coordinates (exact integer)."""
    _check_dims(a, b)
    return int(popcount_words(a.words ^ b.words).sum())


def hamming(a: BipolarVector, b: BipolarVector) -> float:
    """Normalized Hamming distance: differing coordinates / dim."""
    return hamming_count(a, b) / a.dim


def dot(a: BipolarVector, b: BipolarVector) -> int:
    """Inner product of the +/-1 vectors: dim - 2 * hamming_count."""
    return a.dim - 2 * hamming_count(a, b)


class Accumulator:
    """Per-dimension running sum of bipolar vectors (single writer).

    Holds the pre-binarization sums used by bundling; entries stay exact
    for integer weights since they remain far below 2**53.
    """

    __slots__ = ("dim", "counts", "n_added")

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError(f"dim must be positive, got {dim}")
        self.dim = dim
        self.counts = np.zeros(dim, dtype=np.float64)
        self.n_added = 0

    def add(self, vec: BipolarVector, weight: float = 1.0) -> None:
        if vec.dim != self.dim:
            raise ValueError(f"dimension mismatch: {vec.dim} != {self.dim}")
        self.counts += weight * vec.to_signs(dtype=np.float64)
        self.n_added += 1

    def add_signs(self, signs: np.ndarray, weight: float = 1.0) -> None:
        """Accumulate a (dim,) or (rows, dim) +/-1 array."""
        signs = np.asarray(signs, dtype=np.float64)
        if signs.ndim == 1:
            signs = signs[None, :]
        if signs.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: {signs.shape[1]} != {self.dim}")
        self.counts += weight * signs.sum(axis=0)
        self.n_added += signs.shape[0]

    @classmethod
    def from_counts(cls, counts: np.ndarray, n_added: int) -> "Accumulator":
        acc = cls(len(counts))
        acc.counts[:] = counts
        acc.n_added = n_added
        return acc

    def copy(self) -> "Accumulator":
        return Accumulator.from_counts(self.counts.copy(), self.n_added)


def bundle_sign(acc: Accumulator) -> BipolarVector:
    """Binarize accumulated sums with sgn(0) = +1 (bit 1 only when the sum
    is strictly negative)."""
    if acc.n_added == 0:
        raise ValueError("cannot bundle an empty accumulator")
    return BipolarVector.from_bits(acc.counts < 0)


def bundle_signs_matrix(signs: np.ndarray) -> BipolarVector:
    """Majority-binarize the rows of a (rows, dim) +/-1 matrix."""
    signs = np.asarray(signs)
    if signs.ndim != 2 or signs.shape[0] == 0:
        raise ValueError("need a non-empty (rows, dim) matrix")
    return BipolarVector.from_bits(signs.sum(axis=0, dtype=np.int64) < 0)


def hamming_matrix(a_words: np.ndarray, b_words: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Pairwise Hamming counts between packed row matrices.

    a_words: (r, w), b_words: (s, w) -> (r, s) int64. Chunked over rows to
    bound the transient XOR buffer.
    """
    a_words = np.atleast_2d(a_words)
    b_words = np.atleast_2d(b_words)
    if a_words.shape[1] != b_words.shape[1]:
        raise ValueError("word-count mismatch between packed matrices")
    out = np.empty((a_words.shape[0], b_words.shape[0]), dtype=np.int64)
    for lo in range(0, a_words.shape[0], chunk):
        hi = min(lo + chunk, a_words.shape[0])
        xored = a_words[lo:hi, None, :] ^ b_words[None, :, :]
        out[lo:hi] = popcount_words(xored).sum(axis=2, dtype=np.int64)
    return out
