"""Bit-exact model files and model-size accounting.

File layout (little-endian throughout):

    0   4  magic b"LDC1"
    4   2  format version (currently 1)
    6   1  model kind: 1 = ldc, 2 = hdc-basic, 3 = hdc-retrain
    7   1  reserved (0)
    8   4  n_features        12  4  n_levels        16  4  n_classes
    20  4  dim_value         24  4  dim_feature
    28  8  training seed (provenance)
    36  8  value-section bits
    44  8  feature-section bits
    52  8  class-section bits
    60  -  three sections, in value/feature/class order
    .   4  crc32 of all preceding bytes

Vectors inside a section are concatenated bit-tightly (no per-vector
padding), so each section holds exactly its header-declared bit count;
only the section tail is zero-padded up to a 64-bit word boundary. The
sum of the three declared bit counts therefore equals model_size_bits,
which makes the published sizes auditable straight from the file.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bitvec
from .hdc import AssociativeMemory, HdcConfig, HdcModel, ItemMemory
from .network import LdcBinaryModel, LdcConfig

MAGIC = b"LDC1"
VERSION = 1
HEADER = struct.Struct("<4sHBBIIIIIQQQQ")
KIND_CODES = {"ldc": 1, "hdc-basic": 2, "hdc-retrain": 3}
KIND_NAMES = {v: k for k, v in KIND_CODES.items()}


class StoreError(ValueError):
    pass


class BadMagicError(StoreError):
    pass


class VersionMismatchError(StoreError):
    pass


class ChecksumError(StoreError):
    pass


class TruncatedFileError(StoreError):
    pass


class FormatError(StoreError):
    pass


@dataclass(frozen=True)
class ModelDescriptor:
    """Counts and dimensions that determine a model's storage footprint."""

    kind: str
    n_features: int
    n_levels: int
    n_classes: int
    dim_value: int
    dim_feature: int

    @property
    def section_bits(self) -> tuple[int, int, int]:
        return (
            self.n_levels * self.dim_value,
            self.n_features * self.dim_feature,
            self.n_classes * self.dim_feature,
        )


def describe(model) -> ModelDescriptor:
    if isinstance(model, LdcBinaryModel):
        cfg = model.config
        return ModelDescriptor(
            model.kind, cfg.n_features, cfg.n_levels, cfg.n_classes,
            cfg.dim_value, cfg.dim_feature,
        )
    if isinstance(model, HdcModel):
        cfg = model.config
        return ModelDescriptor(
            model.kind, cfg.n_features, cfg.n_levels, cfg.n_classes, cfg.dim, cfg.dim
        )
    raise TypeError(f"cannot describe {type(model).__name__}")


def model_size_bits(desc: ModelDescriptor) -> int:
    """Total stored vector bits: item memory (value + feature) plus
    associative memory (class)."""
    return sum(desc.section_bits)


def model_size_kb(desc: ModelDescriptor) -> float:
    """Size in kilobytes at 1 KB = 1000 bytes."""
    return model_size_bits(desc) / 8000.0


def _words_bytes(nbits: int) -> int:
    return bitvec.words_for(nbits) * 8


def expected_file_size(desc: ModelDescriptor) -> int:
    """Exact on-disk size: header + word-aligned sections + checksum."""
    return HEADER.size + sum(_words_bytes(b) for b in desc.section_bits) + 4


def _section_to_bytes(row_words: np.ndarray, dim: int) -> bytes:
    bits = bitvec.unpack_bit_matrix(row_words, dim).ravel()
    return bitvec.pack_bool_matrix(bits).tobytes()


def _section_from_bytes(payload: bytes, count: int, dim: int) -> np.ndarray:
    total = count * dim
    words = np.frombuffer(payload, dtype="<u8")
    bits = bitvec.unpack_bit_matrix(words, total).reshape(count, dim)
    return bitvec.pack_bool_matrix(bits)


def save(model, path) -> None:
    """Serialize a binary model; the same model always yields the same bytes."""
    desc = describe(model)
    if isinstance(model, LdcBinaryModel):
        im = model.item_memory
        class_words = model.class_words
        seed = model.config.seed
    else:
        im = model.item_memory
        class_words = model.assoc_memory.class_words
        seed = model.config.seed
    vb, fb, cb = desc.section_bits
    header = HEADER.pack(
        MAGIC, VERSION, KIND_CODES[desc.kind], 0,
        desc.n_features, desc.n_levels, desc.n_classes,
        desc.dim_value, desc.dim_feature,
        seed, vb, fb, cb,
    )
    body = (
        header
        + _section_to_bytes(im.value_words, desc.dim_value)
        + _section_to_bytes(im.feature_words, desc.dim_feature)
        + _section_to_bytes(class_words, desc.dim_feature)
    )
    blob = body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
    Path(path).write_bytes(blob)


def read_header(path) -> dict:
    data = Path(path).read_bytes()
    return _parse_header(data, path)


def _parse_header(data: bytes, path) -> dict:
    if len(data) < HEADER.size + 4:
        raise TruncatedFileError(f"{path}: shorter than a model header")
    (magic, version, kind_code, _res, n_features, n_levels, n_classes,
     dim_value, dim_feature, seed, vb, fb, cb) = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise VersionMismatchError(f"{path}: format version {version}, expected {VERSION}")
    if kind_code not in KIND_NAMES:
        raise FormatError(f"{path}: unknown model kind code {kind_code}")
    header = {
        "kind": KIND_NAMES[kind_code],
        "n_features": n_features, "n_levels": n_levels, "n_classes": n_classes,
        "dim_value": dim_value, "dim_feature": dim_feature, "seed": seed,
        "section_bits": (vb, fb, cb),
    }
    expect = (
        n_levels * dim_value, n_features * dim_feature, n_classes * dim_feature
    )
    if tuple(header["section_bits"]) != expect:
        raise FormatError(
            f"{path}: section bit counts {header['section_bits']} disagree with dims {expect}"
        )
    return header


def load(path):
    """Load a model file; returns an LdcBinaryModel or HdcModel.

    HDC accumulators are not persisted: a loaded HDC model carries its
    binarized class vectors only (inference-ready, not retrainable).
    """
    data = Path(path).read_bytes()
    header = _parse_header(data, path)
    vb, fb, cb = header["section_bits"]
    expected = HEADER.size + sum(_words_bytes(b) for b in (vb, fb, cb)) + 4
    if len(data) != expected:
        raise TruncatedFileError(f"{path}: {len(data)} bytes, expected {expected}")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise ChecksumError(f"{path}: payload checksum mismatch")

    off = HEADER.size
    sections = []
    for nbits, count, dim in (
        (vb, header["n_levels"], header["dim_value"]),
        (fb, header["n_features"], header["dim_feature"]),
        (cb, header["n_classes"], header["dim_feature"]),
    ):
        nbytes = _words_bytes(nbits)
        sections.append(_section_from_bytes(data[off : off + nbytes], count, dim))
        off += nbytes

    value_words, feature_words, class_words = sections
    im = ItemMemory(value_words, header["dim_value"], feature_words, header["dim_feature"])
    if header["kind"] == "ldc":
        cfg = LdcConfig(
            n_features=header["n_features"], n_classes=header["n_classes"],
            dim_value=header["dim_value"], dim_feature=header["dim_feature"],
            n_levels=header["n_levels"], seed=header["seed"],
        )
        return LdcBinaryModel(config=cfg, item_memory=im, class_words=class_words)
    cfg = HdcConfig(
        n_features=header["n_features"], n_classes=header["n_classes"],
        dim=header["dim_feature"], n_levels=header["n_levels"], seed=header["seed"],
    )
    am = AssociativeMemory(header["dim_feature"], header["n_classes"])
    am.class_words[:] = class_words
    am.acc_counts[:] = bitvec.unpack_signs(class_words, am.dim, dtype=np.float64)
    am.acc_n[:] = 1
    return HdcModel(
        config=cfg, item_memory=im, assoc_memory=am,
        retrained=header["kind"] == "hdc-retrain",
    )
