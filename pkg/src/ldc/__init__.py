"""Binary vector classifiers: bit-packed HDC baselines and a trained
low-dimensional model compiled down to XOR/popcount inference."""

from .bitvec import Accumulator, BipolarVector, bundle_sign, dot, hamming, hamming_count
from .data import QuantizedDataset, load_dataset, make_synthetic, quantize
from .harness import cycle_estimate, evaluate, inject_bit_errors, robustness_sweep
from .hdc import AssociativeMemory, HdcConfig, HdcModel, ItemMemory, train_hdc
from .network import LdcBinaryModel, LdcConfig, LdcNetwork, encode_ldc, extract, predict_binary
from .store import ModelDescriptor, load, model_size_bits, model_size_kb, save
from .train import TrainConfig, fit

__version__ = "0.1.0"

__all__ = [
    "Accumulator", "AssociativeMemory", "BipolarVector", "HdcConfig", "HdcModel",
    "ItemMemory", "LdcBinaryModel", "LdcConfig", "LdcNetwork", "ModelDescriptor",
    "QuantizedDataset", "TrainConfig", "bundle_sign", "cycle_estimate", "dot",
    "encode_ldc", "evaluate", "extract", "fit", "hamming", "hamming_count",
    "inject_bit_errors", "load", "load_dataset", "make_synthetic", "model_size_bits",
    "model_size_kb", "predict_binary", "quantize", "robustness_sweep", "save",
    "train_hdc",
]
