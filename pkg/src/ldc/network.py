"""The low-dimensional classifier and its trainable network form.

The classifier itself is three binary stages: a table of value codes (one
short +/-1 vector per quantized level), a binding stage that multiplies
each feature's code, tiled up to the feature width, with that feature's
+/-1 vector and majority-binarizes the sum, and a class stage whose
logits are +/-1 dot products. For training, the same computation is run
as a float network: a small real-valued net (1 -> hidden -> dim_value,
tanh activations, batch norm on the final pre-activation) produces the
value codes, and the binding/class weights are latent reals binarized by
sign on the forward pass. After training, signs of everything are packed
into bit matrices and the float weights can be thrown away; from then on
inference is XOR + popcount.

Forward modes:
  binary=True   sign() at every binarization (what inference computes)
  binary=False  the clipped-identity surrogate (what gradients see)

Both modes share one backward pass; in binary mode it is the
straight-through estimate, in surrogate mode it is the exact gradient,
which is what the finite-difference tests check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bitvec
from .bitvec import BipolarVector
from .hdc import ItemMemory

BN_EPS = 1e-5
_INIT_STREAM = 0x1DC0


def sign_positive(x: np.ndarray) -> np.ndarray:
    """Elementwise sign with sign(0) = +1."""
    return np.where(np.asarray(x) < 0, -1.0, 1.0)


@dataclass(frozen=True)
class LdcConfig:
    n_features: int
    n_classes: int
    dim_value: int = 4
    dim_feature: int = 64
    n_levels: int = 256
    hidden: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.dim_value < 2:
            raise ValueError("dim_value must be >= 2")
        if self.dim_feature % self.dim_value != 0:
            raise ValueError("dim_feature must be an integer multiple of dim_value")
        if self.n_levels < 2:
            raise ValueError("n_levels must be >= 2")
        if self.n_features < 1 or self.n_classes < 1:
            raise ValueError("need at least one feature and one class")
        if self.hidden < 1:
            raise ValueError("hidden width must be >= 1")

    @property
    def n_stack(self) -> int:
        """How many times a value code is tiled to match the feature width."""
        return self.dim_feature // self.dim_value


class LdcNetwork:
    """Float-weight training form of the classifier.

    ``params`` maps name -> ndarray (float64). The value-net batch-norm
    statistics are population statistics over the full level sweep; they
    are recomputed from the current weights during training and a frozen
    copy is stored before extraction.
    """

    def __init__(self, config: LdcConfig, params: dict[str, np.ndarray]):
        self.config = config
        self.params = params
        self.bn_mean: np.ndarray | None = None
        self.bn_var: np.ndarray | None = None

    @classmethod
    def init(cls, config: LdcConfig) -> "LdcNetwork":
        rng = np.random.default_rng([_INIT_STREAM, config.seed])
        h, dv = config.hidden, config.dim_value

        def uniform(shape, scale):
            return rng.uniform(-scale, scale, size=shape)

        params = {
            "value_w1": uniform((1, h), 1.0),
            "value_b1": uniform((h,), 1.0),
            "value_w2": uniform((h, dv), 1.0 / np.sqrt(h)),
            "value_b2": uniform((dv,), 1.0 / np.sqrt(h)),
            "bn_gamma": np.ones(dv),
            "bn_beta": np.zeros(dv),
            "feature_weights": uniform((config.n_features, config.dim_feature), 0.1),
            "class_weights": uniform((config.dim_feature, config.n_classes), 0.1),
        }
        return cls(config, params)

    def copy_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}

    def load_params(self, params: dict[str, np.ndarray]) -> None:
        for k in self.params:
            self.params[k][...] = params[k]

    def freeze_batchnorm(self) -> None:
        """Store the current sweep statistics for eval-mode use."""
        sweep = _value_sweep(self, frozen=False)
        self.bn_mean = sweep["mu"].copy()
        self.bn_var = sweep["var"].copy()


def _level_inputs(n_levels: int) -> np.ndarray:
    """Scale levels {0..M-1} into [-1, 1] for the value net."""
    return (2.0 * np.arange(n_levels) / (n_levels - 1) - 1.0)[:, None]


def _value_sweep(net: LdcNetwork, frozen: bool) -> dict:
    """Run the value net on every level at once; returns all intermediates."""
    p = net.params
    x = _level_inputs(net.config.n_levels)
    h_pre = x @ p["value_w1"] + p["value_b1"]
    h = np.tanh(h_pre)
    z = h @ p["value_w2"] + p["value_b2"]
    if frozen:
        if net.bn_mean is None:
            raise ValueError("batch-norm statistics were never frozen")
        mu, var = net.bn_mean, net.bn_var
    else:
        mu = z.mean(axis=0)
        var = z.var(axis=0)
    std = np.sqrt(var + BN_EPS)
    zhat = (z - mu) / std
    a = np.tanh(p["bn_gamma"] * zhat + p["bn_beta"])
    return {"x": x, "h": h, "z": z, "mu": mu, "var": var, "std": std, "zhat": zhat, "a": a}


def _check_level_range(levels: np.ndarray, n_levels: int) -> np.ndarray:
    levels = np.asarray(levels, dtype=np.int64)
    if levels.size and (levels.min() < 0 or levels.max() >= n_levels):
        raise ValueError(f"feature level outside [0, {n_levels - 1}]")
    return levels


def _binding_sums(codes: np.ndarray, feature_mat: np.ndarray, levels: np.ndarray) -> tuple:
    """Feature-layer pre-activation.

    codes: (M, dv) value codes; feature_mat: (N, df); levels: (B, N).
    out[b, j*dv + d] = sum_i feature_mat[i, j*dv+d] * codes[levels[b, i], d]
    Returns (sums (B, df), gathered (dv, B, N)) with the gathered codes kept
    for the backward pass.
    """
    n_feat, df = feature_mat.shape
    dv = codes.shape[1]
    gathered = codes[levels]                       # (B, N, dv)
    gathered_d = np.ascontiguousarray(gathered.transpose(2, 0, 1))  # (dv, B, N)
    blocks = np.ascontiguousarray(
        feature_mat.reshape(n_feat, df // dv, dv).transpose(2, 0, 1)
    )                                              # (dv, N, n)
    prod = gathered_d @ blocks                     # (dv, B, n)
    sums = prod.transpose(1, 2, 0).reshape(levels.shape[0], df)
    return sums, gathered_d


def forward(net: LdcNetwork, levels, binary: bool = True, frozen_bn: bool = False):
    """Full forward pass; returns (logits, cache).

    ``binary`` picks sign() binarization (inference semantics) or the
    clipped-identity surrogate. ``frozen_bn`` selects stored batch-norm
    statistics instead of the current sweep statistics.
    """
    cfg = net.config
    levels = _check_level_range(levels, cfg.n_levels)
    squeeze = levels.ndim == 1
    if squeeze:
        levels = levels[None, :]
    if levels.shape[1] != cfg.n_features:
        raise ValueError(f"expected {cfg.n_features} feature levels per sample")
    p = net.params
    sweep = _value_sweep(net, frozen=frozen_bn)
    a = sweep["a"]
    codes = sign_positive(a) if binary else np.clip(a, -1.0, 1.0)
    feat = sign_positive(p["feature_weights"]) if binary else np.clip(p["feature_weights"], -1.0, 1.0)
    pre, gathered_d = _binding_sums(codes, feat, levels)
    scaled = pre / cfg.n_features
    sample = sign_positive(scaled) if binary else np.clip(scaled, -1.0, 1.0)
    cls = sign_positive(p["class_weights"]) if binary else np.clip(p["class_weights"], -1.0, 1.0)
    logits = sample @ cls
    cache = {
        "levels": levels,
        "sweep": sweep,
        "codes": codes,
        "feat": feat,
        "gathered_d": gathered_d,
        "pre_scaled": scaled,
        "sample": sample,
        "cls": cls,
        "binary": binary,
        "frozen_bn": frozen_bn,
    }
    return (logits[0] if squeeze else logits), cache


def backward(net: LdcNetwork, cache: dict, dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of all float parameters given d(loss)/d(logits).

    With a surrogate-mode cache this is the exact gradient; with a
    binary-mode cache it is the straight-through estimate (same masks,
    binarized forward values).
    """
    if cache["frozen_bn"]:
        raise ValueError("backward requires sweep (training-mode) batch-norm")
    cfg = net.config
    p = net.params
    if dlogits.ndim == 1:
        dlogits = dlogits[None, :]
    batch = dlogits.shape[0]
    n_feat, dv, df = cfg.n_features, cfg.dim_value, cfg.dim_feature

    sample, cls = cache["sample"], cache["cls"]
    d_cls = sample.reshape(batch, df).T @ dlogits
    d_class_weights = d_cls * (np.abs(p["class_weights"]) <= 1.0)

    d_sample = dlogits @ cls.T
    d_pre = d_sample * (np.abs(cache["pre_scaled"]) <= 1.0) / n_feat

    d_pre_d = np.ascontiguousarray(d_pre.reshape(batch, df // dv, dv).transpose(2, 0, 1))
    gathered_d = cache["gathered_d"]               # (dv, B, N)
    d_blocks = gathered_d.transpose(0, 2, 1) @ d_pre_d            # (dv, N, n)
    d_feat = d_blocks.transpose(1, 2, 0).reshape(n_feat, df)
    d_feature_weights = d_feat * (np.abs(p["feature_weights"]) <= 1.0)

    blocks = np.ascontiguousarray(
        cache["feat"].reshape(n_feat, df // dv, dv).transpose(2, 0, 1)
    )
    d_gathered = (d_pre_d @ blocks.transpose(0, 2, 1)).transpose(1, 2, 0)  # (B, N, dv)

    levels_flat = cache["levels"].ravel()
    d_flat = d_gathered.reshape(-1, dv)
    d_codes = np.empty((cfg.n_levels, dv))
    for d in range(dv):
        d_codes[:, d] = np.bincount(levels_flat, weights=d_flat[:, d], minlength=cfg.n_levels)

    sweep = cache["sweep"]
    a, zhat, std, h, x = sweep["a"], sweep["zhat"], sweep["std"], sweep["h"], sweep["x"]
    d_a = d_codes * (np.abs(a) <= 1.0)
    d_zbn = d_a * (1.0 - a * a)
    d_gamma = (d_zbn * zhat).sum(axis=0)
    d_beta = d_zbn.sum(axis=0)
    d_zhat = d_zbn * p["bn_gamma"]
    # batch-norm backward with batch statistics (biased variance)
    d_z = (d_zhat - d_zhat.mean(axis=0) - zhat * (d_zhat * zhat).mean(axis=0)) / std
    d_w2 = h.T @ d_z
    d_b2 = d_z.sum(axis=0)
    d_h = d_z @ p["value_w2"].T
    d_hpre = d_h * (1.0 - h * h)
    d_w1 = x.T @ d_hpre
    d_b1 = d_hpre.sum(axis=0)

    return {
        "value_w1": d_w1,
        "value_b1": d_b1,
        "value_w2": d_w2,
        "value_b2": d_b2,
        "bn_gamma": d_gamma,
        "bn_beta": d_beta,
        "feature_weights": d_feature_weights,
        "class_weights": d_class_weights,
    }


def network_forward(net: LdcNetwork, levels) -> np.ndarray:
    """Inference-mode logits (binarized weights and activations)."""
    frozen = net.bn_mean is not None
    logits, _ = forward(net, levels, binary=True, frozen_bn=frozen)
    return logits


def valuebox_forward(net: LdcNetwork, level: int, mode: str = "eval"):
    """Value code for one quantized level.

    mode="train" returns (pre-binarization activations, their signs);
    mode="eval" returns the packed sign vector.
    """
    if not 0 <= level < net.config.n_levels:
        raise ValueError(f"level {level} outside [0, {net.config.n_levels - 1}]")
    frozen = mode == "eval" and net.bn_mean is not None
    sweep = _value_sweep(net, frozen=frozen)
    act = sweep["a"][level]
    signs = sign_positive(act)
    if mode == "train":
        return act, signs
    if mode == "eval":
        return BipolarVector.from_signs(signs.astype(np.int8))
    raise ValueError(f"unknown mode {mode!r}")


@dataclass
class LdcBinaryModel:
    """Extracted fully binary classifier: value/feature item memory plus
    class vectors, all bit-packed."""

    config: LdcConfig
    item_memory: ItemMemory
    class_words: np.ndarray

    def __post_init__(self):
        self.class_words = np.ascontiguousarray(
            np.atleast_2d(self.class_words), dtype=np.uint64
        )
        im = self.item_memory
        if im.value_dim != self.config.dim_value or im.feature_dim != self.config.dim_feature:
            raise ValueError("item memory dims disagree with the config")
        # value codes tiled to the feature width, for XOR binding
        tiled_signs = np.tile(im.value_signs, self.config.n_stack)
        self._tiled_value_words = bitvec.pack_signs(tiled_signs)
        self._class_signs = bitvec.unpack_signs(
            self.class_words, self.config.dim_feature, dtype=np.float64
        )

    @property
    def kind(self) -> str:
        return "ldc"

    @property
    def n_classes(self) -> int:
        return self.class_words.shape[0]

    @property
    def value_table(self) -> list[BipolarVector]:
        return self.item_memory.value_vectors

    @property
    def feature_vectors(self) -> list[BipolarVector]:
        return self.item_memory.feature_vectors

    @property
    def class_vectors(self) -> list[BipolarVector]:
        return [
            BipolarVector(self.config.dim_feature, row) for row in self.class_words
        ]

    def replace_class_words(self, class_words: np.ndarray) -> "LdcBinaryModel":
        return LdcBinaryModel(self.config, self.item_memory, class_words)

    def predict_batch(self, levels_matrix, chunk: int = 2048) -> np.ndarray:
        """Vectorized inference; bit-exact twin of predict_binary."""
        cfg = self.config
        levels_matrix = _check_level_range(levels_matrix, cfg.n_levels)
        if levels_matrix.ndim != 2 or levels_matrix.shape[1] != cfg.n_features:
            raise ValueError(f"expected (samples, {cfg.n_features}) feature levels")
        codes = self.item_memory.value_signs.astype(np.float64)
        feat = self.item_memory.feature_signs.astype(np.float64)
        out = np.empty(levels_matrix.shape[0], dtype=np.int64)
        for lo in range(0, levels_matrix.shape[0], chunk):
            hi = min(lo + chunk, levels_matrix.shape[0])
            sums, _ = _binding_sums(codes, feat, levels_matrix[lo:hi])
            sample = sign_positive(sums)
            logits = sample @ self._class_signs.T
            out[lo:hi] = np.argmax(logits, axis=1)
        return out


def extract(net: LdcNetwork) -> LdcBinaryModel:
    """Read the binary classifier out of a trained network.

    Freezes batch-norm, sweeps the value net over all levels, takes signs
    of the binding and class weights, and packs everything into bits. The
    float weights play no further role.
    """
    cfg = net.config
    net.freeze_batchnorm()
    sweep = _value_sweep(net, frozen=True)
    value_words = bitvec.pack_signs(sign_positive(sweep["a"]))
    feature_words = bitvec.pack_signs(sign_positive(net.params["feature_weights"]))
    class_signs = sign_positive(net.params["class_weights"]).T  # (K, df)
    class_words = bitvec.pack_signs(class_signs)
    im = ItemMemory(value_words, cfg.dim_value, feature_words, cfg.dim_feature)
    return LdcBinaryModel(config=cfg, item_memory=im, class_words=class_words)


def encode_ldc(model: LdcBinaryModel, levels) -> BipolarVector:
    """Encode one sample on the packed path: XOR each feature vector with
    its tiled value code, then majority-binarize the stack."""
    cfg = model.config
    levels = _check_level_range(levels, cfg.n_levels)
    if levels.shape != (cfg.n_features,):
        raise ValueError(f"expected {cfg.n_features} feature levels")
    bound = model._tiled_value_words[levels] ^ model.item_memory.feature_words
    neg_counts = bitvec.unpack_bit_matrix(bound, cfg.dim_feature).sum(axis=0, dtype=np.int64)
    # sum over N bindings is N - 2*neg; negative exactly when 2*neg > N
    return BipolarVector.from_bits(2 * neg_counts > cfg.n_features)


def predict_binary(model: LdcBinaryModel, levels) -> int:
    """Classify one sample with XOR/popcount only; nearest class vector by
    Hamming distance, ties to the lowest index."""
    query = encode_ldc(model, levels)
    dists = bitvec.hamming_matrix(query.words[None, :], model.class_words)[0]
    return int(np.argmin(dists))
