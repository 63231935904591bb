"""Gradient training for the classifier network.

Straight-through sign estimators, softmax cross-entropy, hand-rolled
Adam with decoupled weight decay, and stepwise or linear learning-rate
decay. Everything is float64 and runs off a single seeded generator, so
two fits with the same config produce bit-identical parameters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .network import LdcNetwork, backward, forward, sign_positive

_TRAIN_STREAM = 0x7EA1

SCHEDULES = ("halve-every-5", "linear-decay")


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    weight_decay: float = 0.0
    batch_size: int = 64
    epochs: int = 50
    schedule: str = "halve-every-5"
    seed: int = 0
    val_fraction: float = 0.1

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("lr must be non-negative")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")
        if not 0 <= self.val_fraction < 1:
            raise ValueError("val_fraction must be in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")


def schedule_lr(cfg: TrainConfig, epoch: int) -> float:
    if cfg.schedule == "halve-every-5":
        return cfg.lr * 0.5 ** (epoch // 5)
    return cfg.lr * (1.0 - epoch / cfg.epochs)


def ste_sign(x):
    """Sign forward (sign(0) = +1) with the clipped-identity backward rule.

    Returns (signs, backward) where backward passes upstream gradient
    where |x| <= 1 and zeroes it elsewhere.
    """
    x = np.asarray(x, dtype=np.float64)
    mask = np.abs(x) <= 1.0

    def backward_rule(grad):
        return np.asarray(grad, dtype=np.float64) * mask

    return sign_positive(x), backward_rule


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def loss_ce(logits, label: int) -> float:
    """Cross-entropy of one sample, computed with max subtraction."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape[-1] < 2:
        raise ValueError("need at least two classes")
    return float(-log_softmax(logits)[..., label])


def loss_ce_batch(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over a batch plus its logit gradient."""
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64).ravel()
    batch = logits.shape[0]
    lsm = log_softmax(logits)
    loss = float(-lsm[np.arange(batch), labels].mean())
    dlogits = np.exp(lsm)
    dlogits[np.arange(batch), labels] -= 1.0
    return loss, dlogits / batch


class AdamW:
    """Adam with decoupled weight decay.

    Decay is skipped for parameters named in ``decay_exempt`` (the
    batch-norm scale/shift); with weight_decay = 0 this is plain Adam.
    """

    beta1 = 0.9
    beta2 = 0.999
    eps = 1e-8

    def __init__(self, params: dict[str, np.ndarray], decay_exempt=("bn_gamma", "bn_beta")):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0
        self.decay_exempt = frozenset(decay_exempt)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
             lr: float, weight_decay: float) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name in sorted(params):
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if weight_decay and name not in self.decay_exempt:
                update = update + weight_decay * params[name]
            params[name] -= lr * update


@dataclass
class FitResult:
    metrics: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_accuracy: float = 0.0


def _eval_split(net: LdcNetwork, levels, labels, chunk: int = 4096):
    """Binary-forward loss/accuracy on a held-out split."""
    losses, correct = [], 0
    for lo in range(0, levels.shape[0], chunk):
        hi = min(lo + chunk, levels.shape[0])
        logits, _ = forward(net, levels[lo:hi], binary=True)
        loss, _ = loss_ce_batch(logits, labels[lo:hi])
        losses.append(loss * (hi - lo))
        correct += int((np.argmax(logits, axis=1) == labels[lo:hi]).sum())
    n = levels.shape[0]
    return sum(losses) / n, correct / n


def fit(net: LdcNetwork, data, cfg: TrainConfig, log_path=None, echo: bool = False) -> FitResult:
    """Mini-batch training with per-epoch seeded shuffles.

    Keeps the parameter snapshot with the best held-out accuracy and
    restores it at the end. Emits one JSON record per (epoch, split).
    """
    rng = np.random.default_rng([_TRAIN_STREAM, cfg.seed])
    levels = np.asarray(data.levels, dtype=np.int64)
    labels = np.asarray(data.labels, dtype=np.int64)
    n = levels.shape[0]
    n_val = int(round(cfg.val_fraction * n))
    split_perm = rng.permutation(n)
    val_idx, train_idx = split_perm[:n_val], split_perm[n_val:]
    if train_idx.size == 0:
        raise ValueError("validation split leaves no training samples")

    optimizer = AdamW(net.params)
    result = FitResult()
    best_params = net.copy_params()
    log_file = open(log_path, "w") if log_path else None

    def emit(record):
        result.metrics.append(record)
        line = json.dumps(record)
        if log_file:
            log_file.write(line + "\n")
        if echo:
            print(line)

    try:
        for epoch in range(cfg.epochs):
            lr = schedule_lr(cfg, epoch)
            order = train_idx[rng.permutation(train_idx.size)]
            loss_sum, correct = 0.0, 0
            for lo in range(0, order.size, cfg.batch_size):
                idx = order[lo : lo + cfg.batch_size]
                logits, cache = forward(net, levels[idx], binary=True)
                loss, dlogits = loss_ce_batch(logits, labels[idx])
                if not np.isfinite(loss):
                    raise TrainingDivergedError(
                        f"non-finite loss at epoch {epoch}, batch {lo // cfg.batch_size}"
                    )
                correct += int((np.argmax(logits, axis=1) == labels[idx]).sum())
                loss_sum += loss * idx.size
                grads = backward(net, cache, dlogits)
                optimizer.step(net.params, grads, lr, cfg.weight_decay)
            emit({
                "epoch": epoch, "split": "train", "loss": loss_sum / order.size,
                "accuracy": correct / order.size, "lr": lr,
            })
            if val_idx.size:
                val_loss, val_acc = _eval_split(net, levels[val_idx], labels[val_idx])
            else:
                val_loss, val_acc = loss_sum / order.size, correct / order.size
            emit({"epoch": epoch, "split": "val", "loss": val_loss, "accuracy": val_acc})
            if val_acc > result.best_val_accuracy or result.best_epoch < 0:
                result.best_val_accuracy = val_acc
                result.best_epoch = epoch
                best_params = net.copy_params()
    finally:
        if log_file:
            log_file.close()
    net.load_params(best_params)
    return result


def surrogate_loss(net: LdcNetwork, levels, labels) -> float:
    """Loss of the clipped-identity surrogate network (no sign anywhere)."""
    logits, _ = forward(net, levels, binary=False)
    loss, _ = loss_ce_batch(logits, labels)
    return loss


def surrogate_grads(net: LdcNetwork, levels, labels):
    """Analytic gradients of :func:`surrogate_loss` for every parameter."""
    logits, cache = forward(net, levels, binary=False)
    loss, dlogits = loss_ce_batch(logits, labels)
    return loss, backward(net, cache, dlogits)


def finite_difference_grads(net: LdcNetwork, levels, labels, step: float = 1e-6):
    """Central finite differences of the surrogate loss, per parameter."""
    grads = {}
    for name, arr in net.params.items():
        g = np.zeros_like(arr)
        flat = arr.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = surrogate_loss(net, levels, labels)
            flat[i] = orig - step
            down = surrogate_loss(net, levels, labels)
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * step)
        grads[name] = g
    return grads
