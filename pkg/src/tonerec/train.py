"""Adam + global-norm clipping, dev-loss learning-rate halving, SortaGrad ordering."""

from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .ctc import ctc_loss

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 20
    lr0: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 5.0
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.lr0 <= 0 or self.clip_norm <= 0:
            raise ValueError("lr0 and clip_norm must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


class TrainingDiverged(RuntimeError):
    def __init__(self, message, log_records=()):
        super().__init__(message)
        self.log = list(log_records)


@dataclass
class OptimizerState:
    m: OrderedDict
    v: OrderedDict
    t: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls(OrderedDict((n, np.zeros_like(p)) for n, p in params.items()),
                   OrderedDict((n, np.zeros_like(p)) for n, p in params.items()))


def adam_step(params, grads, state: OptimizerState, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Bias-corrected Adam update, applied to ``params`` in place."""
    for g in grads.values():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("diverged")
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for name, p in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= (lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(p.dtype, copy=False)
    return params, state


def global_norm(grads) -> float:
    return float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64)))
                             for g in grads.values())))


def clip_gradients(grads, clip_norm):
    """Scale every gradient by ``clip_norm / norm`` when the global L2 norm exceeds it."""
    if clip_norm <= 0:
        raise ValueError("clip_norm must be positive")
    norm = global_norm(grads)
    if norm > clip_norm:
        scale = clip_norm / norm
        grads = OrderedDict((n, g * g.dtype.type(scale)) for n, g in grads.items())
    return grads, norm


def sortagrad_order(lengths, epoch: int, seed: int = 0) -> np.ndarray:
    """Epoch 1: ascending length (stable). Later epochs: a shuffle fixed by ``(seed, epoch)``."""
    if epoch < 1:
        raise ValueError("epochs are numbered from 1")
    lengths = np.asarray(lengths)
    if epoch == 1:
        return np.argsort(lengths, kind="stable")
    return np.random.default_rng([seed, epoch]).permutation(len(lengths))


class LearningRateHalver:
    """Halve the rate whenever an epoch's dev loss exceeds the previous epoch's."""

    def __init__(self, lr0):
        self.lr = lr0
        self.prev = None
        self.halvings = 0

    def update(self, dev_loss) -> float:
        if self.prev is not None and dev_loss > self.prev:
            self.lr /= 2.0
            self.halvings += 1
        self.prev = dev_loss
        return self.lr


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_loss: float
    lr: float

    def line(self) -> str:
        return (f"epoch={self.epoch} train_loss={self.train_loss:.6f} "
                f"dev_loss={self.dev_loss:.6f} lr={self.lr:.10g}")


@dataclass
class FitResult:
    log: list = field(default_factory=list)
    orders: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)

    @property
    def best_epoch(self) -> int:
        losses = [r.dev_loss for r in self.log]
        return int(np.argmin(losses)) + 1

    @property
    def best_checkpoint(self):
        return self.checkpoints[self.best_epoch - 1]


def batch_loss_and_grads(model, batch, train, rng):
    """Mean CTC loss over ``batch`` of ``(features, tones)`` and the matching parameter grads."""
    logits, cache = model.forward([f for f, _ in batch], train=train, rng=rng)
    losses, dlogits = [], []
    for out, (_, tones) in zip(logits, batch):
        res = ctc_loss(out, tones)
        losses.append(res.loss)
        dlogits.append(res.logit_grads / len(batch))
    return float(np.mean(losses)), model.backward(cache, dlogits), losses


def mean_loss(model, dataset, batch_size=16) -> float:
    """Eval-mode mean CTC loss per utterance."""
    total = 0.0
    for start in range(0, len(dataset), batch_size):
        chunk = dataset[start:start + batch_size]
        logits, _ = model.forward([f for f, _ in chunk])
        total += sum(ctc_loss(out, tones).loss for out, (_, tones) in zip(logits, chunk))
    return total / len(dataset)


def fit(model, train_set, dev_set, cfg: TrainConfig, evaluate_dev=None, on_epoch_end=None):
    """Train ``model`` in place.

    ``train_set`` and ``dev_set`` are sequences of ``(features, tones)`` with
    features shaped ``(bins, frames)``. ``evaluate_dev(model, epoch)`` may
    replace the default mean dev CTC loss; ``on_epoch_end(record, params,
    order)`` runs after each epoch (used to write checkpoints and logs).
    """
    if not train_set or not dev_set:
        raise ValueError("training and dev sets must be nonempty")
    lengths = [f.shape[1] for f, _ in train_set]
    state = OptimizerState.zeros_like(model.params)
    schedule = LearningRateHalver(cfg.lr0)
    result = FitResult()
    for epoch in range(1, cfg.epochs + 1):
        order = sortagrad_order(lengths, epoch, cfg.seed)
        result.orders.append(order)
        lr = schedule.lr
        utt_losses = []
        for b, start in enumerate(range(0, len(order), cfg.batch_size)):
            batch = [train_set[i] for i in order[start:start + cfg.batch_size]]
            rng = np.random.default_rng([cfg.seed, epoch, b])
            loss, grads, losses = batch_loss_and_grads(model, batch, True, rng)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss in epoch {epoch}, batch {b}", result.log)
            grads, _ = clip_gradients(grads, cfg.clip_norm)
            try:
                adam_step(model.params, grads, state, lr, cfg.beta1, cfg.beta2, cfg.eps)
            except FloatingPointError:
                raise TrainingDiverged(f"non-finite gradient in epoch {epoch}, batch {b}",
                                       result.log) from None
            utt_losses.extend(losses)
        dev_loss = (evaluate_dev(model, epoch) if evaluate_dev is not None
                    else mean_loss(model, dev_set, cfg.batch_size))
        if not np.isfinite(dev_loss):
            raise TrainingDiverged(f"non-finite dev loss in epoch {epoch}", result.log)
        record = EpochRecord(epoch, float(np.mean(utt_losses)), float(dev_loss),
                             schedule.update(dev_loss))
        result.log.append(record)
        snapshot = OrderedDict((n, p.copy()) for n, p in model.params.items())
        result.checkpoints.append(snapshot)
        log.info(record.line())
        if on_epoch_end is not None:
            on_epoch_end(record, snapshot, order)
    return result
