"""Mini-batch SGD training with hard, uniformly smoothed, or online soft targets.

Epoch ``t`` builds targets from the soft-label matrix published at the end of
epoch ``t - 1`` (uniform before the first epoch). While training, each
correctly classified sample's predicted distribution goes into a fresh
accumulator; at epoch end the accumulator is normalized into the next matrix.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from olslab import calibration, labeling, model
from olslab.labeling import OLS, EpochAccumulator
from olslab.ndkernel import ShapeError, softmax_rows
from olslab.objective import batch_objective

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    strategy: object = field(default_factory=OLS)
    epochs: int = 30
    batch_size: int = 64
    lr0: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 1e-4
    lr_decay_epochs: tuple = ()
    lr_decay_factor: float = 0.1
    seed: int = 0
    layer_sizes: tuple = ()  # empty -> (D, 64, 32, K) from the data
    bins: int = calibration.DEFAULT_BINS

    def __post_init__(self):
        object.__setattr__(self, "lr_decay_epochs", tuple(int(e) for e in self.lr_decay_epochs))
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        if self.epochs < 1:
            raise ValueError(f"epochs must be positive, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")
        if not self.lr0 > 0:
            raise ValueError(f"lr0 must be positive, got {self.lr0}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be nonnegative, got {self.weight_decay}")
        if not 0.0 < self.lr_decay_factor < 1.0:
            raise ValueError(f"lr_decay_factor must be in (0, 1), got {self.lr_decay_factor}")
        eps = self.lr_decay_epochs
        if any(b <= a for a, b in zip(eps, eps[1:])) or any(e < 0 or e >= self.epochs for e in eps):
            raise ValueError(f"lr_decay_epochs must be strictly increasing and within [0, {self.epochs})")
        if self.bins < 1:
            raise ValueError(f"bins must be positive, got {self.bins}")

    def resolved_layer_sizes(self, d, k):
        sizes = self.layer_sizes or (d, 64, 32, k)
        if sizes[0] != d or sizes[-1] != k:
            raise ShapeError(f"layer_sizes {sizes} incompatible with D={d}, K={k}")
        return sizes


@dataclass
class OptimizerState:
    velocity: list

    @classmethod
    def zeros_like(cls, params):
        return cls([np.zeros_like(a) for a in params.arrays()])


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    lr: float
    loss_hard: float
    loss_soft: float
    loss_total: float
    train_top1_err: float
    val_top1_err: float
    val_ece: float
    val_avg_conf: float
    n_accumulated: int


EPOCH_LOG_FIELDS = [f for f in EpochLog.__dataclass_fields__]


@dataclass
class BatchEvent:
    """Passed to the ``on_batch`` hook after each optimizer step."""

    epoch: int
    batch: int
    loss: object
    soft_labels: object
    accumulator: object


@dataclass
class TrainResult:
    params: model.MlpParams
    logs: list
    matrices: list

    @property
    def best_val_epoch(self):
        return best_val_epoch(self.logs)


def best_val_epoch(logs):
    return min(logs, key=lambda e: (e.val_top1_err, e.epoch)).epoch


def lr_at(config, epoch):
    if not 0 <= epoch < config.epochs:
        raise ValueError(f"epoch {epoch} outside [0, {config.epochs})")
    n_decays = sum(1 for e in config.lr_decay_epochs if e <= epoch)
    return config.lr0 * config.lr_decay_factor**n_decays


def sgd_step(params, grads, state, lr, momentum, weight_decay):
    """Coupled-L2 momentum SGD, applied in place; returns ``(params, state)``."""
    p_arrays, g_arrays = params.arrays(), grads.arrays()
    if len(p_arrays) != len(g_arrays) or len(p_arrays) != len(state.velocity):
        raise ShapeError("parameter, gradient and velocity lists differ in length")
    for w, g, v in zip(p_arrays, g_arrays, state.velocity):
        if w.shape != g.shape or w.shape != v.shape:
            raise ShapeError(f"shape mismatch: param {w.shape}, grad {g.shape}, velocity {v.shape}")
        v *= momentum
        v += g + weight_decay * w
        w -= lr * v
    return params, state


def evaluate(params, ds, bins=calibration.DEFAULT_BINS):
    if ds.n == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    probs = model.predict_proba(params, ds.features)
    return calibration.full_report(calibration.PredictionBatch(probs, ds.labels), bins)


def _check_inputs(config, train_ds, val_ds):
    if train_ds.d != val_ds.d or train_ds.k != val_ds.k:
        raise ShapeError(
            f"train (D={train_ds.d}, K={train_ds.k}) and val (D={val_ds.d}, K={val_ds.k}) disagree"
        )
    return config.resolved_layer_sizes(train_ds.d, train_ds.k)


def train(config, train_ds, val_ds, on_batch=None, freeze_soft_labels=False):
    """Train a fresh model; return a :class:`TrainResult`.

    ``freeze_soft_labels`` keeps the OLS matrix at its uniform start (the
    history is still recorded). ``on_batch`` receives a :class:`BatchEvent`
    after every step.
    """
    sizes = _check_inputs(config, train_ds, val_ds)
    k = train_ds.k
    rng = np.random.default_rng(config.seed)
    params = model.init_params(sizes, int(rng.integers(2**63)))
    state = OptimizerState.zeros_like(params)
    online = isinstance(config.strategy, OLS)
    s_prev = labeling.init_uniform(k)
    logs, matrices = [], []

    for epoch in range(config.epochs):
        lr = lr_at(config, epoch)
        alpha, soft_rows = labeling.mixing(config.strategy, s_prev, k)
        acc = EpochAccumulator(k) if online else None
        order = rng.permutation(train_ds.n)
        sums = np.zeros(3)
        n_wrong = 0
        n_acc = 0
        for b, start in enumerate(range(0, train_ds.n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            x, y = train_ds.features[idx], train_ds.labels[idx]
            cache = model.forward(params, x)
            probs = softmax_rows(cache.logits)
            loss, dlogits = batch_objective(probs, y, soft_rows, alpha)
            n_wrong += int(np.sum(np.argmax(probs, axis=1) != y))
            if online:
                n_acc += acc.accumulate_batch(y, probs)
            grads = model.backward(params, cache, dlogits)
            sgd_step(params, grads, state, lr, config.momentum, config.weight_decay)
            sums += len(idx) * np.array([loss.l_hard, loss.l_soft, loss.l_total])
            if on_batch is not None:
                on_batch(BatchEvent(epoch, b, loss, s_prev, acc))
        if online:
            if not freeze_soft_labels:
                s_prev = labeling.normalize(acc)
            matrices.append(s_prev)
        val = evaluate(params, val_ds, config.bins)
        mean = sums / train_ds.n
        entry = EpochLog(
            epoch=epoch,
            lr=lr,
            loss_hard=float(mean[0]),
            loss_soft=float(mean[1]),
            loss_total=float(mean[2]),
            train_top1_err=n_wrong / train_ds.n,
            val_top1_err=val.top1_err,
            val_ece=val.ece,
            val_avg_conf=val.avg_conf,
            n_accumulated=n_acc,
        )
        logs.append(entry)
        log.debug("epoch %d: loss %.4f val err %.4f ece %.4f", epoch, entry.loss_total, val.top1_err, val.ece)
    return TrainResult(params, logs, matrices)
