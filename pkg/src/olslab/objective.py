"""Cross-entropy losses against hard, soft and mixed targets, plus logit gradients.

All losses are in nats. Probabilities are clamped below at ``LOG_CLAMP``
before taking logs so the losses stay finite.
"""

from dataclasses import dataclass

import numpy as np

LOG_CLAMP = 1e-12


@dataclass(frozen=True)
class LossBreakdown:
    l_hard: float
    l_soft: float
    l_total: float
    alpha: float


def _log(p):
    return np.log(np.maximum(p, LOG_CLAMP))


def _check_alpha(alpha):
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")


def loss_hard(p, y):
    p = np.asarray(p, dtype=np.float64)
    if not 0 <= y < p.size:
        raise ValueError(f"class index {y} out of range for {p.size} classes")
    return float(-_log(p[y]))


def loss_soft(p, s_row):
    p = np.asarray(p, dtype=np.float64)
    s_row = np.asarray(s_row, dtype=np.float64)
    if p.shape != s_row.shape:
        raise ValueError(f"length mismatch: p {p.shape}, target {s_row.shape}")
    return float(-np.sum(s_row * _log(p)))


def loss_combined(p, y, s_row, alpha):
    _check_alpha(alpha)
    lh = loss_hard(p, y)
    ls = loss_soft(p, s_row)
    return LossBreakdown(lh, ls, alpha * lh + (1.0 - alpha) * ls, alpha)


def mixed_target(y, s_row, alpha):
    s_row = np.asarray(s_row, dtype=np.float64)
    one_hot = np.zeros_like(s_row)
    one_hot[y] = 1.0
    return alpha * one_hot + (1.0 - alpha) * s_row


def grad_logits(p, y, s_row, alpha):
    """Gradient of the combined loss w.r.t. the logits that produced ``p``."""
    _check_alpha(alpha)
    p = np.asarray(p, dtype=np.float64)
    if not 0 <= y < p.size:
        raise ValueError(f"class index {y} out of range for {p.size} classes")
    return p - mixed_target(y, s_row, alpha)


def batch_objective(probs, labels, soft_rows, alpha):
    """Batch-mean loss breakdown and per-sample logit gradients.

    ``soft_rows`` is the ``K x K`` soft-label table; sample ``i`` uses row
    ``labels[i]``. Returns ``(LossBreakdown, dlogits)`` where ``dlogits`` has
    one row per sample (not divided by the batch size).
    """
    _check_alpha(alpha)
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    n, k = probs.shape
    logp = _log(probs)
    soft = np.asarray(soft_rows, dtype=np.float64)[labels]
    l_hard = -logp[np.arange(n), labels]
    l_soft = -np.sum(soft * logp, axis=1)
    one_hot = np.zeros((n, k))
    one_hot[np.arange(n), labels] = 1.0
    target = alpha * one_hot + (1.0 - alpha) * soft
    lh, ls = float(l_hard.mean()), float(l_soft.mean())
    return LossBreakdown(lh, ls, alpha * lh + (1.0 - alpha) * ls, alpha), probs - target
