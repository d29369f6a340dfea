"""Dense double-precision kernel used by the model and the objective.

Matrices are plain ``numpy.ndarray`` objects of dtype float64, shape
``(rows, cols)``, C (row-major) order. Everything here is a pure function.
"""

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


def as_mat(x, name="matrix"):
    """Return ``x`` as a C-contiguous float64 2-D array, rejecting NaN/Inf."""
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeError(f"{name} must have positive dimensions, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def matmul(a, b):
    """Matrix product with a fixed reduction order.

    Each output entry is accumulated as ``((a[i,0]*b[0,j] + a[i,1]*b[1,j]) + ...)``
    left to right over the shared dimension, so results are bitwise
    reproducible and independent of BLAS threading.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.float64)
    for k in range(a.shape[1]):
        out += a[:, k : k + 1] * b[k]
    return out


def softmax_rows(logits):
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise ShapeError(f"softmax_rows expects a 2-D array, got {logits.shape}")
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def relu(x):
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def relu_mask(x):
    return (np.asarray(x, dtype=np.float64) > 0.0).astype(np.float64)


def top_k_indices(row, k):
    """Indices of the ``k`` largest entries, descending; ties go to the lower index."""
    row = np.asarray(row, dtype=np.float64).ravel()
    if k < 1 or k > row.size:
        raise ValueError(f"k={k} out of range for a row of length {row.size}")
    order = np.argsort(-row, kind="stable")
    return [int(i) for i in order[:k]]


def top_k_rows(probs, k):
    """Row-wise :func:`top_k_indices` for an ``(n, K)`` array, shape ``(n, k)``."""
    probs = np.asarray(probs, dtype=np.float64)
    if k < 1 or k > probs.shape[1]:
        raise ValueError(f"k={k} out of range for {probs.shape[1]} classes")
    return np.argsort(-probs, axis=1, kind="stable")[:, :k]
