"""Training-target strategies: hard labels, uniform smoothing, online smoothing.

The online strategy keeps a ``K x K`` soft-label matrix whose row ``j`` is the
target distribution used for samples of true class ``j``. During an epoch the
predicted distributions of correctly classified samples are summed per true
class in an :class:`EpochAccumulator`; at epoch end the sums are normalized
row-wise into the matrix used for the next epoch.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class SoftLabelMatrix:
    rows: np.ndarray

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] != rows.shape[1] or rows.shape[0] < 2:
            raise ValueError(f"soft-label matrix must be K x K with K >= 2, got {rows.shape}")
        if np.any(rows < 0.0) or np.any(rows > 1.0):
            raise ValueError("soft-label entries must lie in [0, 1]")
        if np.any(np.abs(rows.sum(axis=1) - 1.0) > ROW_SUM_TOL):
            raise ValueError("soft-label rows must sum to 1")
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)

    @property
    def k(self):
        return self.rows.shape[0]

    def row(self, y):
        return self.rows[y]


def init_uniform(k):
    if k < 2:
        raise ValueError(f"need at least 2 classes, got {k}")
    return SoftLabelMatrix(np.full((k, k), 1.0 / k))


class EpochAccumulator:
    """Per-class sums of predicted distributions on correctly classified samples."""

    def __init__(self, k):
        if k < 2:
            raise ValueError(f"need at least 2 classes, got {k}")
        self.k = k
        self.sums = np.zeros((k, k))
        self.correct_counts = np.zeros(k, dtype=np.int64)

    def accumulate(self, y, p):
        p = np.asarray(p, dtype=np.float64)
        if p.shape != (self.k,):
            raise ValueError(f"probability vector must have length {self.k}, got {p.shape}")
        if not 0 <= y < self.k:
            raise ValueError(f"class index {y} out of range for {self.k} classes")
        if abs(p.sum() - 1.0) > ROW_SUM_TOL:
            raise ValueError(f"probability vector sums to {p.sum()!r}, not 1")
        pred = int(np.argmax(p))
        if pred != y:
            raise ValueError(f"sample of class {y} is not correctly classified (argmax {pred})")
        self.sums[y] += p
        self.correct_counts[y] += 1
        return self

    def accumulate_batch(self, labels, probs):
        """Add every row of ``probs`` whose argmax equals its label; return how many."""
        labels = np.asarray(labels)
        probs = np.asarray(probs, dtype=np.float64)
        correct = np.argmax(probs, axis=1) == labels
        for y, p in zip(labels[correct], probs[correct]):
            self.sums[y] += p
            self.correct_counts[y] += 1
        return int(correct.sum())

    def merge(self, other):
        if other.k != self.k:
            raise ValueError(f"cannot merge accumulators for {self.k} and {other.k} classes")
        self.sums += other.sums
        self.correct_counts += other.correct_counts
        return self


def normalize(acc):
    """Row-normalize the accumulated sums; rows with no correct samples become uniform."""
    rows = np.full((acc.k, acc.k), 1.0 / acc.k)
    for j in range(acc.k):
        if acc.correct_counts[j] > 0:
            rows[j] = acc.sums[j] / acc.sums[j].sum()
    return SoftLabelMatrix(rows)


@dataclass(frozen=True)
class Hard:
    name = "hard"

    def label(self):
        return "hard"


@dataclass(frozen=True)
class UniformLS:
    epsilon: float = 0.1
    name = "ls"

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")

    def label(self):
        return f"ls({self.epsilon:g})"


@dataclass(frozen=True)
class OLS:
    alpha: float = 0.5
    name = "ols"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")

    def label(self):
        return f"ols({self.alpha:g})"


def parse_strategy(text, alpha=0.5, epsilon=0.1):
    """Parse ``hard``, ``ls``, ``ols``, optionally with a coefficient: ``ls:0.2``, ``ols:0.3``."""
    name, _, value = text.strip().lower().partition(":")
    if name == "hard":
        if value:
            raise ValueError("the hard strategy takes no coefficient")
        return Hard()
    if name == "ls":
        return UniformLS(float(value) if value else epsilon)
    if name == "ols":
        return OLS(float(value) if value else alpha)
    raise ValueError(f"unknown strategy {text!r}; expected hard, ls or ols")


def mixing(strategy, s_prev, k):
    """Express a strategy as ``(alpha, soft_rows)``.

    The per-sample target is ``alpha * one_hot(y) + (1 - alpha) * soft_rows[y]``
    and the loss splits into ``alpha * L_hard + (1 - alpha) * L_soft`` with
    ``L_soft`` taken against ``soft_rows[y]``.
    """
    if isinstance(strategy, Hard):
        return 1.0, np.eye(k)
    if isinstance(strategy, UniformLS):
        return 1.0 - strategy.epsilon, np.full((k, k), 1.0 / k)
    if isinstance(strategy, OLS):
        if s_prev is None or s_prev.k != k:
            raise ValueError(f"OLS needs a previous soft-label matrix with {k} classes")
        return strategy.alpha, s_prev.rows
    raise TypeError(f"unknown strategy {strategy!r}")


def effective_target(strategy, s_prev, y, k):
    if not 0 <= y < k:
        raise ValueError(f"class index {y} out of range for {k} classes")
    alpha, soft = mixing(strategy, s_prev, k)
    one_hot = np.zeros(k)
    one_hot[y] = 1.0
    return alpha * one_hot + (1.0 - alpha) * soft[y]


def write_matrix_csv(matrix, path, epoch):
    """CSV with an ``# epoch=<t>`` line, a header of class indices, then K rows."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# epoch={epoch}\n")
        w = csv.writer(fh)
        w.writerow(range(matrix.k))
        for row in matrix.rows:
            w.writerow(repr(float(v)) for v in row)


def read_matrix_csv(path):
    """Inverse of :func:`write_matrix_csv`; returns ``(epoch, SoftLabelMatrix)``."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# epoch="):
        raise ValueError(f"{path}: missing '# epoch=' header")
    epoch = int(lines[0].split("=", 1)[1])
    rows = list(csv.reader(lines[2:]))
    return epoch, SoftLabelMatrix(np.array(rows, dtype=np.float64))
