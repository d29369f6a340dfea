"""Accuracy and calibration metrics: top-k error, ECE, average confidence.

Confidence is the maximum predicted probability. ECE uses ``b`` equal-width
bins on ``[0, 1]``; bins are right-closed, ``(lo, hi]``, with confidence 0
falling in the first bin.
"""

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from olslab.ndkernel import top_k_rows

DEFAULT_BINS = 15


@dataclass
class PredictionBatch:
    probs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.probs.ndim != 2:
            raise ValueError(f"probs must be 2-D, got shape {self.probs.shape}")
        if self.labels.shape != (self.probs.shape[0],):
            raise ValueError(f"{self.labels.shape[0]} labels for {self.probs.shape[0]} probability rows")
        if self.probs.shape[0] and np.any(np.abs(self.probs.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("probability rows must sum to 1")
        if np.any(self.labels < 0) or np.any(self.labels >= self.probs.shape[1]):
            raise ValueError(f"labels must lie in [0, {self.probs.shape[1]})")

    @property
    def n(self):
        return self.probs.shape[0]

    @property
    def k(self):
        return self.probs.shape[1]

    def confidences(self):
        return self.probs.max(axis=1)

    def correct(self):
        return top_k_rows(self.probs, 1)[:, 0] == self.labels


@dataclass
class ReliabilityBins:
    edges: np.ndarray
    counts: np.ndarray
    confidence_sums: np.ndarray
    correct_counts: np.ndarray

    @property
    def b(self):
        return len(self.counts)

    def rows(self):
        """``(bin_lo, bin_hi, count, mean_confidence, accuracy)`` per bin; means are NaN when empty."""
        out = []
        for i in range(self.b):
            c = int(self.counts[i])
            mc = self.confidence_sums[i] / c if c else float("nan")
            acc = self.correct_counts[i] / c if c else float("nan")
            out.append((float(self.edges[i]), float(self.edges[i + 1]), c, float(mc), float(acc)))
        return out


@dataclass
class CalibReport:
    top1_err: float
    top5_err: Optional[float]
    ece: float
    avg_conf: float
    bins: ReliabilityBins

    def as_dict(self):
        return {"top1_err": self.top1_err, "top5_err": self.top5_err, "ece": self.ece, "avg_conf": self.avg_conf}


def _nonempty(batch):
    if batch.n == 0:
        raise ValueError("empty prediction batch")


def bin_edges(b):
    if b < 1:
        raise ValueError(f"need at least one bin, got {b}")
    return np.arange(b + 1, dtype=np.float64) / b


def topk_error(batch, k):
    _nonempty(batch)
    if k > batch.k:
        raise ValueError(f"top-{k} error undefined for {batch.k} classes")
    hits = (top_k_rows(batch.probs, k) == batch.labels[:, None]).any(axis=1)
    return int(np.count_nonzero(~hits)) / batch.n


def reliability_bins(batch, b=DEFAULT_BINS):
    _nonempty(batch)
    edges = bin_edges(b)
    conf = batch.confidences()
    idx = np.clip(np.searchsorted(edges, conf, side="left") - 1, 0, b - 1)
    return ReliabilityBins(
        edges=edges,
        counts=np.bincount(idx, minlength=b),
        confidence_sums=np.bincount(idx, weights=conf, minlength=b),
        correct_counts=np.bincount(idx, weights=batch.correct().astype(np.float64), minlength=b),
    )


def ece_from_bins(bins):
    n = int(bins.counts.sum())
    total = 0.0
    for count, conf_sum, correct in zip(bins.counts, bins.confidence_sums, bins.correct_counts):
        if count:
            total += (count / n) * abs(correct / count - conf_sum / count)
    return float(total)


def ece(batch, b=DEFAULT_BINS):
    return ece_from_bins(reliability_bins(batch, b))


def avg_confidence(batch):
    _nonempty(batch)
    return float(batch.confidences().mean())


def full_report(batch, b=DEFAULT_BINS):
    bins = reliability_bins(batch, b)
    return CalibReport(
        top1_err=topk_error(batch, 1),
        top5_err=topk_error(batch, 5) if batch.k >= 5 else None,
        ece=ece_from_bins(bins),
        avg_conf=avg_confidence(batch),
        bins=bins,
    )


def write_bins_csv(bins, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_lo", "bin_hi", "count", "mean_confidence", "accuracy"])
        for lo, hi, c, mc, acc in bins.rows():
            w.writerow([repr(lo), repr(hi), c, repr(mc), repr(acc)])
