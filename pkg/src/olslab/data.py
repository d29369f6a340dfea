"""Datasets: synthetic Gaussian clusters, CSV and IDX loaders, sampling, splits.

Features are always stored as float64 in ``[-1, 1]``.
"""

import csv
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

IDX_LABEL_MAGIC = 2049
IDX_IMAGE_MAGIC = 2051

# Distance between cluster groups, in units of the within-class spread.
GROUP_SPACING = 5.0


class ParseError(ValueError):
    pass


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    k: int
    class_names: Optional[list] = None

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        validate(self)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    def subset(self, idx):
        return Dataset(self.features[idx], self.labels[idx], self.k, self.class_names)

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.k)


def validate(ds):
    if ds.features.ndim != 2 or ds.features.shape[0] == 0:
        raise ValueError(f"features must be a non-empty 2-D array, got shape {ds.features.shape}")
    if ds.labels.shape != (ds.features.shape[0],):
        raise ValueError(f"{ds.labels.size} labels for {ds.features.shape[0]} samples")
    if ds.k < 2:
        raise ValueError(f"need at least 2 classes, got k={ds.k}")
    if not np.all(np.isfinite(ds.features)) or np.abs(ds.features).max() > 1.0:
        raise ValueError("features must be finite and within [-1, 1]")
    if ds.labels.min() < 0 or ds.labels.max() >= ds.k:
        raise ValueError(f"labels must lie in [0, {ds.k})")
    if ds.class_names is not None and len(ds.class_names) != ds.k:
        raise ValueError(f"{len(ds.class_names)} class names for {ds.k} classes")


@dataclass
class SyntheticSpec:
    k: int = 4
    d: int = 8
    n_per_class: int = 500
    cluster_spread: float = 1.0
    confusion_pairs: list = field(default_factory=lambda: [(0, 1), (2, 3)])
    seed: int = 0

    def __post_init__(self):
        self.confusion_pairs = [tuple(int(c) for c in p) for p in self.confusion_pairs]
        if self.k < 2 or self.d < 1 or self.n_per_class < 1:
            raise ValueError(f"invalid synthetic spec sizes k={self.k} d={self.d} n={self.n_per_class}")
        if not self.cluster_spread > 0:
            raise ValueError(f"cluster_spread must be positive, got {self.cluster_spread}")
        seen = set()
        for a, b in self.confusion_pairs:
            if a == b or not (0 <= a < self.k and 0 <= b < self.k):
                raise ValueError(f"invalid confusion pair ({a}, {b}) for k={self.k}")
            if a in seen or b in seen:
                raise ValueError(f"class appears in more than one confusion pair: ({a}, {b})")
            seen.update((a, b))


@dataclass
class SplitSpec:
    train_fraction: float = 0.8
    val_fraction: float = 0.1
    test_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        fr = (self.train_fraction, self.val_fraction, self.test_fraction)
        if any(f <= 0 for f in fr) or abs(sum(fr) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must be positive and sum to 1, got {fr}")


def class_centers(spec):
    """Cluster centers before rotation.

    Each confusion pair and each unpaired class forms a group. Groups sit on
    axis 0 spaced ``GROUP_SPACING * spread`` apart; the two members of a pair
    are offset by ``spread / 2`` either side of the group anchor along axis 1
    (axis 0 when ``d == 1``), so paired centers are exactly ``spread`` apart.
    """
    s = spec.cluster_spread
    paired = {c for p in spec.confusion_pairs for c in p}
    groups = [list(p) for p in spec.confusion_pairs] + [[c] for c in range(spec.k) if c not in paired]
    groups.sort(key=min)
    centers = np.zeros((spec.k, spec.d))
    offset_axis = 1 if spec.d > 1 else 0
    spacing = GROUP_SPACING * s if spec.d > 1 else (GROUP_SPACING + 1.0) * s
    for g, members in enumerate(groups):
        anchor = np.zeros(spec.d)
        anchor[0] = g * spacing
        if len(members) == 1:
            centers[members[0]] = anchor
        else:
            a, b = members
            centers[a] = anchor
            centers[b] = anchor
            centers[a, offset_axis] -= s / 2
            centers[b, offset_axis] += s / 2
    return centers


def gen_synthetic(spec):
    rng = np.random.default_rng(spec.seed)
    centers = class_centers(spec)
    if spec.d > 1:
        q, r = np.linalg.qr(rng.standard_normal((spec.d, spec.d)))
        rotation = q * np.sign(np.diag(r))
        centers = centers @ rotation
    raw = np.concatenate(
        [c + spec.cluster_spread * rng.standard_normal((spec.n_per_class, spec.d)) for c in centers]
    )
    labels = np.repeat(np.arange(spec.k), spec.n_per_class)
    lo, hi = raw.min(axis=0), raw.max(axis=0)
    feats = np.clip(2.0 * (raw - lo) / (hi - lo) - 1.0, -1.0, 1.0)
    return Dataset(feats, labels, spec.k)


def normalize_minus1_1(raw, lo, hi):
    if not hi > lo:
        raise ValueError(f"need hi > lo, got lo={lo} hi={hi}")
    raw = np.asarray(raw, dtype=np.float64)
    if raw.size and (raw.min() < lo or raw.max() > hi):
        raise ValueError(f"values outside [{lo}, {hi}]")
    return 2.0 * (raw - lo) / (hi - lo) - 1.0


def denormalize_minus1_1(x, lo, hi):
    return (np.asarray(x, dtype=np.float64) + 1.0) * (hi - lo) / 2.0 + lo


def balanced_sample(ds, n_per_class, seed):
    rng = np.random.default_rng(seed)
    picked = []
    for c in range(ds.k):
        idx = np.flatnonzero(ds.labels == c)
        if idx.size < n_per_class:
            raise ValueError(f"class {c} has {idx.size} samples, need {n_per_class}")
        picked.append(rng.permutation(idx)[:n_per_class])
    return ds.subset(np.concatenate(picked))


def _largest_remainder(n, fractions):
    raw = [n * f for f in fractions]
    sizes = [int(np.floor(r)) for r in raw]
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - sizes[i]), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return sizes


def stratified_sizes(class_sizes, fractions):
    """Per-class split sizes whose split totals follow largest remainder on N.

    Every class first gets ``floor(n_c * f)`` per split. The leftover samples
    of each class (processed largest-leftover first) then go one per split to
    the splits still furthest below their overall target, ties broken by the
    larger fractional part and then by split order.
    """
    n_splits = len(fractions)
    totals = _largest_remainder(sum(class_sizes), fractions)
    raw = [[n * f for f in fractions] for n in class_sizes]
    sizes = [[int(np.floor(r)) for r in row] for row in raw]
    demand = [totals[s] - sum(row[s] for row in sizes) for s in range(n_splits)]
    extra = [n - sum(row) for n, row in zip(class_sizes, sizes)]
    for c in sorted(range(len(class_sizes)), key=lambda c: (-extra[c], c)):
        ranked = sorted(range(n_splits), key=lambda s: (-demand[s], -(raw[c][s] - sizes[c][s]), s))
        for s in ranked[: extra[c]]:
            sizes[c][s] += 1
            demand[s] -= 1
    return sizes


def split(ds, spec):
    """Stratified, disjoint, exhaustive train/val/test partition."""
    rng = np.random.default_rng(spec.seed)
    fractions = (spec.train_fraction, spec.val_fraction, spec.test_fraction)
    present = [c for c in range(ds.k) if np.any(ds.labels == c)]
    counts = ds.class_counts()
    per_class = stratified_sizes([int(counts[c]) for c in present], fractions)
    parts = ([], [], [])
    for c, sizes in zip(present, per_class):
        if min(sizes) < 1:
            raise ValueError(f"class {c} has {counts[c]} samples, too few to stratify into {fractions}")
        idx = rng.permutation(np.flatnonzero(ds.labels == c))
        start = 0
        for part, size in zip(parts, sizes):
            part.append(idx[start : start + size])
            start += size
    return tuple(ds.subset(np.sort(np.concatenate(p))) for p in parts)


def save_csv(ds, path):
    """Header ``label,f0,...,f{D-1}``; one sample per row."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["label"] + [f"f{j}" for j in range(ds.d)])
        for y, row in zip(ds.labels, ds.features):
            w.writerow([int(y)] + [repr(float(v)) for v in row])


def load_csv(path, k=None, normalize=False, lo=None, hi=None):
    """Load a CSV dataset with ``label`` as the first column.

    With ``normalize=True`` features are mapped from ``[lo, hi]`` to
    ``[-1, 1]`` (bounds default to the data's min and max).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0] or rows[0][0].strip() != "label":
        raise ParseError(f"{path}: header must start with 'label'")
    width = len(rows[0])
    if width < 2:
        raise ParseError(f"{path}: no feature columns")
    body = rows[1:]
    if not body:
        raise ParseError(f"{path}: no samples")
    for i, r in enumerate(body, start=2):
        if len(r) != width:
            raise ParseError(f"{path}: line {i} has {len(r)} fields, expected {width}")
    try:
        labels = np.array([int(r[0]) for r in body], dtype=np.int64)
        feats = np.array([[float(v) for v in r[1:]] for r in body], dtype=np.float64)
    except ValueError as e:
        raise ParseError(f"{path}: {e}") from None
    if normalize:
        lo = feats.min() if lo is None else lo
        hi = feats.max() if hi is None else hi
        feats = normalize_minus1_1(feats, lo, hi)
    k = int(labels.max()) + 1 if k is None else k
    return Dataset(feats, labels, max(k, 2))


def _read_idx_header(buf, path, magic, n_dims):
    if len(buf) < 4 + 4 * n_dims:
        raise ParseError(f"{path}: truncated header at offset {len(buf)}")
    found = struct.unpack_from(">i", buf, 0)[0]
    if found != magic:
        raise ParseError(f"{path}: bad magic number {found} at offset 0, expected {magic}")
    return struct.unpack_from(">" + "i" * n_dims, buf, 4)


def load_idx(images_path, labels_path, k=10):
    """Load an MNIST-style IDX image/label pair; pixels go from [0, 255] to [-1, 1]."""
    with open(images_path, "rb") as fh:
        ibuf = fh.read()
    with open(labels_path, "rb") as fh:
        lbuf = fh.read()
    n_img, rows, cols = _read_idx_header(ibuf, images_path, IDX_IMAGE_MAGIC, 3)
    (n_lab,) = _read_idx_header(lbuf, labels_path, IDX_LABEL_MAGIC, 1)
    if n_img != n_lab:
        raise ParseError(f"{labels_path}: {n_lab} labels at offset 4 but {n_img} images")
    need = 16 + n_img * rows * cols
    if len(ibuf) != need:
        raise ParseError(f"{images_path}: expected {need} bytes, file ends at offset {len(ibuf)}")
    if len(lbuf) != 8 + n_lab:
        raise ParseError(f"{labels_path}: expected {8 + n_lab} bytes, file ends at offset {len(lbuf)}")
    pixels = np.frombuffer(ibuf, dtype=np.uint8, offset=16).reshape(n_img, rows * cols)
    labels = np.frombuffer(lbuf, dtype=np.uint8, offset=8).astype(np.int64)
    feats = normalize_minus1_1(pixels.astype(np.float64), 0.0, 255.0)
    return Dataset(feats, labels, max(k, int(labels.max()) + 1))
