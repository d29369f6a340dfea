"""Experiment configuration in a flat ``key = value`` text format.

Blank lines and lines starting with ``#`` are ignored. Lists are comma
separated; confusion pairs are written ``0-1, 2-3``. See README for the keys.
"""

import configparser
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from olslab import labeling
from olslab.data import SplitSpec, SyntheticSpec
from olslab.trainer import TrainConfig

_SECTION = "experiment"


@dataclass
class ExperimentConfig:
    strategies: list = field(default_factory=lambda: ["ols"])
    alpha: float = 0.5
    epsilon: float = 0.1
    seeds: list = field(default_factory=lambda: [0])
    epochs: int = 30
    batch_size: int = 64
    lr0: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 1e-4
    lr_decay_epochs: list = field(default_factory=list)
    lr_decay_factor: float = 0.1
    layer_sizes: list = field(default_factory=list)
    bins: int = 15
    out: str = "runs"
    # dataset source: synthetic | csv | idx
    dataset: str = "synthetic"
    k: int = 4
    d: int = 8
    n_per_class: int = 500
    cluster_spread: float = 1.0
    confusion_pairs: list = field(default_factory=lambda: [(0, 1), (2, 3)])
    data_seed: int = 0
    csv_path: str = ""
    csv_normalize: bool = False
    idx_images: str = ""
    idx_labels: str = ""
    balance_per_class: int = 0
    train_fraction: float = 0.8
    val_fraction: float = 0.1
    test_fraction: float = 0.1
    split_seed: int = 0

    def __post_init__(self):
        if not self.strategies:
            raise ValueError("at least one strategy is required")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.dataset not in ("synthetic", "csv", "idx"):
            raise ValueError(f"dataset must be synthetic, csv or idx, got {self.dataset!r}")
        self.confusion_pairs = [tuple(int(c) for c in p) for p in self.confusion_pairs]
        for s in self.strategies:
            self.strategy(s)

    def strategy(self, text):
        return labeling.parse_strategy(text, alpha=self.alpha, epsilon=self.epsilon)

    def train_config(self, strategy_text, seed):
        return TrainConfig(
            strategy=self.strategy(strategy_text),
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr0=self.lr0,
            momentum=self.momentum,
            weight_decay=self.weight_decay,
            lr_decay_epochs=tuple(self.lr_decay_epochs),
            lr_decay_factor=self.lr_decay_factor,
            seed=seed,
            layer_sizes=tuple(self.layer_sizes),
            bins=self.bins,
        )

    def synthetic_spec(self):
        return SyntheticSpec(
            k=self.k,
            d=self.d,
            n_per_class=self.n_per_class,
            cluster_spread=self.cluster_spread,
            confusion_pairs=self.confusion_pairs,
            seed=self.data_seed,
        )

    def split_spec(self):
        return SplitSpec(self.train_fraction, self.val_fraction, self.test_fraction, self.split_seed)

    def to_mapping(self):
        m = asdict(self)
        m["confusion_pairs"] = [list(p) for p in self.confusion_pairs]
        return m

    def with_overrides(self, **kw):
        m = self.to_mapping()
        m.update({k: v for k, v in kw.items() if v is not None})
        return ExperimentConfig(**m)


_LIST_INT = {"seeds", "lr_decay_epochs", "layer_sizes"}
_LIST_STR = {"strategies"}


def _parse_value(name, typ, raw):
    raw = raw.strip()
    if name == "confusion_pairs":
        pairs = []
        for item in filter(None, (s.strip() for s in raw.split(","))):
            a, sep, b = item.partition("-")
            if not sep:
                raise ValueError(f"confusion pair {item!r} must look like '0-1'")
            pairs.append((int(a), int(b)))
        return pairs
    if name in _LIST_INT:
        return [int(s) for s in raw.split(",") if s.strip()]
    if name in _LIST_STR:
        return [s.strip() for s in raw.split(",") if s.strip()]
    if typ is bool:
        if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"{name}: expected a boolean, got {raw!r}")
        return raw.lower() in ("true", "1", "yes")
    return typ(raw)


def _format_value(name, value):
    if name == "confusion_pairs":
        return ", ".join(f"{a}-{b}" for a, b in value)
    if isinstance(value, (list, tuple)):
        return ", ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text):
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",), delimiters=("=",))
    cp.optionxform = str
    cp.read_string(f"[{_SECTION}]\n{text}")
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    kw = {}
    for key, raw in cp.items(_SECTION):
        if key not in types:
            raise ValueError(f"unknown config key {key!r}")
        kw[key] = _parse_value(key, types[key], raw)
    return ExperimentConfig(**kw)


def load_config(path):
    """Read a config from flat text, or from the ``config`` entry of a report.json."""
    text = Path(path).read_text(encoding="utf-8")
    if str(path).endswith(".json"):
        data = json.loads(text)
        return ExperimentConfig(**data.get("config", data))
    return parse_config(text)


def format_config(cfg):
    return "".join(f"{f.name} = {_format_value(f.name, getattr(cfg, f.name))}\n" for f in fields(cfg))


def save_config(cfg, path):
    Path(path).write_text(format_config(cfg), encoding="utf-8")
