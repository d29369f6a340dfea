"""Multilayer perceptron classifier with hand-written backpropagation.

Hidden layers use ReLU; the output layer is affine and produces logits.
Gradients follow the batch-mean convention: ``backward`` receives the
per-sample gradient of the loss at the logits and divides by the batch size.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from olslab.ndkernel import ShapeError, as_mat, matmul, relu, relu_mask, softmax_rows

CHECKPOINT_HEADER = "olslab-mlp-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class MlpParams:
    layer_sizes: tuple
    weights: list
    biases: list

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        n_layers = len(self.layer_sizes) - 1
        if len(self.weights) != n_layers or len(self.biases) != n_layers:
            raise ShapeError(
                f"expected {n_layers} weight/bias pairs for sizes {self.layer_sizes}, "
                f"got {len(self.weights)}/{len(self.biases)}"
            )
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            want = (self.layer_sizes[i], self.layer_sizes[i + 1])
            if w.shape != want or b.shape != (want[1],):
                raise ShapeError(f"layer {i}: weight {w.shape}, bias {b.shape}, expected {want}")

    @property
    def n_hidden(self):
        return len(self.layer_sizes) - 2

    def copy(self):
        return MlpParams(self.layer_sizes, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def arrays(self):
        """All parameter arrays in layer order: w0, b0, w1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out


@dataclass
class ForwardCache:
    inputs: list  # inputs[l] feeds layer l; inputs[0] is the batch
    pre_activations: list
    logits: np.ndarray

    @property
    def penultimate(self):
        if len(self.inputs) < 2:
            raise ShapeError("network has no hidden layer, so no penultimate activation")
        return self.inputs[-1]


@dataclass
class Grads:
    weights: list
    biases: list

    def arrays(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out


def _check_sizes(layer_sizes):
    sizes = list(layer_sizes)
    if len(sizes) < 2:
        raise ValueError(f"layer_sizes needs at least input and output sizes, got {sizes}")
    if any(int(s) != s or s < 1 for s in sizes):
        raise ValueError(f"layer sizes must be positive integers, got {sizes}")
    return tuple(int(s) for s in sizes)


def init_params(layer_sizes, seed):
    """Gaussian weights with standard deviation ``1/sqrt(fan_in)``, zero biases."""
    sizes = _check_sizes(layer_sizes)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in))
        biases.append(np.zeros(fan_out))
    return MlpParams(sizes, weights, biases)


def forward(params, batch):
    x = as_mat(batch, "batch")
    if x.shape[1] != params.layer_sizes[0]:
        raise ShapeError(f"batch has {x.shape[1]} features, model expects {params.layer_sizes[0]}")
    inputs, pre = [x], []
    n_layers = len(params.weights)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = matmul(inputs[-1], w) + b
        pre.append(z)
        if i < n_layers - 1:
            inputs.append(relu(z))
    return ForwardCache(inputs=inputs, pre_activations=pre, logits=pre[-1])


def backward(params, cache, dlogits):
    """Reverse-mode gradients of the batch-mean loss.

    ``dlogits[i]`` is the gradient of sample ``i``'s loss w.r.t. its logits
    (not yet divided by the batch size).
    """
    g = np.asarray(dlogits, dtype=np.float64)
    if g.shape != cache.logits.shape:
        raise ShapeError(f"dlogits shape {g.shape} does not match logits {cache.logits.shape}")
    n = g.shape[0]
    g = g / n
    n_layers = len(params.weights)
    dws, dbs = [None] * n_layers, [None] * n_layers
    for i in range(n_layers - 1, -1, -1):
        dws[i] = matmul(cache.inputs[i].T, g)
        dbs[i] = g.sum(axis=0)
        if i > 0:
            g = matmul(g, params.weights[i].T) * relu_mask(cache.pre_activations[i - 1])
    return Grads(dws, dbs)


def predict_proba(params, batch):
    return softmax_rows(forward(params, batch).logits)


def penultimate_embeddings(params, batch):
    if params.n_hidden < 1:
        raise ShapeError("network has no hidden layer, so no penultimate activation")
    return forward(params, batch).penultimate


def save_checkpoint(params, path):
    """Write parameters as text.

    Layout: a ``olslab-mlp-checkpoint <version>`` line, a line of layer sizes,
    then for each layer its weights (one matrix row per line) followed by a
    single line of biases. Values use ``repr`` so they round-trip exactly.
    """
    lines = [f"{CHECKPOINT_HEADER} {CHECKPOINT_VERSION}", " ".join(str(s) for s in params.layer_sizes)]
    for w, b in zip(params.weights, params.biases):
        lines.extend(" ".join(repr(float(v)) for v in row) for row in w)
        lines.append(" ".join(repr(float(v)) for v in b))
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path):
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty checkpoint")
    head = lines[0].split()
    if len(head) != 2 or head[0] != CHECKPOINT_HEADER:
        raise ValueError(f"{path}: not an olslab checkpoint (header {lines[0]!r})")
    if int(head[1]) != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {head[1]}")
    sizes = _check_sizes(int(s) for s in lines[1].split())
    pos = 2
    weights, biases = [], []
    try:
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            rows = [[float(v) for v in lines[pos + r].split()] for r in range(fan_in)]
            pos += fan_in
            w = np.array(rows, dtype=np.float64)
            b = np.array([float(v) for v in lines[pos].split()], dtype=np.float64)
            pos += 1
            if w.shape != (fan_in, fan_out) or b.shape != (fan_out,):
                raise ValueError(f"{path}: layer shape mismatch near line {pos}")
            weights.append(w)
            biases.append(b)
    except IndexError:
        raise ValueError(f"{path}: truncated checkpoint at line {pos + 1}") from None
    return MlpParams(sizes, weights, biases)
