"""Minimal dense feed-forward machinery with hand-written backpropagation.

Everything is float64 numpy. Layers cache their forward input so a
backward pass can be run immediately afterwards; gradients accumulate
into ``grad_*`` buffers until :meth:`zero_grads` is called. The only
unusual piece is :class:`GradientReversal`, which is the identity on the
forward pass and multiplies the incoming gradient by ``-lam`` on the way
back, turning a shared minimisation into an adversarial min-max.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np


def as_matrix(x, cols: int | None = None) -> np.ndarray:
    """Validate and convert ``x`` to a 2-D float64 array.

    Raises ValueError on wrong rank, non-finite entries, or (when ``cols``
    is given) a column-count mismatch.
    """
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite entries")
    if cols is not None and a.shape[1] != cols:
        raise ValueError(f"expected {cols} columns, got {a.shape[1]}")
    return a


class Affine:
    """Fully connected layer: out = x @ weight + bias.

    weight is (in_dim, out_dim); gradient and velocity buffers mirror the
    parameter shapes. Weights start uniform in [-a, a] with
    a = sqrt(6 / (in_dim + out_dim)); biases start at zero.
    """

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator | None = None):
        self.in_dim = in_dim
        self.out_dim = out_dim
        if rng is None:
            self.weight = np.zeros((in_dim, out_dim))
        else:
            a = math.sqrt(6.0 / (in_dim + out_dim))
            self.weight = rng.uniform(-a, a, size=(in_dim, out_dim))
        self.bias = np.zeros(out_dim)
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self.vel_weight = np.zeros_like(self.weight)
        self.vel_bias = np.zeros_like(self.bias)
        self._input: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = as_matrix(x, cols=self.in_dim)
        self._input = x
        return x @ self.weight + self.bias

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._input is None:
            raise RuntimeError("backward called before forward")
        grad_out = as_matrix(grad_out, cols=self.out_dim)
        if grad_out.shape[0] != self._input.shape[0]:
            raise ValueError("grad_out row count does not match cached input")
        self.grad_weight += self._input.T @ grad_out
        self.grad_bias += grad_out.sum(axis=0)
        return grad_out @ self.weight.T

    def zero_grads(self) -> None:
        self.grad_weight.fill(0.0)
        self.grad_bias.fill(0.0)


class Relu:
    """Elementwise max(0, x); routes zero gradient through x <= 0."""

    def __init__(self):
        self._input = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = as_matrix(x)
        self._input = x
        return np.maximum(x, 0.0)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._input is None:
            raise RuntimeError("backward called before forward")
        grad_out = as_matrix(grad_out)
        return np.where(self._input > 0.0, grad_out, 0.0)

    def zero_grads(self) -> None:
        pass


class Sigmoid:
    """Elementwise logistic; caches the output for the backward pass."""

    def __init__(self):
        self._output = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = as_matrix(x)
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        self._output = out
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._output is None:
            raise RuntimeError("backward called before forward")
        grad_out = as_matrix(grad_out)
        return grad_out * self._output * (1.0 - self._output)

    def zero_grads(self) -> None:
        pass


class GradientReversal:
    """Identity forward; backward returns -lam * grad.

    ``lam`` is the adversarial trade-off coefficient. With lam = 0 the
    layer blocks the adversarial signal entirely.
    """

    def __init__(self, lam: float = 1.0):
        if lam < 0:
            raise ValueError("lam must be >= 0")
        self.lam = float(lam)
        self.enabled = True

    def forward(self, x: np.ndarray) -> np.ndarray:
        return as_matrix(x)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        grad_out = as_matrix(grad_out)
        if not self.enabled:
            return grad_out.copy()
        return -self.lam * grad_out

    def zero_grads(self) -> None:
        pass


class Sequential:
    """A plain layer chain with forward/backward in matching order."""

    def __init__(self, layers):
        self.layers = list(layers)

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad_out = layer.backward(grad_out)
        return grad_out

    def zero_grads(self) -> None:
        for layer in self.layers:
            layer.zero_grads()

    def affines(self):
        return [l for l in self.layers if isinstance(l, Affine)]


@dataclass
class Schedule:
    """SGD-with-momentum hyperparameters and the polynomial lr decay.

    eta(p) = eta0 / (1 + alpha * p) ** gamma with progress p in [0, 1];
    the feature extractor trains at feature_lr_scale times the base rate.
    """

    eta0: float = 0.01
    alpha: float = 10.0
    gamma: float = 0.75
    momentum: float = 0.9
    feature_lr_scale: float = 0.1

    def eta(self, p: float) -> float:
        if not 0.0 <= p <= 1.0:
            raise ValueError("progress p must lie in [0, 1]")
        return self.eta0 / (1.0 + self.alpha * p) ** self.gamma


class Network:
    """The four sub-networks sharing one feature extractor.

    feature:        input -> hidden dims -> embedding (ReLU between affines)
    source_head:    embedding -> class logits, trained on source labels
    target_head:    embedding -> class logits, trained on pseudo-labels
    discriminator:  embedding -> 1 sigmoid unit behind a gradient reversal
    """

    def __init__(self, in_dim: int, class_count: int, rng: np.random.Generator,
                 hidden_dims=(64, 32), disc_hidden: int = 32):
        if class_count < 2:
            raise ValueError("need at least two classes")
        dims = [in_dim, *hidden_dims]
        layers = []
        for a, b in zip(dims[:-1], dims[1:]):
            layers.append(Affine(a, b, rng))
            layers.append(Relu())
        layers.pop()  # no activation after the embedding layer
        self.feature = Sequential(layers)
        emb = dims[-1]
        self.source_head = Sequential([Affine(emb, class_count, rng)])
        self.target_head = Sequential([Affine(emb, class_count, rng)])
        self.discriminator = Sequential([
            Affine(emb, disc_hidden, rng),
            Relu(),
            Affine(disc_hidden, 1, rng),
            Sigmoid(),
        ])
        self.grl = GradientReversal(1.0)
        self.in_dim = in_dim
        self.class_count = class_count

    def groups(self):
        """(name, Sequential) pairs in a fixed traversal order."""
        return [
            ("feature", self.feature),
            ("source_head", self.source_head),
            ("target_head", self.target_head),
            ("discriminator", self.discriminator),
        ]

    def zero_grads(self) -> None:
        for _, seq in self.groups():
            seq.zero_grads()

    def features(self, x: np.ndarray) -> np.ndarray:
        return self.feature.forward(as_matrix(x, cols=self.in_dim))

    def forward_full(self, x: np.ndarray):
        """Evaluate all three heads on one batch.

        Returns (source logits, target logits, domain probabilities); the
        domain probabilities come from the discriminator behind the
        reversal layer and lie strictly inside (0, 1). Output depends on
        parameters and batch only.
        """
        f = self.features(x)
        s = self.source_head.forward(f)
        t = self.target_head.forward(f)
        d = self.discriminator.forward(self.grl.forward(f))
        return s, t, d


def sgd_step(net: Network, sched: Schedule, p: float) -> None:
    """One momentum update over every parameter group.

    velocity <- momentum * velocity + grad
    param    <- param - lr * velocity

    where lr = eta(p) * feature_lr_scale for the feature extractor and
    eta(p) elsewhere.
    """
    base = sched.eta(p)
    for name, seq in net.groups():
        lr = base * sched.feature_lr_scale if name == "feature" else base
        for layer in seq.affines():
            layer.vel_weight = sched.momentum * layer.vel_weight + layer.grad_weight
            layer.vel_bias = sched.momentum * layer.vel_bias + layer.grad_bias
            layer.weight = layer.weight - lr * layer.vel_weight
            layer.bias = layer.bias - lr * layer.vel_bias


def _layer_to_json(layer):
    if isinstance(layer, Affine):
        return {
            "type": "affine",
            "rows": layer.in_dim,
            "cols": layer.out_dim,
            "weight": [float(v) for v in layer.weight.ravel(order="C")],
            "bias": [float(v) for v in layer.bias],
        }
    if isinstance(layer, Relu):
        return {"type": "relu"}
    if isinstance(layer, Sigmoid):
        return {"type": "sigmoid"}
    raise TypeError(f"cannot serialize layer of type {type(layer).__name__}")


def _layer_from_json(obj):
    kind = obj["type"]
    if kind == "affine":
        layer = Affine(int(obj["rows"]), int(obj["cols"]))
        w = np.asarray(obj["weight"], dtype=np.float64)
        if w.size != layer.in_dim * layer.out_dim:
            raise ValueError("weight array length does not match declared shape")
        layer.weight = w.reshape(layer.in_dim, layer.out_dim, order="C").copy()
        layer.bias = np.asarray(obj["bias"], dtype=np.float64).copy()
        layer.grad_weight = np.zeros_like(layer.weight)
        layer.grad_bias = np.zeros_like(layer.bias)
        layer.vel_weight = np.zeros_like(layer.weight)
        layer.vel_bias = np.zeros_like(layer.bias)
        return layer
    if kind == "relu":
        return Relu()
    if kind == "sigmoid":
        return Sigmoid()
    raise ValueError(f"unknown layer type {kind!r}")


def checkpoint_to_dict(net: Network) -> dict:
    return {
        "in_dim": net.in_dim,
        "class_count": net.class_count,
        **{name: [_layer_to_json(l) for l in seq.layers] for name, seq in net.groups()},
    }


def checkpoint_from_dict(obj: dict) -> Network:
    net = Network.__new__(Network)
    net.in_dim = int(obj["in_dim"])
    net.class_count = int(obj["class_count"])
    for name in ("feature", "source_head", "target_head", "discriminator"):
        setattr(net, name, Sequential([_layer_from_json(l) for l in obj[name]]))
    net.grl = GradientReversal(1.0)
    return net


def save_checkpoint(net: Network, path) -> None:
    """Write parameters as JSON; decimal text round-trips the exact doubles."""
    with open(path, "w") as fh:
        json.dump(checkpoint_to_dict(net), fh)
        fh.write("\n")


def load_checkpoint(path) -> Network:
    with open(path) as fh:
        return checkpoint_from_dict(json.load(fh))
