"""Gradient-descent baseline: binarized-weight networks trained with a straight-through estimator.

Latent weights and biases are reals in [-1, 1].  The forward pass uses their
signs (0 maps to +1), so a trained model is a P=1 integer network with every
parameter in {-1, +1}.  Gradients pass through both the weight binarization
and the hidden sign activation as the identity, the latter only where the
preactivation lies in [-1, 1].
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from mipnn.errors import InputError
from mipnn.network import IntegerNetwork, accuracy, output_scale, sign

MARGIN = 0.5


@dataclass(frozen=True)
class GDParams:
    learning_rate: float = 0.1
    epochs: int = 500
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise InputError("learning rate must be non-negative")
        if self.epochs < 1 or self.batch_size < 1:
            raise InputError("epochs and batch size must be positive")


@dataclass
class LatentNetwork:
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]  # (N_{l-1}, N_l) each
    biases: list[np.ndarray]

    @classmethod
    def random(cls, layer_sizes, rng: np.random.Generator) -> "LatentNetwork":
        sizes = tuple(int(n) for n in layer_sizes)
        if len(sizes) < 2 or any(n < 1 for n in sizes):
            raise InputError(f"invalid architecture {sizes}")
        weights = [rng.uniform(-1, 1, size=(sizes[l - 1], sizes[l])) for l in range(1, len(sizes))]
        biases = [rng.uniform(-1, 1, size=sizes[l]) for l in range(1, len(sizes))]
        return cls(sizes, weights, biases)

    @classmethod
    def zeros(cls, layer_sizes) -> "LatentNetwork":
        sizes = tuple(int(n) for n in layer_sizes)
        return cls(
            sizes,
            [np.zeros((sizes[l - 1], sizes[l])) for l in range(1, len(sizes))],
            [np.zeros(sizes[l]) for l in range(1, len(sizes))],
        )

    def binarize(self) -> IntegerNetwork:
        return IntegerNetwork(
            self.layer_sizes,
            1,
            tuple(sign(w).astype(np.int64) for w in self.weights),
            tuple(sign(b).astype(np.int64) for b in self.biases),
        )

    def clip(self):
        for arr in (*self.weights, *self.biases):
            np.clip(arr, -1.0, 1.0, out=arr)


@dataclass
class History:
    epochs: list[int] = field(default_factory=list)
    loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)

    def save(self, path):
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss", "train_accuracy"])
            for row in zip(self.epochs, self.loss, self.train_accuracy):
                writer.writerow([row[0], repr(row[1]), repr(row[2])])


def _forward(net: LatentNetwork, X):
    """Binarized forward pass keeping what the backward pass needs."""
    h = X
    inputs, pres = [], []
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        inputs.append(h)
        pre = h @ sign(w) + sign(b)
        pres.append(pre)
        h = sign(pre).astype(float)
    inputs.append(h)
    scale = output_scale(1, net.layer_sizes[-2])
    y_hat = scale * (h @ sign(net.weights[-1]) + sign(net.biases[-1]))
    return inputs, pres, y_hat, scale


def hinge_loss(y_hat, Y) -> float:
    """Squared hinge summed over outputs and averaged over samples."""
    return float(np.mean(np.sum(np.maximum(0.0, MARGIN - Y * y_hat) ** 2, axis=1)))


def _step(net: LatentNetwork, X, Y, lr: float):
    inputs, pres, y_hat, scale = _forward(net, X)
    # d(loss)/d(y_hat), loss averaged over the batch
    grad = -2.0 * Y * np.maximum(0.0, MARGIN - Y * y_hat) / len(X)
    grad = grad * scale
    n_layers = len(net.weights)
    for l in range(n_layers - 1, -1, -1):
        gw = inputs[l].T @ grad
        gb = grad.sum(axis=0)
        if l > 0:
            grad = (grad @ sign(net.weights[l]).T) * (np.abs(pres[l - 1]) <= 1.0)
        net.weights[l] -= lr * gw
        net.biases[l] -= lr * gb
    net.clip()


def train_gd(data, layer_sizes, params: GDParams | None = None) -> tuple[LatentNetwork, History]:
    """Mini-batch SGD on the squared hinge loss; deterministic for a given seed.

    The history starts with epoch 0, the untrained network.
    """
    params = params or GDParams()
    X = np.asarray(data.features, dtype=float)
    Y = np.asarray(data.labels, dtype=float)
    sizes = tuple(int(n) for n in layer_sizes)
    if len(X) == 0:
        raise InputError("no training samples")
    if sizes[0] != X.shape[1] or sizes[-1] != Y.shape[1]:
        raise InputError(f"architecture {sizes} does not match data widths {X.shape[1]} and {Y.shape[1]}")
    rng = np.random.default_rng(params.seed)
    net = LatentNetwork.random(sizes, rng)
    history = History()
    for epoch in range(params.epochs + 1):
        if epoch > 0:
            order = rng.permutation(len(X))
            for start in range(0, len(X), params.batch_size):
                batch = order[start : start + params.batch_size]
                _step(net, X[batch], Y[batch], params.learning_rate)
        _, _, y_hat, _ = _forward(net, X)
        history.epochs.append(epoch)
        history.loss.append(hinge_loss(y_hat, Y))
        history.train_accuracy.append(evaluate_gd(net, data, params.seed))
    return net, history


def evaluate_gd(net: LatentNetwork, data, seed: int = 0) -> float:
    """Accuracy of the binarized network, with the integer network's tie-break rule."""
    return accuracy(net.binarize(), data, seed)
