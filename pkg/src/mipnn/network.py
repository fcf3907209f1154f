"""Integer-valued feed-forward networks with sign activations.

A network with layer sizes ``N_0, ..., N_L`` holds one integer weight matrix
of shape ``(N_{l-1}, N_l)`` and one integer bias vector per layer, all inside
``{-P, ..., P}``.  Hidden layers apply ``sign`` (with ``sign(0) = +1``); the
output layer is scaled by ``2 / (P * (N_{L-1} + 1))`` so that every output
lies in ``[-2, 2]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from mipnn.errors import InputError, NetworkFormatError

FORMAT_VERSION = 1


def sign(values):
    """Elementwise sign with zero mapped to +1."""
    return np.where(np.asarray(values) >= 0, 1, -1)


def output_scale(p_bound: int, n_prev: int) -> float:
    """Normalizer applied to the raw output-layer sums."""
    return 2.0 / (p_bound * (n_prev + 1))


def tie_break_rng(seed: int, sample_index: int) -> np.random.Generator:
    """Random stream dedicated to one sample of one run.

    Keying the stream on ``(seed, sample_index)`` keeps predictions independent
    of evaluation order.
    """
    return np.random.default_rng([int(seed), int(sample_index)])


def _freeze(array):
    array = np.array(array, dtype=np.int64)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class IntegerNetwork:
    layer_sizes: tuple[int, ...]
    p_bound: int
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.layer_sizes)
        if len(sizes) < 3:
            raise InputError("a network needs at least one hidden layer")
        if any(n < 1 for n in sizes):
            raise InputError(f"layer sizes must be positive, got {sizes}")
        if int(self.p_bound) != self.p_bound or self.p_bound < 1:
            raise InputError(f"parameter bound must be a positive integer, got {self.p_bound}")
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise InputError("need one weight matrix and one bias vector per layer")
        weights, biases = [], []
        for layer, (w, b) in enumerate(zip(self.weights, self.biases), start=1):
            w_arr = np.asarray(w)
            b_arr = np.asarray(b)
            expected = (sizes[layer - 1], sizes[layer])
            if w_arr.shape != expected:
                raise InputError(f"layer {layer} weights have shape {w_arr.shape}, expected {expected}")
            if b_arr.shape != (sizes[layer],):
                raise InputError(f"layer {layer} biases have shape {b_arr.shape}, expected {(sizes[layer],)}")
            for name, arr in (("weights", w_arr), ("biases", b_arr)):
                if arr.size and not np.all(np.equal(np.round(arr), arr)):
                    raise InputError(f"layer {layer} {name} must be integers")
                if arr.size and np.max(np.abs(arr)) > self.p_bound:
                    raise InputError(f"layer {layer} {name} leave the domain [-{self.p_bound}, {self.p_bound}]")
            weights.append(_freeze(w_arr))
            biases.append(_freeze(b_arr))
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "p_bound", int(self.p_bound))
        object.__setattr__(self, "weights", tuple(weights))
        object.__setattr__(self, "biases", tuple(biases))

    @classmethod
    def zeros(cls, layer_sizes: Sequence[int], p_bound: int = 1) -> "IntegerNetwork":
        sizes = tuple(layer_sizes)
        return cls(
            sizes,
            p_bound,
            tuple(np.zeros((a, b), dtype=np.int64) for a, b in zip(sizes[:-1], sizes[1:])),
            tuple(np.zeros(b, dtype=np.int64) for b in sizes[1:]),
        )

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    def __eq__(self, other):
        if not isinstance(other, IntegerNetwork):
            return NotImplemented
        return (
            self.layer_sizes == other.layer_sizes
            and self.p_bound == other.p_bound
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))
        )

    __hash__ = None


@dataclass(frozen=True)
class Activations:
    preactivations: tuple[np.ndarray, ...]
    signs: tuple[np.ndarray, ...]
    outputs: np.ndarray


def forward(net: IntegerNetwork, x) -> Activations:
    """Exact forward pass for one input vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != net.n_inputs:
        raise InputError(f"input has shape {x.shape}, expected ({net.n_inputs},)")
    pre_list, sign_list = [], []
    h = x
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        pre = h @ w + b
        h = sign(pre)
        pre_list.append(pre)
        sign_list.append(h)
    raw = h @ net.weights[-1] + net.biases[-1]
    scale = output_scale(net.p_bound, net.layer_sizes[-2])
    return Activations(tuple(pre_list), tuple(sign_list), scale * raw)


def forward_batch(net: IntegerNetwork, features) -> Activations:
    """Forward pass for a matrix of inputs, one sample per row."""
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[1] != net.n_inputs:
        raise InputError(f"features have shape {X.shape}, expected (n, {net.n_inputs})")
    pre_list, sign_list = [], []
    h = X
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        pre = h @ w + b
        h = sign(pre)
        pre_list.append(pre)
        sign_list.append(h)
    raw = h @ net.weights[-1] + net.biases[-1]
    scale = output_scale(net.p_bound, net.layer_sizes[-2])
    return Activations(tuple(pre_list), tuple(sign_list), scale * raw)


def argmax_tiebreak(outputs, rng: np.random.Generator | None = None) -> int:
    """Index of the largest output; exact ties are broken with ``rng``."""
    outputs = np.asarray(outputs)
    tied = np.flatnonzero(outputs == outputs.max())
    if len(tied) == 1:
        return int(tied[0])
    if rng is None:
        raise InputError("outputs are tied and no random source was given")
    return int(tied[rng.integers(len(tied))])


def predict(net: IntegerNetwork, x, rng: np.random.Generator) -> int:
    return argmax_tiebreak(forward(net, x).outputs, rng)


def predict_batch(outputs, seed: int) -> np.ndarray:
    """Argmax of every row, ties broken by the per-sample stream of ``seed``."""
    outputs = np.asarray(outputs)
    classes = np.argmax(outputs, axis=1)
    n_max = np.sum(outputs == outputs.max(axis=1, keepdims=True), axis=1)
    for k in np.flatnonzero(n_max > 1):
        classes[k] = argmax_tiebreak(outputs[k], tie_break_rng(seed, k))
    return classes


def accuracy(net: IntegerNetwork, data, seed: int = 0) -> float:
    """Fraction of samples in ``data`` whose predicted class is the true one."""
    features = np.asarray(data.features)
    labels = np.asarray(data.labels)
    if len(features) == 0:
        raise InputError("cannot compute accuracy on an empty dataset")
    if labels.shape[1] != net.n_outputs:
        raise InputError(f"labels have {labels.shape[1]} columns, network has {net.n_outputs} outputs")
    outputs = forward_batch(net, features).outputs
    predicted = predict_batch(outputs, seed)
    return float(np.mean(predicted == np.argmax(labels, axis=1)))


def to_dict(net: IntegerNetwork) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "layer_sizes": list(net.layer_sizes),
        "p_bound": net.p_bound,
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def save(net: IntegerNetwork, path) -> None:
    Path(path).write_text(json.dumps(to_dict(net), indent=1) + "\n", encoding="utf-8")


def _int_field(value, field, path):
    if isinstance(value, bool) or not isinstance(value, int):
        raise NetworkFormatError(f"expected an integer, got {value!r}", path=path, field=field)
    return value


def from_dict(doc: dict, path=None) -> IntegerNetwork:
    if not isinstance(doc, dict):
        raise NetworkFormatError("top level must be an object", path=path)
    for key in ("format_version", "layer_sizes", "p_bound", "weights", "biases"):
        if key not in doc:
            raise NetworkFormatError("missing field", path=path, field=key)
    if doc["format_version"] != FORMAT_VERSION:
        raise NetworkFormatError(f"unsupported version {doc['format_version']!r}", path=path, field="format_version")
    if not isinstance(doc["layer_sizes"], list):
        raise NetworkFormatError("expected a list", path=path, field="layer_sizes")
    sizes = [_int_field(n, f"layer_sizes[{i}]", path) for i, n in enumerate(doc["layer_sizes"])]
    p = _int_field(doc["p_bound"], "p_bound", path)
    if p < 1:
        raise NetworkFormatError("must be a positive integer", path=path, field="p_bound")
    n_layers = len(sizes) - 1
    if n_layers < 2:
        raise NetworkFormatError("need at least one hidden layer", path=path, field="layer_sizes")
    for key in ("weights", "biases"):
        if not isinstance(doc[key], list) or len(doc[key]) != n_layers:
            raise NetworkFormatError(f"expected a list of {n_layers} entries", path=path, field=key)

    weights, biases = [], []
    for l in range(n_layers):
        rows = doc["weights"][l]
        if not isinstance(rows, list) or len(rows) != sizes[l]:
            raise NetworkFormatError(f"expected {sizes[l]} rows", path=path, field=f"weights[{l}]")
        matrix = []
        for i, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != sizes[l + 1]:
                raise NetworkFormatError(f"expected {sizes[l + 1]} columns", path=path, field=f"weights[{l}][{i}]")
            matrix.append([_int_field(v, f"weights[{l}][{i}][{j}]", path) for j, v in enumerate(row)])
        vec = doc["biases"][l]
        if not isinstance(vec, list) or len(vec) != sizes[l + 1]:
            raise NetworkFormatError(f"expected {sizes[l + 1]} entries", path=path, field=f"biases[{l}]")
        vec = [_int_field(v, f"biases[{l}][{j}]", path) for j, v in enumerate(vec)]
        for name, values in ((f"weights[{l}]", np.ravel(matrix)), (f"biases[{l}]", vec)):
            bad = [v for v in values if abs(v) > p]
            if bad:
                raise NetworkFormatError(f"value {bad[0]} outside [-{p}, {p}]", path=path, field=name)
        weights.append(np.array(matrix, dtype=np.int64).reshape(sizes[l], sizes[l + 1]))
        biases.append(np.array(vec, dtype=np.int64))
    return IntegerNetwork(tuple(sizes), p, tuple(weights), tuple(biases))


def load(path) -> IntegerNetwork:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(exc.msg, path=path, line=exc.lineno) from exc
    return from_dict(doc, path)
