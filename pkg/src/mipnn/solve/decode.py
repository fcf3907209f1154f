"""Turning solver assignments into networks, and the training-accuracy stop rule."""

from __future__ import annotations

import math

import numpy as np

from mipnn.errors import DecodeError
from mipnn.mip.build import VarMap
from mipnn.network import IntegerNetwork, accuracy

INTEGRALITY_TOL = 1e-4


def round_integral(value: float, name: str = "") -> int:
    if value is None or not math.isfinite(value):
        raise DecodeError(f"no value for {name or 'variable'}")
    nearest = round(value)
    if abs(value - nearest) > INTEGRALITY_TOL:
        raise DecodeError(f"{name or 'variable'} = {value} is not integral within {INTEGRALITY_TOL}")
    return int(nearest)


def decode_network(assignment, varmap: VarMap, layer_sizes=None, p_bound=None) -> IntegerNetwork:
    """Read the weights and biases of ``assignment`` into an :class:`IntegerNetwork`."""
    sizes = tuple(layer_sizes or varmap.layer_sizes)
    P = int(p_bound or varmap.p_bound)
    weights, biases = [], []
    for l in range(1, len(sizes)):
        w = np.zeros((sizes[l - 1], sizes[l]), dtype=np.int64)
        b = np.zeros(sizes[l], dtype=np.int64)
        for j in range(sizes[l]):
            for i in range(sizes[l - 1]):
                w[i, j] = round_integral(float(assignment[varmap.weight[i, l, j]]), f"w_{i}_{l}_{j}")
            b[j] = round_integral(float(assignment[varmap.bias[l, j]]), f"b_{l}_{j}")
        for name, arr in (("weight", w), ("bias", b)):
            if np.any(np.abs(arr) > P):
                raise DecodeError(f"layer {l} has a {name} outside [-{P}, {P}]")
        weights.append(w)
        biases.append(b)
    return IntegerNetwork(sizes, P, tuple(weights), tuple(biases))


def _required(threshold: float, n: int) -> int:
    """Smallest count of correct samples out of ``n`` that reaches ``threshold``."""
    return math.ceil(threshold * n - 1e-9)


def max_correct_objective(assignment, varmap: VarMap, labels) -> int:
    Y = np.asarray(getattr(labels, "labels", labels))
    truth = np.argmax(Y, axis=1)
    return sum(round_integral(float(assignment[varmap.indicator[k, int(j)]])) for k, j in enumerate(truth))


def early_stop_check(assignment, varmap: VarMap, data, threshold: float, objective=None, seed: int = 0) -> bool:
    """True when the incumbent network is known to reach ``threshold`` training accuracy.

    For max-correct every counted sample is classified correctly, so the
    objective alone can certify the threshold; otherwise the incumbent is
    decoded and evaluated.
    """
    n = len(data.features)
    needed = _required(threshold, n)
    if varmap.objective == "max-correct":
        if objective is None:
            objective = max_correct_objective(assignment, varmap, data.labels)
        if objective >= needed:
            return True
    net = decode_network(assignment, varmap)
    return round(accuracy(net, data, seed) * n) >= needed


def objective_target(varmap: VarMap, n_samples: int, threshold: float | None):
    """Objective value that certifies ``threshold`` training accuracy, if one exists.

    A sat-margin sample whose outputs all clear the margin is classified
    correctly, and every other sample costs at least one point of objective.
    The hinge objective has no such certificate.
    """
    if threshold is None:
        return None
    needed = _required(threshold, n_samples)
    if varmap.objective == "max-correct":
        return float(needed)
    if varmap.objective == "sat-margin":
        n_out = varmap.layer_sizes[-1]
        return float(n_out * n_samples - (n_samples - needed))
    return None


def make_stop_callback(varmap: VarMap, data, threshold: float, seed: int = 0):
    """Incumbent callback for the built-in solver implementing the accuracy stop rule."""

    def callback(assignment, objective):
        return early_stop_check(assignment, varmap, data, threshold, objective, seed)

    return callback
