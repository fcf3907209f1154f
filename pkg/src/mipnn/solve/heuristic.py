"""Local-search warm start for the built-in solver.

The search works on the network parameters directly.  A candidate is scored
first by how many of its values the MIP encoding cannot represent (hidden
preactivations in ``(-eps, 0)`` and the objective's own exclusions), then by
the squared hinge loss, then by the training objective.  The hinge comes
before the objective because it is smoother: counting objectives have wide
plateaus that trap a hill climber well below the accuracy the stop rule
asks for.  The best network is handed to the solver as a value hint, so the
first dive of the search lands on it and it becomes the first incumbent.
"""

from __future__ import annotations

import time

import numpy as np

from mipnn.mip.build import DEFAULT_EPS, DEFAULT_MARGIN, VarMap
from mipnn.network import IntegerNetwork, output_scale


def score_network(weights, biases, X, Y, p_bound, objective, *, eps=DEFAULT_EPS, margin=DEFAULT_MARGIN, pwl=None):
    """``(-violations, -hinge, objective value)``; larger is better in every slot.

    The objective value is negated for min-hinge so that larger is better.
    """
    h = X
    bad = 0
    for w, b in zip(weights[:-1], biases[:-1]):
        pre = h @ w + b
        bad += int(np.count_nonzero((pre > -eps) & (pre < 0)))
        h = np.where(pre >= 0, 1.0, -1.0)
    y_hat = output_scale(p_bound, len(h[0])) * (h @ weights[-1] + biases[-1])
    z = y_hat * Y
    hinge = float(np.sum(np.maximum(0.0, margin - z) ** 2))
    if objective == "max-correct":
        nonneg = y_hat >= 0
        bad += int(np.count_nonzero(~nonneg & (y_hat > -eps)))
        bad += int(np.count_nonzero(nonneg.sum(axis=1) != 1))
        value = float(np.count_nonzero(nonneg & (Y > 0)))
    elif objective == "sat-margin":
        bad += int(np.count_nonzero((z > margin - eps) & (z < margin)))
        value = float(np.count_nonzero(z >= margin))
    else:
        value = -float(np.sum(pwl(z))) if pwl is not None else -hinge
    return (-bad, -hinge, value)


def local_search(
    data,
    layer_sizes,
    p_bound: int,
    objective: str,
    *,
    seed: int = 0,
    max_moves: int = 20000,
    patience: int = 4000,
    time_budget: float = 10.0,
    eps: float = DEFAULT_EPS,
    margin: float = DEFAULT_MARGIN,
    pwl=None,
) -> IntegerNetwork:
    """Hill-climb single-parameter changes, restarting after ``patience`` idle moves.

    Sideways moves are accepted, which lets the search drift across the
    plateaus that integer objectives are full of.
    """
    X = np.asarray(data.features, dtype=float)
    Y = np.asarray(data.labels, dtype=float)
    sizes = tuple(int(n) for n in layer_sizes)
    P = int(p_bound)
    rng = np.random.default_rng(seed)
    kw = dict(eps=eps, margin=margin, pwl=pwl)

    def restart():
        ws = [rng.integers(-P, P + 1, size=(sizes[l - 1], sizes[l])).astype(float) for l in range(1, len(sizes))]
        bs = [rng.integers(-P, P + 1, size=sizes[l]).astype(float) for l in range(1, len(sizes))]
        return ws, bs, score_network(ws, bs, X, Y, P, objective, **kw)

    weights, biases, current = restart()
    best, best_params = current, ([w.copy() for w in weights], [b.copy() for b in biases])
    last_gain = 0

    # one slot per parameter: (layer, row or -1 for the bias, column)
    slots = [(l, i, j) for l in range(len(weights)) for i in range(-1, sizes[l]) for j in range(sizes[l + 1])]
    deadline = time.perf_counter() + time_budget
    for move in range(max_moves):
        if (move & 255) == 0 and time.perf_counter() > deadline:
            break
        if move - last_gain > patience:
            weights, biases, current = restart()
            last_gain = move
        l, i, j = slots[rng.integers(len(slots))]
        arr = biases[l] if i < 0 else weights[l]
        idx = j if i < 0 else (i, j)
        old = arr[idx]
        new = rng.integers(-P, P)
        arr[idx] = new if new < old else new + 1
        candidate = score_network(weights, biases, X, Y, P, objective, **kw)
        if candidate >= current:
            if candidate > current:
                last_gain = move
            current = candidate
            if candidate > best:
                best = candidate
                best_params = ([w.copy() for w in weights], [b.copy() for b in biases])
        else:
            arr[idx] = old
    ws, bs = best_params
    return IntegerNetwork(sizes, P, tuple(w.astype(np.int64) for w in ws), tuple(b.astype(np.int64) for b in bs))


def network_hint(net: IntegerNetwork, varmap: VarMap) -> dict[int, int]:
    """Map weight and bias variables of ``varmap`` to the values in ``net``."""
    hint = {}
    for (i, l, j), var in varmap.weight.items():
        hint[var] = int(net.weights[l - 1][i, j])
    for (l, j), var in varmap.bias.items():
        hint[var] = int(net.biases[l - 1][j])
    return hint
