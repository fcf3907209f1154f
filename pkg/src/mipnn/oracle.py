"""Exhaustive enumeration of tiny training problems.

Every weight/bias vector of a one-hidden-layer network is evaluated directly,
without going through the MIP encoding, and the best objective value of each
training objective is reported.  Networks the MIP encoding cannot represent
are skipped: a hidden preactivation strictly between ``-eps`` and 0, an
output pattern that violates max-correct's one-nonnegative-output rule, or a
signed output strictly between ``margin - eps`` and ``margin`` for
sat-margin.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from mipnn.errors import InputError

CHUNK_ELEMENTS = 4_000_000


@dataclass(frozen=True)
class OracleResult:
    optimum: float
    hidden_params: np.ndarray  # shape (N1, N0 + 1): weights then bias, per hidden neuron
    output_params: np.ndarray  # shape (N2, N1 + 1)
    n_feasible: int


def _grid(n_digits: int, p_bound: int) -> np.ndarray:
    values = range(-p_bound, p_bound + 1)
    return np.array(list(itertools.product(values, repeat=n_digits)), dtype=np.int64).reshape(-1, n_digits)


def enumerate_optima(features, labels, layer_sizes, p_bound: int = 1, *, eps: float = 1e-5, margin: float = 0.5, pwl=None):
    """Best value of each objective over all parameter vectors.

    Returns a dict keyed by objective name.  ``pwl`` is a callable mapping the
    signed output to the approximated hinge loss; without it min-hinge is
    skipped.
    """
    X = np.asarray(features, dtype=float)
    Y = np.asarray(labels, dtype=np.int64)
    n0, n1, n2 = (int(n) for n in layer_sizes) if len(layer_sizes) == 3 else (None,) * 3
    if n0 is None:
        raise InputError("enumeration supports exactly one hidden layer")
    T = len(X)
    if X.shape != (T, n0) or Y.shape != (T, n2):
        raise InputError("data does not match the architecture")

    # hidden layer: one row per parameter vector, digits grouped per neuron
    hidden = _grid(n1 * (n0 + 1), p_bound).reshape(-1, n1, n0 + 1)
    pre = np.einsum("ki,hji->hkj", X, hidden[:, :, :n0].astype(float)) + hidden[:, None, :, n0]
    hidden_ok = ~np.any((pre > -eps) & (pre < 0), axis=(1, 2))
    signs = np.where(pre >= 0, 1, -1).astype(np.int64)  # (H, T, N1)
    # the output layer only sees the sign pattern, so one representative per
    # distinct pattern suffices; multiplicities keep the feasible counts exact
    ok_idx = np.flatnonzero(hidden_ok)
    patterns, first, mult = np.unique(signs[ok_idx].reshape(len(ok_idx), -1), axis=0,
                                      return_index=True, return_counts=True)
    hidden = hidden[ok_idx[first]]
    signs = patterns.reshape(-1, T, n1)

    out = _grid(n2 * (n1 + 1), p_bound).reshape(-1, n2, n1 + 1)
    out_w = out[:, :, :n1]  # (O, N2, N1)
    out_b = out[:, :, n1]  # (O, N2)
    scale = 2.0 / (p_bound * (n1 + 1))
    true_class = np.argmax(Y, axis=1)

    best = {}
    n_feasible = {}
    H, O = len(hidden), len(out)
    chunk = max(1, CHUNK_ELEMENTS // max(1, O * T * n2))
    for start in range(0, H, chunk):
        stop = min(H, start + chunk)
        raw = np.einsum("hki,oji->hokj", signs[start:stop], out_w) + out_b[None, :, None, :]
        y_hat = scale * raw  # (h, O, T, N2)
        z = y_hat * Y[None, None, :, :]
        ok_h = np.ones((stop - start, 1), dtype=bool)
        weight = mult[start:stop, None]

        nonneg = y_hat >= 0
        clean = np.all(nonneg | (y_hat <= -eps), axis=3)
        unique = np.sum(nonneg, axis=3) == 1
        mc_ok = ok_h & np.all(clean & unique, axis=2)
        hits = np.take_along_axis(nonneg, true_class[None, None, :, None], axis=3)[..., 0]
        scores = {"max-correct": (np.sum(hits, axis=2).astype(float), mc_ok)}

        sat = z >= margin
        sm_ok = ok_h & ~np.any((z > margin - eps) & (z < margin), axis=(2, 3))
        scores["sat-margin"] = (np.sum(sat, axis=(2, 3)).astype(float), sm_ok)

        if pwl is not None:
            loss = np.sum(pwl(z), axis=(2, 3))
            scores["min-hinge"] = (-loss, np.broadcast_to(ok_h, loss.shape))

        for name, (value, ok) in scores.items():
            n_feasible[name] = n_feasible.get(name, 0) + int(np.sum(ok * weight))
            if not ok.any():
                continue
            masked = np.where(ok, value, -np.inf)
            flat = int(np.argmax(masked))
            v = masked.flat[flat]
            if name not in best or v > best[name][0] + 1e-12:
                h, o = np.unravel_index(flat, masked.shape)
                best[name] = (v, hidden[start + h], out[o])

    results = {}
    for name, (v, hid, o) in best.items():
        optimum = -v if name == "min-hinge" else v
        results[name] = OracleResult(float(optimum), hid.copy(), o.copy(), n_feasible[name])
    return results


def network_from_params(hidden_params, output_params, p_bound: int):
    """IntegerNetwork from the parameter layout used by :class:`OracleResult`."""
    from mipnn.network import IntegerNetwork

    hidden_params = np.asarray(hidden_params)
    output_params = np.asarray(output_params)
    n0 = hidden_params.shape[1] - 1
    n1 = hidden_params.shape[0]
    n2 = output_params.shape[0]
    return IntegerNetwork(
        (n0, n1, n2),
        p_bound,
        (hidden_params[:, :n0].T, output_params[:, :n1].T),
        (hidden_params[:, n0], output_params[:, n1]),
    )


def random_instance(n_features: int, n_samples: int, n_classes: int = 2, seed: int = 0):
    """Uniform features in [0, 1] with uniformly drawn classes."""
    from mipnn.data import from_arrays

    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(n_samples, n_features))
    target = rng.integers(0, n_classes, size=n_samples)
    return from_arrays(X, target, n_classes)
