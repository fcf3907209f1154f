"""Training models: the shared network encoding plus one objective.

Variable naming (also used in exported MPS files)::

    w_i_l_j     weight from neuron i of layer l-1 to neuron j of layer l
    b_l_j       bias of neuron j of layer l
    u_k_l_j     activation indicator of hidden neuron j of layer l on sample k
    c_k_i_l_j   signed connection value, layers l >= 2
    o_k_j       per-output indicator of the objective
    t_k_j       epigraph of the hinge loss

Layers are numbered from 1; neurons and samples from 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from mipnn.errors import BuildError, InputError
from mipnn.mip.model import BINARY, CONTINUOUS, INTEGER, LinExpr, MipModel, expr_range
from mipnn.mip.pwl import PwlSpec
from mipnn.network import output_scale

DEFAULT_EPS = 1e-5
DEFAULT_MARGIN = 0.5
OBJECTIVES = ("max-correct", "min-hinge", "sat-margin")


@dataclass
class VarMap:
    """Where each network quantity lives in a :class:`MipModel`."""

    layer_sizes: tuple[int, ...]
    p_bound: int
    eps: float
    weight: dict = field(default_factory=dict)  # (i, l, j) -> var
    bias: dict = field(default_factory=dict)  # (l, j) -> var
    activation: dict = field(default_factory=dict)  # (k, l, j) -> var
    connection: dict = field(default_factory=dict)  # (k, i, l, j) -> var, l >= 2
    preactivation: dict = field(default_factory=dict)  # (k, l, j) -> LinExpr
    output: dict = field(default_factory=dict)  # (k, j) -> LinExpr
    indicator: dict = field(default_factory=dict)  # (k, j) -> var
    epigraph: dict = field(default_factory=dict)  # (k, j) -> var
    objective: str | None = None
    margin: float | None = None
    n_samples: int = 0

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1


def compute_bigM(layer_sizes, p_bound: int, layer: int) -> float:
    """Bound on the magnitude of the quantity guarded at ``layer``.

    Hidden layers guard the preactivation, bounded by ``P * (N_{l-1} + 1)``
    because every input term and the bias lie in ``[-P, P]``.  The output
    layer guards the normalized output, bounded by 2.
    """
    n_layers = len(layer_sizes) - 1
    if not 1 <= layer <= n_layers:
        raise InputError(f"layer must be in 1..{n_layers}, got {layer}")
    if layer == n_layers:
        return 2.0
    return float(p_bound * (layer_sizes[layer - 1] + 1))


def _features_of(data):
    return np.asarray(getattr(data, "features", data), dtype=float)


def build_base(data, layer_sizes, p_bound: int, eps: float = DEFAULT_EPS) -> tuple[MipModel, VarMap]:
    """Encode a sign-activation network evaluated on every sample of ``data``."""
    X = _features_of(data)
    sizes = tuple(int(n) for n in layer_sizes)
    if isinstance(p_bound, bool) or int(p_bound) != p_bound or p_bound < 1:
        raise BuildError(f"parameter bound must be a positive integer, got {p_bound}")
    p_bound = int(p_bound)
    if X.ndim != 2 or len(X) == 0:
        raise BuildError("need at least one training sample")
    if len(sizes) < 3 or any(n < 1 for n in sizes):
        raise BuildError(f"architecture needs an input, at least one hidden and an output layer: {sizes}")
    if X.shape[1] != sizes[0]:
        raise BuildError(f"features have width {X.shape[1]}, architecture expects {sizes[0]}")
    if X.min() < 0 or X.max() > 1:
        raise BuildError("features must lie in [0, 1]")
    if eps <= 0:
        raise BuildError("eps must be positive")

    n_layers = len(sizes) - 1
    n_samples = len(X)
    P = p_bound
    model = MipModel(
        metadata={
            "n_samples": n_samples,
            "layer_sizes": list(sizes),
            "p_bound": P,
            "eps": eps,
        }
    )
    vm = VarMap(sizes, P, eps, n_samples=n_samples)

    for l in range(1, n_layers + 1):
        for j in range(sizes[l]):
            for i in range(sizes[l - 1]):
                vm.weight[i, l, j] = model.add_var(f"w_{i}_{l}_{j}", INTEGER, -P, P, "weight", l)
            vm.bias[l, j] = model.add_var(f"b_{l}_{j}", INTEGER, -P, P, "bias", l)

    for k in range(n_samples):
        for l in range(1, n_layers):
            for j in range(sizes[l]):
                vm.activation[k, l, j] = model.add_var(f"u_{k}_{l}_{j}", BINARY, role="activation")
        for l in range(2, n_layers + 1):
            for j in range(sizes[l]):
                for i in range(sizes[l - 1]):
                    vm.connection[k, i, l, j] = model.add_var(f"c_{k}_{i}_{l}_{j}", CONTINUOUS, -P, P, "connection")

    two_p = 2.0 * P
    for k in range(n_samples):
        for l in range(1, n_layers + 1):
            for j in range(sizes[l]):
                if l == 1:
                    # first-layer products have constant data coefficients
                    pre = LinExpr((vm.weight[i, 1, j], X[k, i]) for i in range(sizes[0]))
                else:
                    pre = LinExpr((vm.connection[k, i, l, j], 1.0) for i in range(sizes[l - 1]))
                pre.add_term(vm.bias[l, j], 1.0)
                vm.preactivation[k, l, j] = pre
                if l < n_layers:
                    u = vm.activation[k, l, j]
                    bound = compute_bigM(sizes, P, l)
                    model.add_indicator(u, 1, pre, ">=", 0.0, f"act_pos_{k}_{l}_{j}", bound)
                    model.add_indicator(u, 0, pre, "<=", -eps, f"act_neg_{k}_{l}_{j}", bound)
                else:
                    vm.output[k, j] = pre * output_scale(P, sizes[l - 1])
                if l >= 2:
                    for i in range(sizes[l - 1]):
                        c = vm.connection[k, i, l, j]
                        w = vm.weight[i, l, j]
                        u = vm.activation[k, l - 1, i]
                        tag = f"{k}_{i}_{l}_{j}"
                        model.add_constr(LinExpr({c: 1, w: -1, u: two_p}), "<=", two_p, f"link1_{tag}")
                        model.add_constr(LinExpr({c: 1, w: 1, u: -two_p}), "<=", 0.0, f"link2_{tag}")
                        model.add_constr(LinExpr({c: 1, w: -1, u: -two_p}), ">=", -two_p, f"link3_{tag}")
                        model.add_constr(LinExpr({c: 1, w: 1, u: two_p}), ">=", 0.0, f"link4_{tag}")
    return model, vm


def _check_labels(labels, vm: VarMap) -> np.ndarray:
    Y = np.asarray(getattr(labels, "labels", labels))
    n_out = vm.layer_sizes[-1]
    if Y.ndim != 2 or Y.shape != (vm.n_samples, n_out):
        raise InputError(f"labels have shape {Y.shape}, expected {(vm.n_samples, n_out)}")
    if not np.all(np.isin(Y, (-1, 1))):
        raise InputError("labels must be encoded as +1/-1")
    if not np.all((Y == 1).sum(axis=1) == 1):
        raise InputError("each sample needs exactly one true class")
    return Y.astype(np.int64)


def _claim_objective(model: MipModel, vm: VarMap, name: str):
    if vm.objective is not None:
        raise BuildError(f"objective {vm.objective!r} is already attached")
    vm.objective = name
    model.metadata["objective"] = name


def attach_max_correct(model: MipModel, vm: VarMap, labels) -> None:
    """Maximize the number of samples whose true-class output is the only nonnegative one."""
    Y = _check_labels(labels, vm)
    _claim_objective(model, vm, "max-correct")
    n_out = vm.layer_sizes[-1]
    bound = compute_bigM(vm.layer_sizes, vm.p_bound, vm.n_layers)
    objective = LinExpr()
    for k in range(vm.n_samples):
        for j in range(n_out):
            o = model.add_var(f"o_{k}_{j}", BINARY, role="indicator")
            vm.indicator[k, j] = o
            y_hat = vm.output[k, j]
            model.add_indicator(o, 1, y_hat, ">=", 0.0, f"out_pos_{k}_{j}", bound)
            model.add_indicator(o, 0, y_hat, "<=", -vm.eps, f"out_neg_{k}_{j}", bound)
            if Y[k, j] == 1:
                objective.add_term(o, 1.0)
        # one nonnegative output per sample
        model.add_constr(LinExpr((vm.indicator[k, j], 1.0) for j in range(n_out)), "=", 1.0, f"excl_{k}")
    model.set_objective("max", objective)


def attach_min_hinge(model: MipModel, vm: VarMap, labels, pwl: PwlSpec | None = None) -> None:
    """Minimize the piecewise-linear squared hinge summed over samples and outputs."""
    Y = _check_labels(labels, vm)
    pwl = pwl or PwlSpec.uniform()
    if not isinstance(pwl, PwlSpec):
        raise InputError("pwl must be a PwlSpec")
    _claim_objective(model, vm, "min-hinge")
    vm.margin = pwl.margin
    model.metadata["pwl_breakpoints"] = pwl.breakpoints.tolist()
    model.metadata["margin"] = pwl.margin
    secants = pwl.secants()
    t_max = float(pwl.values.max())
    objective = LinExpr()
    for k in range(vm.n_samples):
        for j in range(vm.layer_sizes[-1]):
            t = model.add_var(f"t_{k}_{j}", CONTINUOUS, 0.0, t_max, "epigraph")
            vm.epigraph[k, j] = t
            z = vm.output[k, j] * float(Y[k, j])
            for s, (slope, intercept) in enumerate(secants):
                if slope == 0.0 and intercept <= 0.0:
                    continue  # implied by t >= 0
                model.add_constr(z * slope - LinExpr({t: 1.0}), "<=", -intercept, f"hinge_{k}_{j}_{s}")
            objective.add_term(t, 1.0)
    model.set_objective("min", objective)


def attach_sat_margin(model: MipModel, vm: VarMap, labels, margin: float = DEFAULT_MARGIN) -> None:
    """Maximize the number of (sample, output) pairs whose signed output reaches ``margin``."""
    if not 0.0 < margin <= 1.0:
        raise InputError(f"margin must lie in (0, 1], got {margin}")
    Y = _check_labels(labels, vm)
    _claim_objective(model, vm, "sat-margin")
    vm.margin = float(margin)
    model.metadata["margin"] = float(margin)
    bound = compute_bigM(vm.layer_sizes, vm.p_bound, vm.n_layers)
    objective = LinExpr()
    for k in range(vm.n_samples):
        for j in range(vm.layer_sizes[-1]):
            o = model.add_var(f"o_{k}_{j}", BINARY, role="indicator")
            vm.indicator[k, j] = o
            z = vm.output[k, j] * float(Y[k, j])
            model.add_indicator(o, 1, z, ">=", margin, f"sat_pos_{k}_{j}", bound)
            model.add_indicator(o, 0, z, "<=", margin - vm.eps, f"sat_neg_{k}_{j}", bound)
            objective.add_term(o, 1.0)
    model.set_objective("max", objective)


def attach_objective(model: MipModel, vm: VarMap, labels, objective: str, *, margin=DEFAULT_MARGIN, pwl=None):
    if objective == "max-correct":
        attach_max_correct(model, vm, labels)
    elif objective == "min-hinge":
        attach_min_hinge(model, vm, labels, pwl or PwlSpec.uniform(margin=margin))
    elif objective == "sat-margin":
        attach_sat_margin(model, vm, labels, margin)
    else:
        raise InputError(f"unknown objective {objective!r}; choose from {OBJECTIVES}")


def build_training_model(data, layer_sizes, p_bound, objective, *, eps=DEFAULT_EPS, margin=DEFAULT_MARGIN, pwl=None):
    """Base encoding of ``data`` with ``objective`` attached."""
    model, vm = build_base(data, layer_sizes, p_bound, eps)
    attach_objective(model, vm, data.labels, objective, margin=margin, pwl=pwl)
    return model, vm


def expected_counts(layer_sizes, n_samples: int, objective: str | None = None, pwl: PwlSpec | None = None) -> dict:
    """Closed-form variable and constraint counts of a training model.

    Keys match :meth:`MipModel.stats`.  ``linearized_constraints`` is the
    linear row count after :func:`linearize_indicators`, which turns every
    indicator into exactly one row.
    """
    sizes = tuple(int(n) for n in layer_sizes)
    T = int(n_samples)
    pairs = [sizes[l - 1] * sizes[l] for l in range(1, len(sizes))]
    hidden = sum(sizes[1:-1])
    n_out = sizes[-1]
    weights, biases = sum(pairs), sum(sizes[1:])
    activations = T * hidden
    connections = T * sum(pairs[1:])
    binary, continuous = activations, connections
    indicators = 2 * T * hidden
    linear = 4 * connections
    if objective in ("max-correct", "sat-margin"):
        binary += T * n_out
        indicators += 2 * T * n_out
        if objective == "max-correct":
            linear += T
    elif objective == "min-hinge":
        secants = (pwl or PwlSpec.uniform()).secants()
        cuts = sum(1 for slope, intercept in secants if not (slope == 0.0 and intercept <= 0.0))
        continuous += T * n_out
        linear += T * n_out * cuts
    elif objective is not None:
        raise InputError(f"unknown objective {objective!r}")
    return {
        "variables": weights + biases + binary + continuous,
        "binary": binary,
        "integer": weights + biases,
        "continuous": continuous,
        "linear_constraints": linear,
        "indicator_constraints": indicators,
        "linearized_constraints": linear + indicators,
    }


def linearize_indicators(model: MipModel, big_m_scale: float = 1.0) -> MipModel:
    """Replace every indicator constraint by a big-M inequality.

    For ``(g = v) => expr >= r`` the big-M is ``r - min(expr)`` and for
    ``expr <= r`` it is ``max(expr) - r``, with the range of ``expr`` taken
    from the indicator's ``expr_bound`` or, failing that, from the variable
    bounds.  ``big_m_scale`` exists for fault-injection tests only.
    """
    out = model.copy()
    out.indicators = []
    out.metadata["linearized"] = True
    for ind in model.indicators:
        c = ind.constraint
        if ind.expr_bound is not None:
            lo, hi = -float(ind.expr_bound), float(ind.expr_bound)
        else:
            lo, hi = expr_range(model, c.terms)
        senses = (">=", "<=") if c.sense == "=" else (c.sense,)
        for sense in senses:
            big_m = (c.rhs - lo) if sense == ">=" else (hi - c.rhs)
            if not math.isfinite(big_m):
                raise BuildError(f"indicator {c.name!r} guards an unbounded expression")
            if big_m <= 0:
                continue  # holds for every point in the bounds
            big_m *= big_m_scale
            expr = LinExpr(dict(c.terms))
            g = ind.guard
            suffix = "" if c.sense != "=" else ("_ge" if sense == ">=" else "_le")
            # slack is big_m when the guard literal is off
            sign = 1.0 if sense == "<=" else -1.0
            if ind.value == 1:
                expr.add_term(g, sign * big_m)
                rhs = c.rhs + sign * big_m
            else:
                expr.add_term(g, -sign * big_m)
                rhs = c.rhs
            out.add_constr(expr, sense, rhs, c.name + suffix)
    return out
