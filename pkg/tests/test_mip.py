import itertools
import math

import numpy as np
import pytest

from mipnn.data import from_arrays
from mipnn.errors import BuildError, InputError
from mipnn.mip import (
    BINARY,
    CONTINUOUS,
    LinExpr,
    MipModel,
    PwlSpec,
    attach_max_correct,
    attach_min_hinge,
    attach_sat_margin,
    build_base,
    build_training_model,
    compute_bigM,
    expected_counts,
    linearize_indicators,
    squared_hinge,
)
from mipnn.oracle import random_instance


def one_sample(width=2, target=0, x=None):
    x = np.full((1, width), 0.5) if x is None else np.atleast_2d(x)
    return from_arrays(x, [target])


def test_base_counts_small():
    model, vm = build_base(one_sample(), [2, 2, 2], 1)
    roles = model.stats()["roles"]
    assert roles["weight"] == 8 and roles["bias"] == 4
    assert roles["activation"] == 2 and roles["connection"] == 4
    assert len(model.indicators) == 4
    assert len(model.constraints) == 16
    assert all(model.variables[v].kind == CONTINUOUS for v in vm.connection.values())
    # first-layer products are expressions over the weights, not variables
    assert set(vm.preactivation[0, 1, 0].terms) == {vm.weight[0, 1, 0], vm.weight[1, 1, 0], vm.bias[1, 0]}


def test_counts_match_closed_form_adult_width():
    data = random_instance(107, 280, 2, seed=0)
    for objective in ("max-correct", "min-hinge", "sat-margin"):
        model, _ = build_training_model(data, [107, 16, 2], 1, objective)
        stats, expected = model.stats(), expected_counts([107, 16, 2], 280, objective)
        for key in ("variables", "binary", "integer", "continuous", "linear_constraints", "indicator_constraints"):
            assert stats[key] == expected[key], (objective, key)


def test_counts_two_hidden_layers():
    data = random_instance(3, 4, 3, seed=1)
    model, _ = build_training_model(data, [3, 2, 2, 3], 2, "max-correct")
    expected = expected_counts([3, 2, 2, 3], 4, "max-correct")
    assert model.stats()["variables"] == expected["variables"]
    assert len(linearize_indicators(model).constraints) == expected["linearized_constraints"]


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(p_bound=0),
        dict(p_bound=1.5),
        dict(layer_sizes=[2, 2]),
        dict(data=np.array([[0.5, 1.5]])),
        dict(data=np.zeros((0, 2))),
    ],
)
def test_build_errors(kwargs):
    args = dict(data=one_sample(), layer_sizes=[2, 2, 2], p_bound=1)
    args.update(kwargs)
    with pytest.raises(BuildError):
        build_base(args["data"], args["layer_sizes"], args["p_bound"])


def test_bigm_formula():
    assert compute_bigM([107, 16, 2], 1, 1) == 108
    assert compute_bigM([3, 16, 4, 2], 15, 2) == 255
    assert compute_bigM([107, 16, 2], 7, 2) == 2
    with pytest.raises(InputError):
        compute_bigM([2, 2, 2], 1, 3)


def feasible_c_interval(model, c, fixed):
    """Interval of c allowed by the rows mentioning it, other variables fixed."""
    lo, hi = model.variables[c].lb, model.variables[c].ub
    for row in model.constraints:
        terms = dict(row.terms)
        if c not in terms:
            continue
        rest = sum(coef * fixed[v] for v, coef in terms.items() if v != c)
        a = terms[c]
        bound = (row.rhs - rest) / a
        upper = (row.sense == "<=") == (a > 0)
        if upper:
            hi = min(hi, bound)
        else:
            lo = max(lo, bound)
    return lo, hi


@pytest.mark.parametrize("P", [1, 3, 7, 15])
def test_linking_forces_signed_weight(P):
    model, vm = build_base(one_sample(1), [1, 1, 1], P)
    c = vm.connection[0, 0, 2, 0]
    w = vm.weight[0, 2, 0]
    u = vm.activation[0, 1, 0]
    for uv in (0, 1):
        for wv in range(-P, P + 1):
            lo, hi = feasible_c_interval(model, c, {w: wv, u: uv})
            assert lo == hi == (2 * uv - 1) * wv


def test_pwl_bounds():
    pwl = PwlSpec.uniform(0.25)
    z = np.arange(-2.0, 2.0 + 1e-12, 1e-3)
    gap = pwl(z) - squared_hinge(z)
    assert gap.min() >= -1e-12
    assert gap.max() <= 0.25**2 / 4 + 1e-9
    np.testing.assert_allclose(pwl(pwl.breakpoints), squared_hinge(pwl.breakpoints), atol=1e-9)
    assert 0.5 in pwl.breakpoints


def test_pwl_examples():
    pwl = PwlSpec.uniform()
    assert pwl(0.5) == 0.0
    assert pwl(-0.5) == pytest.approx(1.0)
    with pytest.raises(InputError):
        PwlSpec(np.array([-1.0, 2.0]))
    with pytest.raises(InputError):
        PwlSpec(np.array([-2.0, 0.0, 0.0, 2.0]))


def test_pwl_secants_are_upper_envelope():
    pwl = PwlSpec.uniform(0.5)
    z = np.linspace(-2, 2, 801)
    envelope = np.max([s * z + b for s, b in pwl.secants()], axis=0)
    np.testing.assert_allclose(np.maximum(envelope, 0), pwl(z), atol=1e-12)


def test_max_correct_structure():
    model, vm = build_base(one_sample(target=1), [2, 2, 2], 1)
    attach_max_correct(model, vm, one_sample(target=1).labels)
    assert len(vm.indicator) == 2
    assert len(model.objective.expr.terms) == 1
    assert vm.indicator[0, 1] in model.objective.expr.terms
    assert len(model.indicators) == 4 + 4
    assert sum(c.name.startswith("excl") for c in model.constraints) == 1
    with pytest.raises(BuildError):
        attach_sat_margin(model, vm, one_sample().labels)


def test_labels_validated():
    model, vm = build_base(one_sample(), [2, 2, 2], 1)
    with pytest.raises(InputError):
        attach_max_correct(model, vm, np.array([[1, 1]]))
    with pytest.raises(InputError):
        attach_max_correct(model, vm, np.array([[1, 0]]))


def test_sat_margin_structure():
    data = random_instance(2, 5, 2, seed=3)
    model, vm = build_training_model(data, [2, 2, 2], 1, "sat-margin")
    assert len(vm.indicator) == 10
    assert len(model.objective.expr.terms) == 10
    assert all(model.variables[v].kind == BINARY for v in vm.indicator.values())
    with pytest.raises(InputError):
        build_training_model(data, [2, 2, 2], 1, "sat-margin", margin=0.0)


def test_min_hinge_epigraph():
    data = random_instance(2, 2, 2, seed=4)
    model, vm = build_base(data, [2, 2, 2], 1)
    pwl = PwlSpec.uniform()
    attach_min_hinge(model, vm, data.labels, pwl)
    assert model.objective.sense == "min"
    assert len(vm.epigraph) == 4
    hinge_rows = [c for c in model.constraints if c.name.startswith("hinge_0_0_")]
    assert 2 * len(hinge_rows) == expected_counts([2, 2, 2], 1, "min-hinge")["linear_constraints"] - 16
    with pytest.raises(InputError):
        attach_min_hinge(build_base(data, [2, 2, 2], 1)[0], vm, data.labels, pwl=[0, 1])


def test_linearized_bigm_values():
    data = random_instance(3, 1, 2, seed=0)
    model, _ = build_training_model(data, [3, 2, 2], 2, "sat-margin")
    lin = linearize_indicators(model)
    assert not lin.indicators and lin.metadata["linearized"]
    rows = {c.name: c for c in lin.constraints}
    guard = lambda row: max(abs(coef) for v, coef in row.terms if lin.variables[v].kind == BINARY)
    assert guard(rows["act_pos_0_1_0"]) == pytest.approx(compute_bigM([3, 2, 2], 2, 1))
    assert guard(rows["act_neg_0_1_0"]) == pytest.approx(compute_bigM([3, 2, 2], 2, 1) + 1e-5)
    assert guard(rows["sat_pos_0_0"]) == pytest.approx(0.5 + 2)
    assert guard(rows["sat_neg_0_0"]) == pytest.approx(2 - 0.5 + 1e-5)


def test_linearization_rejects_unbounded():
    model = MipModel()
    g = model.add_var("g", BINARY)
    x = model.add_var("x", CONTINUOUS, -math.inf, math.inf)
    model.add_indicator(g, 1, LinExpr({x: 1}), ">=", 0.0)
    with pytest.raises(BuildError):
        linearize_indicators(model)


@pytest.mark.parametrize("x", [0.0, 0.3, 1.0, 1.0 - 4e-6])
def test_single_neuron_linearization_equivalence(x):
    data = one_sample(1, x=[[x]])
    model, vm = build_base(data, [1, 1, 1], 1)
    lin = linearize_indicators(model)
    w, b, u = vm.weight[0, 1, 0], vm.bias[1, 0], vm.activation[0, 1, 0]
    c = vm.connection[0, 0, 2, 0]
    for wv, bv, uv in itertools.product((-1, 0, 1), (-1, 0, 1), (0, 1)):
        a = np.zeros(model.n_vars)
        a[w], a[b], a[u] = wv, bv, uv
        a[c] = 0.0  # output weight 0
        ind_ok = model.max_violation(a) <= 1e-12
        lin_ok = lin.max_violation(a) <= 1e-12
        assert ind_ok == lin_ok, (wv, bv, uv)


def test_model_guards():
    model = MipModel()
    x = model.add_var("x", "integer", -1, 1)
    with pytest.raises(BuildError):
        model.add_indicator(x, 1, LinExpr({x: 1}), ">=", 0.0)
    with pytest.raises(BuildError):
        model.add_constr(LinExpr({5: 1}), "<=", 0)
    with pytest.raises(BuildError):
        model.add_var("x", BINARY)
    assert model.var_index("x") == x and "x" in model.dump()


def test_linearized_output_bigm_for_max_correct():
    data = random_instance(2, 1, 2, seed=0)
    lin = linearize_indicators(build_training_model(data, [2, 2, 2], 1, "max-correct")[0])
    rows = {c.name: c for c in lin.constraints}
    o = lin.var_index("o_0_0")
    assert dict(rows["out_pos_0_0"].terms)[o] == pytest.approx(-2.0)
    assert dict(rows["out_neg_0_0"].terms)[o] == pytest.approx(-2.0 - 1e-5)
