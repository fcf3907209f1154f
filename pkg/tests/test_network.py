import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mipnn.data import from_arrays
from mipnn.errors import InputError, NetworkFormatError
from mipnn.network import (
    IntegerNetwork,
    accuracy,
    argmax_tiebreak,
    forward,
    forward_batch,
    load,
    predict,
    save,
    sign,
    tie_break_rng,
    to_dict,
)
from tests.conftest import naive_forward, random_network


def test_zero_network_outputs():
    net = IntegerNetwork.zeros((3, 2, 2))
    act = forward(net, [0.3, 0.9, 0.1])
    assert np.all(act.preactivations[0] == 0)
    assert np.all(act.signs[0] == 1)
    assert np.all(act.outputs == 0)


def test_direct_evaluation():
    net = IntegerNetwork((1, 1, 1), 1, ([[1]], [[1]]), ([0], [1]))
    act = forward(net, [0.5])
    assert act.preactivations[0][0] == pytest.approx(0.5)
    assert act.signs[0][0] == 1
    assert act.outputs[0] == pytest.approx(2.0)


def test_sign_of_zero_is_positive():
    assert sign(0.0) == 1
    assert list(sign([-1e-12, 0.0, 3.0])) == [-1, 1, 1]


def test_forward_matches_naive_evaluator():
    rng = np.random.default_rng(0)
    for trial in range(1000):
        sizes = [3, 2, 2] if trial % 2 else [int(rng.integers(1, 5)), int(rng.integers(1, 5)), int(rng.integers(1, 4)), 2]
        p = int(rng.integers(1, 8))
        net = random_network(rng, sizes, p)
        x = rng.uniform(0, 1, sizes[0])
        np.testing.assert_allclose(forward(net, x).outputs, naive_forward(net, x), atol=1e-12)


def test_batch_forward_agrees_with_single():
    rng = np.random.default_rng(1)
    net = random_network(rng, [4, 3, 2], 3)
    X = rng.uniform(0, 1, (10, 4))
    batch = forward_batch(net, X).outputs
    for k in range(10):
        np.testing.assert_array_equal(batch[k], forward(net, X[k]).outputs)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 15))
def test_output_bound(seed, p):
    rng = np.random.default_rng(seed)
    net = random_network(rng, [3, 4, 2], p)
    act = forward(net, rng.uniform(0, 1, 3))
    assert np.all(np.abs(act.outputs) <= 2 + 1e-12)
    assert np.array_equal(act.signs[0], np.where(act.preactivations[0] >= 0, 1, -1))


def test_forward_rejects_wrong_width():
    with pytest.raises(InputError):
        forward(IntegerNetwork.zeros((3, 2, 2)), [0.1, 0.2])


def test_predict_examples():
    rng = np.random.default_rng(0)
    assert argmax_tiebreak([0.4, -0.2], rng) == 0
    assert argmax_tiebreak([-1.0, -0.5], rng) == 1
    picks = {argmax_tiebreak([0.0, 0.0], tie_break_rng(5, k)) for k in range(50)}
    assert picks == {0, 1}
    assert argmax_tiebreak([0.0, 0.0], tie_break_rng(5, 3)) == argmax_tiebreak([0.0, 0.0], tie_break_rng(5, 3))


def test_predict_uses_rng_only_for_ties():
    net = IntegerNetwork.zeros((2, 1, 2))
    a = predict(net, [0.1, 0.2], tie_break_rng(3, 0))
    b = predict(net, [0.1, 0.2], tie_break_rng(3, 0))
    assert a == b and a in (0, 1)


def test_accuracy_counts_correct_predictions():
    # output 0 follows the hidden sign of x - 0.5, output 1 its negation
    net = IntegerNetwork((1, 1, 2), 1, ([[1]], [[1, -1]]), ([-1], [0, 0]))
    X = np.array([[0.0], [1.0], [0.0], [1.0]])
    target = np.array([1, 0, 1, 1])  # last sample is wrong
    assert accuracy(net, from_arrays(X, target)) == 0.75


def test_accuracy_zero_network_with_favourable_ties():
    net = IntegerNetwork.zeros((2, 1, 2))
    X = np.full((6, 2), 0.5)
    seed = 11
    target = [argmax_tiebreak([0.0, 0.0], tie_break_rng(seed, k)) for k in range(6)]
    data = from_arrays(X, target)
    assert accuracy(net, data, seed) == 1.0
    assert accuracy(net, data, seed) == accuracy(net, data, seed)


def test_accuracy_empty_dataset():
    with pytest.raises(InputError):
        accuracy(IntegerNetwork.zeros((2, 1, 2)), from_arrays(np.zeros((0, 2)), np.zeros(0, dtype=int)))


def test_network_invariants():
    with pytest.raises(InputError):
        IntegerNetwork((2, 2), 1, ([[0, 0], [0, 0]],), ([0, 0],))
    with pytest.raises(InputError):
        IntegerNetwork((1, 1, 1), 1, ([[2]], [[1]]), ([0], [0]))
    with pytest.raises(InputError):
        IntegerNetwork.zeros((1, 1, 1), p_bound=0)
    net = IntegerNetwork.zeros((2, 2, 2))
    with pytest.raises(ValueError):
        net.weights[0][0, 0] = 1


def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(4)
    net = random_network(rng, [5, 3, 2], 7)
    path = tmp_path / "net.json"
    save(net, path)
    assert load(path) == net
    doc = json.loads(path.read_text())
    assert doc["format_version"] == 1 and doc["p_bound"] == 7


def test_load_rejects_out_of_domain(tmp_path):
    doc = to_dict(IntegerNetwork.zeros((2, 1, 2)))
    doc["weights"][1][0][1] = 2
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(NetworkFormatError, match=r"weights\[1\]"):
        load(path)


def test_load_rejects_shape_mismatch(tmp_path):
    doc = to_dict(IntegerNetwork.zeros((2, 1, 2)))
    doc["layer_sizes"] = [3, 1, 2]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(NetworkFormatError, match="weights"):
        load(path)


def test_load_reports_json_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n"format_version": 1,\n oops\n}')
    with pytest.raises(NetworkFormatError) as info:
        load(path)
    assert info.value.line == 3
