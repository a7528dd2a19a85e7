"""Network forward/backward math, optimizer step, serialization."""

import math

import numpy as np
import pytest

from latgait.errors import InvalidShape
from latgait.nn import (
    AdamState,
    adam_step,
    backward,
    forward,
    forward_cached,
    init_network,
    load_network,
    save_network,
)


def _worked_example_net():
    net = init_network([1, 2, 1], seed=0)
    net.weights[0][:] = np.array([[1.0, -1.0]])
    net.biases[0][:] = np.array([0.5, -0.5])
    net.weights[1][:] = np.array([[2.0], [3.0]])
    net.biases[1][:] = np.array([0.1])
    return net


def test_forward_worked_example():
    # hidden pre-activations (1.5, -1.5); relu keeps (1.5, 0);
    # output 1.5*2 + 0*3 + 0.1 = 3.1
    net = _worked_example_net()
    out = forward(net, np.array([[1.0]]))
    assert abs(out[0, 0] - 3.1) < 1e-12


def test_forward_zero_weights():
    net = init_network([3, 4, 2], seed=1)
    for w in net.weights:
        w[:] = 0.0
    for b in net.biases:
        b[:] = 0.0
    net.biases[-1][:] = np.array([0.7, -0.3])
    out = forward(net, np.zeros((5, 3)))
    assert np.max(np.abs(out - [0.7, -0.3])) < 1e-12


def test_relu_gates_dead_unit():
    # second hidden unit sits at -1.5; its outgoing weight cannot matter
    net = _worked_example_net()
    base = forward(net, np.array([[1.0]]))[0, 0]
    net.weights[1][1, 0] = 100.0
    assert forward(net, np.array([[1.0]]))[0, 0] == base


def test_backward_zero_upstream():
    net = init_network([2, 5, 3], seed=2)
    _, acts = forward_cached(net, np.array([[0.3, -0.4]]))
    grads, input_grad = backward(net, acts, np.zeros((1, 3)))
    for g in grads:
        assert np.all(g == 0.0)
    assert np.all(input_grad == 0.0)


def test_backward_affine_chain_rule():
    # single affine layer: dL/dW = x * upstream, dL/db = upstream,
    # dL/dx = W * upstream
    net = init_network([1, 1], seed=3)
    net.weights[0][:] = np.array([[2.0]])
    net.biases[0][:] = np.array([0.25])
    x = np.array([[0.7]])
    out, acts = forward_cached(net, x)
    assert abs(out[0, 0] - (2.0 * 0.7 + 0.25)) < 1e-12
    grads, input_grad = backward(net, acts, np.ones((1, 1)))
    assert abs(grads[0][0, 0] - 0.7) < 1e-12
    assert abs(grads[1][0] - 1.0) < 1e-12
    assert abs(input_grad[0, 0] - 2.0) < 1e-12


def test_backward_matches_finite_differences():
    net = init_network([3, 6, 2], seed=4)
    rng = np.random.default_rng(5)
    x = rng.normal(size=(1, 3))
    # keep pre-activations away from the relu kink
    _, acts = forward_cached(net, x)
    upstream = rng.normal(size=(1, 2))
    grads, input_grad = backward(net, acts, upstream)

    def loss(xv):
        return float(np.sum(forward(net, xv) * upstream))

    h = 1e-6
    params = list(net.weights) + list(net.biases)
    for p, g in zip(params, grads):
        flat = p.reshape(-1)
        gflat = np.asarray(g).reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            hi = loss(x)
            flat[i] = keep - h
            lo = loss(x)
            flat[i] = keep
            fd = (hi - lo) / (2 * h)
            denom = max(abs(fd), abs(gflat[i]), 1e-6)
            assert abs(fd - gflat[i]) / denom < 1e-5
    for i in range(3):
        xp = x.copy()
        xp[0, i] += h
        hi = loss(xp)
        xp[0, i] -= 2 * h
        lo = loss(xp)
        fd = (hi - lo) / (2 * h)
        denom = max(abs(fd), abs(input_grad[0, i]), 1e-6)
        assert abs(fd - input_grad[0, i]) / denom < 1e-5


def test_adam_zero_gradient_noop():
    params = [np.array([1.0, -2.0]), np.array([[0.5]])]
    before = [p.copy() for p in params]
    state = AdamState(0, [np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])
    adam_step(params, [np.zeros_like(p) for p in params], state, lr=0.1)
    for p, b in zip(params, before):
        assert np.array_equal(p, b)


@pytest.mark.parametrize("g", [1.0, 100.0])
def test_adam_first_step_magnitude(g):
    # first update is lr * g / (|g| + eps), i.e. almost exactly lr
    params = [np.array([0.3])]
    state = AdamState(0, [np.zeros(1)], [np.zeros(1)])
    adam_step(params, [np.array([g])], state, lr=1e-3)
    want = 0.3 - 1e-3 * g / (math.sqrt(g * g) + 1e-8)
    assert abs(params[0][0] - want) < 1e-15
    assert abs((0.3 - params[0][0]) - 1e-3) < 1e-9


def test_init_determinism():
    net_a = init_network([4, 8, 2], seed=7)
    net_b = init_network([4, 8, 2], seed=7)
    for wa, wb in zip(net_a.weights, net_b.weights):
        assert np.array_equal(wa, wb)
    net_c = init_network([4, 8, 2], seed=8)
    assert not np.array_equal(net_a.weights[0], net_c.weights[0])


def test_serialization_round_trip(tmp_path):
    net = init_network([5, 16, 16, 3], seed=9)
    path = tmp_path / "net.json"
    save_network(path, net)
    clone = load_network(path)
    assert clone.sizes == net.sizes
    for wa, wb in zip(net.weights, clone.weights):
        assert np.array_equal(wa, wb)
    for ba, bb in zip(net.biases, clone.biases):
        assert np.array_equal(ba, bb)


def test_forward_shape_validation():
    net = init_network([3, 4, 1], seed=10)
    with pytest.raises(InvalidShape):
        forward(net, np.zeros((2, 5)))
    with pytest.raises(InvalidShape):
        forward_cached(net, np.zeros(3))
