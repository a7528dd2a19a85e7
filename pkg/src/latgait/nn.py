"""Small dense networks with hand-written reverse-mode gradients.

Hidden layers are ReLU, the output layer is linear.  Weights are stored
(fan_in, fan_out) so batched forward is X @ W + b.  backward also returns
the gradient with respect to the input batch, which the gait-policy
trainer uses to move latent codes.  Serialization is JSON with Python's
shortest-round-trip float encoding, so save/load is bit-exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidShape


@dataclass
class Network:
    sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def in_dim(self) -> int:
        return self.sizes[0]

    @property
    def out_dim(self) -> int:
        return self.sizes[-1]

    def parameters(self) -> list[np.ndarray]:
        """Flat view used by the optimizer; weights first, then biases."""
        return list(self.weights) + list(self.biases)

    def copy(self) -> "Network":
        return Network(
            sizes=list(self.sizes),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )


def init_network(sizes: list[int], seed: int) -> Network:
    """Glorot-uniform weights, zero biases."""
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ValueError(f"bad layer sizes {sizes}")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Network(sizes=list(sizes), weights=weights, biases=biases)


def forward_cached(net: Network, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Batched forward pass.  Returns (output, activations); activations[0]
    is the input and the rest are post-ReLU hidden activations."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != net.in_dim:
        raise InvalidShape(f"input must be (batch, {net.in_dim}), got {x.shape}")
    acts = [x]
    h = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w + b
        if i < last:
            h = np.maximum(h, 0.0)
            acts.append(h)
    return h, acts


def forward(net: Network, x: np.ndarray) -> np.ndarray:
    """Forward pass accepting a single input vector or a batch."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    y, _ = forward_cached(net, x)
    return y[0] if single else y


def backward(
    net: Network, acts: list[np.ndarray], upstream: np.ndarray
) -> tuple[list[np.ndarray], np.ndarray]:
    """Backpropagate upstream = dL/doutput through the cached forward pass.

    Returns (param_grads, input_grad) with param_grads ordered like
    Network.parameters(): weight gradients then bias gradients.
    """
    upstream = np.asarray(upstream, dtype=float)
    if upstream.shape != (acts[0].shape[0], net.out_dim):
        raise InvalidShape(
            f"upstream must be ({acts[0].shape[0]}, {net.out_dim}), got {upstream.shape}"
        )
    n_layers = len(net.weights)
    w_grads: list[np.ndarray] = [np.empty(0)] * n_layers
    b_grads: list[np.ndarray] = [np.empty(0)] * n_layers
    delta = upstream
    for i in range(n_layers - 1, -1, -1):
        w_grads[i] = acts[i].T @ delta
        b_grads[i] = delta.sum(axis=0)
        delta = delta @ net.weights[i].T
        if i > 0:
            delta = delta * (acts[i] > 0.0)
    return w_grads + b_grads, delta


@dataclass
class AdamState:
    """First/second moment accumulators for a fixed list of parameters."""

    step: int
    m: list[np.ndarray]
    v: list[np.ndarray]

    @classmethod
    def for_params(cls, params: list[np.ndarray]) -> "AdamState":
        return cls(
            step=0,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def adam_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """Bias-corrected Adam update, applied to each parameter in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise InvalidShape("params, grads, and optimizer state must align")
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def network_to_dict(net: Network) -> dict:
    return {
        "sizes": list(net.sizes),
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def network_from_dict(d: dict) -> Network:
    sizes = [int(s) for s in d["sizes"]]
    weights = [np.asarray(w, dtype=float) for w in d["weights"]]
    biases = [np.asarray(b, dtype=float) for b in d["biases"]]
    net = Network(sizes=sizes, weights=weights, biases=biases)
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        if weights[i].shape != (fan_in, fan_out) or biases[i].shape != (fan_out,):
            raise InvalidShape(f"layer {i} arrays do not match sizes {sizes}")
    return net


def save_network(path, net: Network) -> None:
    with open(path, "w") as fh:
        json.dump(network_to_dict(net), fh)


def load_network(path) -> Network:
    with open(path) as fh:
        return network_from_dict(json.load(fh))
