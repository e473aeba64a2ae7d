"""Minimal dense-network stack: forward pass, exact backprop, Adadelta updates.

Everything is plain float64 numpy. Networks here are small (tens of units per
layer), so the implementation favours being checkable over being fast: the
backward pass mirrors the forward pass line by line, and the optimizer is a
direct transcription of the three Adadelta update equations.

Training mutates a network in place (single writer); checkpoints are taken
with :func:`copy_network`. A network that is no longer being trained is safe
to share between threads for read-only evaluation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ACTIVATIONS = ("tanh", "linear", "relu", "softplus")

NETWORK_SCHEMA_VERSION = 1


def stable_softplus(x):
    """ln(1 + exp(x)) computed piecewise so large |x| neither overflows nor underflows.

    For x > 30 returns x + exp(-x); for x < -30 returns exp(x); both agree
    with the exact value to well below 1e-12.
    """
    arr = np.asarray(x, dtype=float)
    out = np.empty_like(arr)
    hi = arr > 30.0
    lo = arr < -30.0
    mid = ~hi & ~lo
    out[hi] = arr[hi] + np.exp(-arr[hi])
    out[lo] = np.exp(arr[lo])
    out[mid] = np.log1p(np.exp(arr[mid]))
    return out if arr.ndim else float(out)


def sigmoid(x):
    """Numerically stable logistic function (the derivative of softplus)."""
    arr = np.asarray(x, dtype=float)
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ex = np.exp(arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if arr.ndim else float(out)


def _apply_activation(name, z):
    if name == "tanh":
        return np.tanh(z)
    if name == "linear":
        return z
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "softplus":
        return stable_softplus(z)
    raise ValueError(f"unknown activation {name!r}")


def _activation_derivative(name, z, y):
    # Derivative w.r.t. the pre-activation z; y = activation(z) is reused
    # where it is cheaper than recomputing.
    if name == "tanh":
        return 1.0 - y * y
    if name == "linear":
        return np.ones_like(z)
    if name == "relu":
        return (z > 0.0).astype(float)
    if name == "softplus":
        return sigmoid(z)
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class Layer:
    """One dense layer: y = activation(weights @ x + bias).

    weights has shape (out, in); bias has shape (out,).
    """

    weights: np.ndarray
    bias: np.ndarray
    activation: str

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.weights.ndim != 2 or self.bias.ndim != 1:
            raise ValueError("layer weights must be 2-D and bias 1-D")
        if self.weights.shape[0] != self.bias.shape[0]:
            raise ValueError(
                f"bias length {self.bias.shape[0]} does not match "
                f"weight rows {self.weights.shape[0]}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(
                f"activation must be one of {ACTIVATIONS}, got {self.activation!r}"
            )

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass
class Network:
    """An ordered stack of dense layers with chained dimensions."""

    layers: list[Layer]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("network needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise ValueError(
                    f"layer output width {a.out_dim} does not chain into "
                    f"next layer input width {b.in_dim}"
                )

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_dim] + [l.out_dim for l in self.layers]

    @property
    def activations(self) -> list[str]:
        return [l.activation for l in self.layers]


def init_network(layer_sizes, activations, seed, weight_std=0.01) -> Network:
    """Create a network with Gaussian(0, weight_std^2) weights and zero biases.

    The same seed always yields bit-identical weights.
    """
    if len(layer_sizes) < 2:
        raise ValueError("need at least an input and an output size")
    if len(activations) != len(layer_sizes) - 1:
        raise ValueError(
            f"got {len(activations)} activations for {len(layer_sizes) - 1} layers"
        )
    rng = np.random.default_rng(seed)
    layers = []
    for n_in, n_out, act in zip(layer_sizes, layer_sizes[1:], activations):
        w = rng.normal(0.0, weight_std, size=(n_out, n_in))
        layers.append(Layer(weights=w, bias=np.zeros(n_out), activation=act))
    return Network(layers=layers)


def copy_network(net: Network) -> Network:
    return Network(
        layers=[
            Layer(l.weights.copy(), l.bias.copy(), l.activation) for l in net.layers
        ]
    )


def networks_equal(a: Network, b: Network) -> bool:
    """Bitwise equality of weights, biases and activations."""
    return (
        a.activations == b.activations
        and all(
            np.array_equal(la.weights, lb.weights)
            and np.array_equal(la.bias, lb.bias)
            for la, lb in zip(a.layers, b.layers)
        )
        and len(a.layers) == len(b.layers)
    )


@dataclass
class ForwardCache:
    """Per-layer intermediates from a forward pass, enough for exact backprop."""

    inputs: list[np.ndarray]       # x fed into each layer, shape (n, in)
    preacts: list[np.ndarray]      # z = x W^T + b, shape (n, out)
    outputs: list[np.ndarray]      # activation(z), shape (n, out)
    squeeze: bool                  # True if the original input was 1-D


def forward(net: Network, x) -> tuple[np.ndarray, ForwardCache]:
    """Run the network on a single vector or a (n, input_dim) batch.

    Returns the output (matching the input's dimensionality) plus the cache
    needed by :func:`backprop`.
    """
    arr = np.asarray(x, dtype=float)
    squeeze = arr.ndim == 1
    if squeeze:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != net.input_dim:
        raise ValueError(
            f"input width {arr.shape[-1]} does not match network input "
            f"width {net.input_dim}"
        )
    inputs, preacts, outputs = [], [], []
    h = arr
    for layer in net.layers:
        z = h @ layer.weights.T + layer.bias
        y = _apply_activation(layer.activation, z)
        inputs.append(h)
        preacts.append(z)
        outputs.append(y)
        h = y
    cache = ForwardCache(inputs, preacts, outputs, squeeze)
    return (h[0] if squeeze else h), cache


def backprop(net: Network, cache: ForwardCache, grad_output):
    """Exact gradients for every parameter given dL/dy = grad_output.

    grad_output must have the shape of the forward output. Per-sample
    contributions are summed over the batch, so a loss averaged over the
    batch should fold its 1/n into grad_output.

    Returns (grads, grad_input) where grads is a list of (dW, db) matching
    the layer parameter shapes and grad_input is dL/dx.
    """
    g = np.asarray(grad_output, dtype=float)
    if cache.squeeze:
        g = g[None, :]
    if g.shape != cache.outputs[-1].shape:
        raise ValueError(
            f"grad_output shape {g.shape} does not match forward output "
            f"shape {cache.outputs[-1].shape}"
        )
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(net.layers)
    for k in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[k]
        dz = g * _activation_derivative(
            layer.activation, cache.preacts[k], cache.outputs[k]
        )
        dw = dz.T @ cache.inputs[k]
        db = dz.sum(axis=0)
        grads[k] = (dw, db)
        g = dz @ layer.weights
    return grads, (g[0] if cache.squeeze else g)


@dataclass
class AdadeltaState:
    """Running accumulators for the Adadelta rule, mirroring the net's shapes."""

    e_grad_sq: list[tuple[np.ndarray, np.ndarray]]
    e_delta_sq: list[tuple[np.ndarray, np.ndarray]]
    rho: float = 0.95
    eps: float = 1e-6


def init_adadelta(net: Network, rho=0.95, eps=1e-6) -> AdadeltaState:
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    zeros = lambda l: (np.zeros_like(l.weights), np.zeros_like(l.bias))
    return AdadeltaState(
        e_grad_sq=[zeros(l) for l in net.layers],
        e_delta_sq=[zeros(l) for l in net.layers],
        rho=rho,
        eps=eps,
    )


def adadelta_step(net: Network, state: AdadeltaState, grads):
    """Apply one Adadelta update in place; returns (net, state).

    Per parameter:
        E[g^2]  <- rho E[g^2] + (1 - rho) g^2
        delta    = -sqrt(E[d^2] + eps) / sqrt(E[g^2] + eps) * g
        E[d^2]  <- rho E[d^2] + (1 - rho) delta^2
        param   += delta
    """
    rho, eps = state.rho, state.eps
    if len(grads) != len(net.layers):
        raise ValueError("gradient list does not match layer count")
    for k, layer in enumerate(net.layers):
        for which, param, g in ((0, layer.weights, grads[k][0]),
                                (1, layer.bias, grads[k][1])):
            if g.shape != param.shape:
                raise ValueError(
                    f"gradient shape {g.shape} does not match parameter "
                    f"shape {param.shape} in layer {k}"
                )
            eg = state.e_grad_sq[k][which]
            ed = state.e_delta_sq[k][which]
            eg *= rho
            eg += (1.0 - rho) * g * g
            delta = -np.sqrt(ed + eps) / np.sqrt(eg + eps) * g
            ed *= rho
            ed += (1.0 - rho) * delta * delta
            param += delta
    return net, state


def network_to_payload(net: Network, normalization: dict | None = None) -> dict:
    """JSON-safe dict for a network; floats survive a round trip exactly."""
    payload = {
        "version": NETWORK_SCHEMA_VERSION,
        "layer_sizes": net.layer_sizes,
        "activations": net.activations,
        "weights": [l.weights.tolist() for l in net.layers],
        "biases": [l.bias.tolist() for l in net.layers],
    }
    if normalization is not None:
        payload["normalization"] = normalization
    return payload


def network_from_payload(payload: dict) -> tuple[Network, dict | None]:
    version = payload.get("version")
    if version != NETWORK_SCHEMA_VERSION:
        raise ValueError(f"unsupported network schema version {version!r}")
    sizes = payload["layer_sizes"]
    acts = payload["activations"]
    layers = []
    for k, act in enumerate(acts):
        w = np.asarray(payload["weights"][k], dtype=float)
        b = np.asarray(payload["biases"][k], dtype=float)
        if w.shape != (sizes[k + 1], sizes[k]):
            raise ValueError(f"weight block {k} has shape {w.shape}, "
                             f"expected {(sizes[k + 1], sizes[k])}")
        layers.append(Layer(w, b, act))
    return Network(layers), payload.get("normalization")


def save_network(net: Network, path, normalization: dict | None = None) -> None:
    payload = network_to_payload(net, normalization)
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_network(path) -> tuple[Network, dict | None]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return network_from_payload(payload)
