"""Fixed-topology feedforward networks with hand-written backprop and Adam.

Everything works on batches: ``x`` may be a single vector of shape
``(in,)`` or a matrix of shape ``(batch, in)``. Parameters are exposed as a
flat list ``[W0, b0, W1, b1, ...]`` so that the optimizer can treat
networks, embeddings and CP factors uniformly.
"""

from dataclasses import dataclass

import numpy as np

from ._io import fmt_float
from .errors import ShapeError, StateError

ACTIVATIONS = ("relu", "identity")


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "identity"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"unknown activation {self.activation!r}")
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(
                f"layer weights {self.weights.shape} and bias {self.bias.shape} disagree"
            )

    @property
    def n_in(self):
        return self.weights.shape[1]

    @property
    def n_out(self):
        return self.weights.shape[0]


@dataclass(frozen=True)
class DenseNet:
    """Chain of affine layers; the last one must be an identity regression head."""

    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ShapeError("a network needs at least one layer")
        for k in range(1, len(layers)):
            if layers[k].n_in != layers[k - 1].n_out:
                raise ShapeError(
                    f"layer {k} expects {layers[k].n_in} inputs, layer {k - 1} gives {layers[k - 1].n_out}"
                )
        if layers[-1].activation != "identity":
            raise ShapeError("final layer activation must be identity")
        object.__setattr__(self, "layers", layers)

    @property
    def n_in(self):
        return self.layers[0].n_in

    @property
    def n_out(self):
        return self.layers[-1].n_out

    def params(self):
        out = []
        for layer in self.layers:
            out.extend((layer.weights, layer.bias))
        return out

    def with_params(self, params):
        if len(params) != 2 * len(self.layers):
            raise ShapeError(f"expected {2 * len(self.layers)} parameter arrays, got {len(params)}")
        layers = []
        for k, layer in enumerate(self.layers):
            w, b = params[2 * k], params[2 * k + 1]
            if w.shape != layer.weights.shape or b.shape != layer.bias.shape:
                raise ShapeError(f"parameter shapes for layer {k} changed")
            layers.append(Layer(w, b, layer.activation))
        return DenseNet(tuple(layers))

    def weight_arrays(self):
        return [layer.weights for layer in self.layers]


def init_net(sizes, rng, hidden_activation="relu"):
    """Glorot-uniform weights, zero biases.

    ``sizes`` lists the widths ``(in, hidden..., out)``; hidden layers use
    ``hidden_activation`` and the head is identity.
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ShapeError(f"invalid layer sizes {sizes}")
    layers = []
    for k in range(len(sizes) - 1):
        n_in, n_out = sizes[k], sizes[k + 1]
        limit = np.sqrt(6.0 / (n_in + n_out))
        w = rng.uniform(-limit, limit, size=(n_out, n_in))
        act = "identity" if k == len(sizes) - 2 else hidden_activation
        layers.append(Layer(w, np.zeros(n_out), act))
    return DenseNet(tuple(layers))


@dataclass(frozen=True)
class Tape:
    """Values cached by :func:`forward` for :func:`backward`."""

    inputs: tuple  # input to each layer, (batch, in)
    preacts: tuple  # pre-activation of each layer, (batch, out)
    weights: tuple  # the exact weight arrays used
    squeeze: bool


def forward(net, x):
    """Evaluate ``net`` at ``x``; returns ``(y, tape)``."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.ndim != 2 or h.shape[1] != net.n_in:
        raise ShapeError(f"input width {h.shape[-1]} does not match network input {net.n_in}")
    inputs, preacts = [], []
    for layer in net.layers:
        inputs.append(h)
        z = h @ layer.weights.T + layer.bias
        preacts.append(z)
        h = np.maximum(z, 0.0) if layer.activation == "relu" else z
    y = h[0] if squeeze else h
    return y, Tape(tuple(inputs), tuple(preacts), tuple(net.weight_arrays()), squeeze)


def backward(net, tape, upstream):
    """Reverse-mode gradients of ``sum(upstream * forward(net, x))``.

    Returns ``(param_grads, input_grad)`` where ``param_grads`` follows the
    ``net.params()`` layout. For batched input the parameter gradients are
    summed over the batch.
    """
    if len(tape.weights) != len(net.layers) or any(
        w is not layer.weights for w, layer in zip(tape.weights, net.layers)
    ):
        raise StateError("tape was recorded with different network parameters")
    g = np.asarray(upstream, dtype=np.float64)
    if tape.squeeze:
        g = g[None, :]
    if g.shape != tape.preacts[-1].shape:
        raise ShapeError(f"upstream shape {g.shape} does not match output {tape.preacts[-1].shape}")
    grads = [None] * (2 * len(net.layers))
    for k in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[k]
        if layer.activation == "relu":
            g = g * (tape.preacts[k] > 0)
        grads[2 * k] = g.T @ tape.inputs[k]
        grads[2 * k + 1] = g.sum(axis=0)
        g = g @ layer.weights
    input_grad = g[0] if tape.squeeze else g
    return grads, input_grad


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def create(cls, params, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        return cls(
            [np.zeros_like(p) for p in params],
            [np.zeros_like(p) for p in params],
            0,
            learning_rate,
            beta1,
            beta2,
            eps,
        )

    def copy(self):
        return AdamState(
            [a.copy() for a in self.m],
            [a.copy() for a in self.v],
            self.t,
            self.learning_rate,
            self.beta1,
            self.beta2,
            self.eps,
        )


def adam_step(params, grads, state):
    """One bias-corrected Adam update.

    Returns ``(new_params, new_state)``; the inputs are left untouched.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads and optimizer state disagree in length")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        step = state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.eps)
        new_params.append(p - step)
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(new_m, new_v, t, state.learning_rate, b1, b2, state.eps)


def net_to_lines(net):
    """Text rows for a network, in the shared 17-digit decimal convention."""
    lines = [f"#net layers={len(net.layers)}"]
    for k, layer in enumerate(net.layers):
        lines.append(f"#layer {k} {layer.n_out} {layer.n_in} {layer.activation}")
        for row in layer.weights:
            lines.append(",".join(fmt_float(x) for x in row))
        lines.append(",".join(fmt_float(x) for x in layer.bias))
    return lines


def net_from_lines(lines, pos):
    """Parse a network written by :func:`net_to_lines` starting at ``lines[pos]``.

    Returns ``(net, next_pos)``.
    """
    head = lines[pos]
    if not head.startswith("#net layers="):
        raise ShapeError(f"expected '#net' header, got {head!r}")
    n_layers = int(head.split("=", 1)[1])
    pos += 1
    layers = []
    for _ in range(n_layers):
        _, k, n_out, n_in, act = lines[pos].split()
        n_out, n_in = int(n_out), int(n_in)
        pos += 1
        w = np.array([[float(x) for x in lines[pos + i].split(",")] for i in range(n_out)])
        pos += n_out
        b = np.array([float(x) for x in lines[pos].split(",")])
        pos += 1
        layers.append(Layer(w.reshape(n_out, n_in), b, act))
    return DenseNet(tuple(layers)), pos
