"""Minimal dense-network substrate: forward, exact reverse-mode gradients,
adaptive-moment optimizer, and a flat-vector parameter view.

Parameters live in ONE contiguous float64 vector per network, with per-layer
weight/bias views into it.  That makes the three operations this workbench
leans on cheap and unambiguous: optimizer updates are whole-vector ops,
parameter-space noise is a single vector add, and layer-selective weight
transfer is segment copying.  Flat order is layer-major, row-major: for each
layer, W (out x in, C order) then b.

Everything is 64-bit and pure given (params, inputs, rng state).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

ACTIVATIONS = ("relu", "tanh", "linear")


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str = "linear"

    def __post_init__(self):
        if self.in_dim <= 0 or self.out_dim <= 0:
            raise ValueError(f"layer dims must be positive, got {self}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def n_params(self) -> int:
        return self.out_dim * (self.in_dim + 1)


def validate_chain(specs: Sequence[LayerSpec]) -> None:
    if not specs:
        raise ValueError("network needs at least one layer")
    for k in range(1, len(specs)):
        if specs[k].in_dim != specs[k - 1].out_dim:
            raise ValueError(
                f"layer {k} expects in_dim {specs[k].in_dim} but layer {k - 1} "
                f"has out_dim {specs[k - 1].out_dim}"
            )


def n_params(specs: Sequence[LayerSpec]) -> int:
    return sum(s.n_params for s in specs)


class Mlp:
    """Dense network whose parameters are views into one flat float64 vector."""

    __slots__ = ("specs", "theta", "weights", "biases")

    def __init__(self, specs: Sequence[LayerSpec], theta: np.ndarray):
        validate_chain(specs)
        theta = np.ascontiguousarray(theta, dtype=np.float64)
        if theta.shape != (n_params(specs),):
            raise ValueError(
                f"flat vector has length {theta.shape}, architecture needs {n_params(specs)}"
            )
        self.specs = tuple(specs)
        self.theta = theta
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        ofs = 0
        for s in self.specs:
            self.weights.append(theta[ofs : ofs + s.out_dim * s.in_dim].reshape(s.out_dim, s.in_dim))
            ofs += s.out_dim * s.in_dim
            self.biases.append(theta[ofs : ofs + s.out_dim])
            ofs += s.out_dim

    @property
    def n_params(self) -> int:
        return self.theta.size

    @property
    def in_dim(self) -> int:
        return self.specs[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.specs[-1].out_dim

    def copy(self) -> "Mlp":
        return Mlp(self.specs, self.theta.copy())

    def flatten(self) -> np.ndarray:
        """Copy of the parameters in flat order (layer-major, row-major)."""
        return self.theta.copy()

    def load_flat(self, vec: np.ndarray) -> None:
        """Overwrite all parameters from a flat vector of matching length."""
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != self.theta.shape:
            raise ValueError(f"expected length {self.theta.size}, got {vec.shape}")
        self.theta[:] = vec

    def layer_slice(self, k: int) -> slice:
        """Flat-vector slice holding layer k's weights and biases."""
        ofs = sum(s.n_params for s in self.specs[:k])
        return slice(ofs, ofs + self.specs[k].n_params)


def unflatten(specs: Sequence[LayerSpec], vec: np.ndarray) -> Mlp:
    """Inverse of ``Mlp.flatten``: build a network from a flat vector."""
    return Mlp(specs, np.asarray(vec, dtype=np.float64).copy())


def glorot_limit(s: LayerSpec) -> float:
    return float(np.sqrt(6.0 / (s.in_dim + s.out_dim)))


def init_layer_flat(s: LayerSpec, rng: np.random.Generator) -> np.ndarray:
    """Fresh weights uniform in +-sqrt(6/(in+out)), biases zero, flat order."""
    lim = glorot_limit(s)
    w = rng.uniform(-lim, lim, size=s.out_dim * s.in_dim)
    return np.concatenate([w, np.zeros(s.out_dim)])


def init_network(specs: Sequence[LayerSpec], rng: np.random.Generator) -> Mlp:
    validate_chain(specs)
    return Mlp(specs, np.concatenate([init_layer_flat(s, rng) for s in specs]))


def _apply_activation(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Evaluate the network on a single input (1-D) or a batch (2-D)."""
    y, _ = forward_trace(net, x)
    return y


def forward_trace(net: Mlp, x: np.ndarray):
    """Forward pass keeping per-layer activations for a later backward pass.

    Returns (output, trace); feed the trace to ``backward_trace``.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    a = np.atleast_2d(x)
    if a.shape[1] != net.in_dim:
        raise ValueError(f"input has width {a.shape[1]}, network expects {net.in_dim}")
    acts = [a]
    for spec, w, b in zip(net.specs, net.weights, net.biases):
        z = a @ w.T + b
        a = _apply_activation(spec.activation, z)
        acts.append(a)
    out = acts[-1][0] if single else acts[-1]
    return out, (acts, single)


def backward_trace(net: Mlp, trace, grad_out: np.ndarray):
    """Gradients of sum(output * grad_out) w.r.t. parameters and input.

    Returns (grad_theta, grad_x): a flat vector aligned with ``net.theta``
    and the input gradient with the caller's shape.
    """
    acts, single = trace
    g = np.atleast_2d(np.asarray(grad_out, dtype=np.float64))
    if g.shape != acts[-1].shape:
        raise ValueError(f"grad_out shape {g.shape} != output shape {acts[-1].shape}")
    grad_theta = np.empty_like(net.theta)
    ofs = net.theta.size
    for k in range(len(net.specs) - 1, -1, -1):
        spec, w = net.specs[k], net.weights[k]
        a_out, a_in = acts[k + 1], acts[k]
        if spec.activation == "relu":
            gz = g * (a_out > 0)
        elif spec.activation == "tanh":
            gz = g * (1.0 - a_out * a_out)
        else:
            gz = g
        grad_theta[ofs - spec.out_dim : ofs] = gz.sum(axis=0)
        ofs -= spec.out_dim
        nw = spec.out_dim * spec.in_dim
        np.matmul(gz.T, a_in, out=grad_theta[ofs - nw : ofs].reshape(spec.out_dim, spec.in_dim))
        ofs -= nw
        g = gz @ w
    grad_x = g[0] if single else g
    return grad_theta, grad_x


def backward(net: Mlp, x: np.ndarray, grad_out: np.ndarray):
    """Single-call reverse pass: forward on x, then ``backward_trace``."""
    _, trace = forward_trace(net, x)
    return backward_trace(net, trace, grad_out)


@dataclass
class AdamState:
    """First/second-moment buffers, flat like the parameter vector."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def for_net(cls, net: Mlp) -> "AdamState":
        return cls(m=np.zeros_like(net.theta), v=np.zeros_like(net.theta))


def adam_step(
    net: Mlp,
    grad: np.ndarray,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected adaptive-moment descent step, in place."""
    state.t += 1
    state.m += (1.0 - beta1) * (grad - state.m)
    state.v += (1.0 - beta2) * (grad * grad - state.v)
    m_hat = state.m / (1.0 - beta1**state.t)
    v_hat = state.v / (1.0 - beta2**state.t)
    net.theta -= lr * m_hat / (np.sqrt(v_hat) + eps)
