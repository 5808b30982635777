"""Small dense networks on plain numpy.

Everything the learning code needs from a neural net lives here: parameter
containers, forward evaluation with a cache, exact reverse-mode gradients,
and an Adam optimizer. Arrays are float64 throughout; weights are stored
row-major as (fan_out, fan_in). Hidden layers are ReLU, the output layer is
linear.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Array = np.ndarray


@dataclass
class MlpParams:
    """Weights and biases, one entry per layer."""

    weights: list[Array]
    biases: list[Array]

    def layer_sizes(self) -> list[int]:
        sizes = [self.weights[0].shape[1]]
        for w in self.weights:
            sizes.append(w.shape[0])
        return sizes


@dataclass
class GradientBuffer:
    """Same layout as MlpParams, holds dL/dW and dL/db."""

    weights: list[Array]
    biases: list[Array]


def init_params(layer_sizes: list[int], rng: np.random.Generator) -> MlpParams:
    """Uniform fan-in initialisation: W ~ U(-b, b) with b = sqrt(1/fan_in),
    biases zero."""
    if len(layer_sizes) < 2:
        raise ValueError("need at least input and output sizes")
    weights = []
    biases = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = np.sqrt(1.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights=weights, biases=biases)


def forward(params: MlpParams, x: Array) -> tuple[Array, list[Array]]:
    """Evaluate the network on a batch.

    x must be (batch, in_dim). Returns (y, cache) where y is
    (batch, out_dim) and cache holds the layer activations needed by
    backward().
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != params.weights[0].shape[1]:
        raise ValueError(
            f"expected input shape (batch, {params.weights[0].shape[1]}), got {x.shape}"
        )
    cache = [x]
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w.T + b
        if i < last:
            h = np.maximum(h, 0.0)
        cache.append(h)
    return h, cache


def backward(
    params: MlpParams, cache: list[Array], grad_out: Array
) -> tuple[GradientBuffer, Array]:
    """Exact gradients of sum(grad_out * y) w.r.t. parameters and input.

    cache is the second return of forward() on the same batch. grad_out is
    dL/dy with shape (batch, out_dim). Gradients are summed over the batch;
    divide by batch size upstream for a mean loss.
    """
    grad_out = np.asarray(grad_out, dtype=float)
    if grad_out.shape != cache[-1].shape:
        raise ValueError(
            f"grad_out shape {grad_out.shape} does not match output {cache[-1].shape}"
        )
    n = len(params.weights)
    gw: list[Array] = [None] * n  # type: ignore[list-item]
    gb: list[Array] = [None] * n  # type: ignore[list-item]
    delta = grad_out
    for i in range(n - 1, -1, -1):
        gw[i] = delta.T @ cache[i]
        gb[i] = delta.sum(axis=0)
        if i > 0:
            # ReLU mask off the stored post-activation of the previous layer
            delta = (delta @ params.weights[i]) * (cache[i] > 0.0)
    grad_in = delta @ params.weights[0]
    return GradientBuffer(weights=gw, biases=gb), grad_in


def input_gradient(params: MlpParams, cache: list[Array], grad_out: Array) -> Array:
    """dL/dx only, skipping the weight-gradient outer products.

    Cheaper than backward() when the parameters are held fixed, e.g. when
    differentiating a critic with respect to the action.
    """
    delta = np.asarray(grad_out, dtype=float)
    for i in range(len(params.weights) - 1, 0, -1):
        delta = (delta @ params.weights[i]) * (cache[i] > 0.0)
    return delta @ params.weights[0]


@dataclass
class AdamState:
    step: int
    m_w: list[Array]
    v_w: list[Array]
    m_b: list[Array]
    v_b: list[Array]


def adam_init(params: MlpParams) -> AdamState:
    return AdamState(
        step=0,
        m_w=[np.zeros_like(w) for w in params.weights],
        v_w=[np.zeros_like(w) for w in params.weights],
        m_b=[np.zeros_like(b) for b in params.biases],
        v_b=[np.zeros_like(b) for b in params.biases],
    )


def optimizer_step(
    params: MlpParams,
    grads: GradientBuffer,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One Adam update, in place on params and state.

    Bias-corrected moments; the epsilon sits outside the square root:
    theta -= lr * m_hat / (sqrt(v_hat) + eps).
    """
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for m, v, p, g in (
        *zip(state.m_w, state.v_w, params.weights, grads.weights),
        *zip(state.m_b, state.v_b, params.biases, grads.biases),
    ):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def to_nested_lists(params: MlpParams) -> dict:
    """Plain-python view of the parameters, row-major, for serialization."""
    return {
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }


def from_nested_lists(data: dict, layer_sizes: list[int]) -> MlpParams:
    """Rebuild MlpParams, validating every shape against layer_sizes."""
    try:
        raw_w = data["weights"]
        raw_b = data["biases"]
    except (KeyError, TypeError) as exc:
        raise ValueError("parameter block missing weights/biases") from exc
    expected = list(zip(layer_sizes[1:], layer_sizes[:-1]))
    if len(raw_w) != len(expected) or len(raw_b) != len(expected):
        raise ValueError(
            f"expected {len(expected)} layers, got {len(raw_w)} weight blocks"
        )
    weights = []
    biases = []
    for i, (fan_out, fan_in) in enumerate(expected):
        w = np.asarray(raw_w[i], dtype=float)
        b = np.asarray(raw_b[i], dtype=float)
        if w.shape != (fan_out, fan_in):
            raise ValueError(
                f"layer {i} weight shape {w.shape}, expected {(fan_out, fan_in)}"
            )
        if b.shape != (fan_out,):
            raise ValueError(f"layer {i} bias shape {b.shape}, expected ({fan_out},)")
        weights.append(w)
        biases.append(b)
    return MlpParams(weights=weights, biases=biases)
