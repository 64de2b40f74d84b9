"""Minimal deterministic CNN: conv / maxpool / relu / flatten / FC layers with
softmax cross-entropy and plain SGD, float64 throughout.

The stock architecture is a 4-parameter-layer net for 28x28x1 inputs:
conv 3x3 1->32 (pad 1) + relu + 2x2 pool, conv 3x3 32->64 (pad 1) + relu +
2x2 pool, flatten, fc 3136->128 + relu, fc 128->10. The last FC is not
prunable (one output neuron per class).

Convolutions run as im2col + matmul so the BLAS does the heavy lifting.
ReLU's backward uses subgradient 1 at exactly 0: a zeroized filter (weights
and bias both zero) emits an exactly-zero pre-activation, and the usual
`x > 0` mask would cut its gradient forever, making soft recovery impossible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .pruning import PruneMask

INPUT_SHAPE = (28, 28, 1)
N_CLASSES = 10

CONV = "conv"
RELU = "relu"
MAXPOOL = "maxpool"
FLATTEN = "flatten"
FC = "fully_connected"
SOFTMAX_XENT = "softmax_xent"


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    prunable: bool = False
    # conv
    kernel: int = 0
    in_channels: int = 0
    out_channels: int = 0
    stride: int = 1
    padding: int = 0
    # pool
    window: int = 0
    # fully connected
    fan_in: int = 0
    fan_out: int = 0

    @property
    def n_filters(self):
        if self.kind == CONV:
            return self.out_channels
        if self.kind == FC:
            return self.fan_out
        raise ValueError(f"{self.kind} layer has no filters")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.07
    epochs: int = 5
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError(f"invalid training config: {self}")


@dataclass
class NetworkState:
    specs: tuple
    weights: dict  # layer_id -> ndarray (conv: K,K,Cin,Cout; fc: fan_in,fan_out)
    biases: dict  # layer_id -> ndarray (n_filters,)
    masks: dict  # layer_id -> PruneMask, prunable layers only
    rng_seed: int

    def parameter_layer_ids(self):
        return [i for i, s in enumerate(self.specs) if s.kind in (CONV, FC)]

    def prunable_layer_ids(self):
        return [i for i, s in enumerate(self.specs) if s.prunable]


def lenet4_specs():
    return (
        LayerSpec(CONV, prunable=True, kernel=3, in_channels=1, out_channels=32, stride=1, padding=1),
        LayerSpec(RELU),
        LayerSpec(MAXPOOL, window=2),
        LayerSpec(CONV, prunable=True, kernel=3, in_channels=32, out_channels=64, stride=1, padding=1),
        LayerSpec(RELU),
        LayerSpec(MAXPOOL, window=2),
        LayerSpec(FLATTEN),
        LayerSpec(FC, prunable=True, fan_in=7 * 7 * 64, fan_out=128),
        LayerSpec(RELU),
        LayerSpec(FC, prunable=False, fan_in=128, fan_out=N_CLASSES),
        LayerSpec(SOFTMAX_XENT),
    )


def layer_names(specs):
    """Stable human names for parameterized layers: conv1, conv2, ..., fc1, ..."""
    names = {}
    counts = {CONV: 0, FC: 0}
    for i, s in enumerate(specs):
        if s.kind in counts:
            counts[s.kind] += 1
            prefix = "conv" if s.kind == CONV else "fc"
            names[i] = f"{prefix}{counts[s.kind]}"
    return names


def feature_shapes(specs, input_shape=INPUT_SHAPE):
    """Input feature-map shape (H, W, C) seen by each layer; validates the
    chain ends at (1, 1, N_CLASSES)-equivalent logits."""
    shapes = []
    h, w, c = input_shape
    for s in specs:
        shapes.append((h, w, c))
        if s.kind == CONV:
            if c != s.in_channels:
                raise ValueError(f"conv expects {s.in_channels} channels, chain has {c}")
            h = (h + 2 * s.padding - s.kernel) // s.stride + 1
            w = (w + 2 * s.padding - s.kernel) // s.stride + 1
            c = s.out_channels
        elif s.kind == MAXPOOL:
            if h % s.window or w % s.window:
                raise ValueError(f"pool window {s.window} does not divide {h}x{w}")
            h, w = h // s.window, w // s.window
        elif s.kind == FLATTEN:
            h, w, c = 1, 1, h * w * c
        elif s.kind == FC:
            if h * w * c != s.fan_in:
                raise ValueError(f"fc expects fan_in {s.fan_in}, chain has {h * w * c}")
            h, w, c = 1, 1, s.fan_out
    if c != N_CLASSES:
        raise ValueError(f"network ends with {c} outputs, expected {N_CLASSES}")
    return shapes


def init_network(seed, specs=None):
    """He-style uniform init (bound sqrt(6 / fan_in)), zero biases, all masks
    active. Bitwise deterministic per seed."""
    specs = tuple(specs) if specs is not None else lenet4_specs()
    feature_shapes(specs)  # validate the chain before allocating
    rng = np.random.default_rng(seed)
    weights, biases, masks = {}, {}, {}
    for i, s in enumerate(specs):
        if s.kind == CONV:
            fan_in = s.kernel * s.kernel * s.in_channels
            bound = np.sqrt(6.0 / fan_in)
            weights[i] = rng.uniform(-bound, bound, size=(s.kernel, s.kernel, s.in_channels, s.out_channels))
            biases[i] = np.zeros(s.out_channels)
        elif s.kind == FC:
            bound = np.sqrt(6.0 / s.fan_in)
            weights[i] = rng.uniform(-bound, bound, size=(s.fan_in, s.fan_out))
            biases[i] = np.zeros(s.fan_out)
        if s.kind in (CONV, FC) and s.prunable:
            masks[i] = PruneMask.all_active(i, s.n_filters)
    return NetworkState(specs=specs, weights=weights, biases=biases, masks=masks, rng_seed=seed)


# ---------------------------------------------------------------------------
# layer kernels

def _im2col(x, k, stride, pad):
    """(N, H, W, C) -> (N, Ho, Wo, k, k, C) patch view, then a 2-D column
    matrix whose row layout matches a C-order (k, k, C, ...) weight reshape."""
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    win = sliding_window_view(x, (k, k), axis=(1, 2))  # (N, Ho*, Wo*, C, k, k)
    win = win[:, ::stride, ::stride]
    n, ho, wo = win.shape[:3]
    cols = np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3))
    return cols.reshape(n * ho * wo, -1), (n, ho, wo)


def _conv_forward(x, w, b, stride, pad):
    k, _, c_in, c_out = w.shape
    cols, (n, ho, wo) = _im2col(x, k, stride, pad)
    y = cols @ w.reshape(-1, c_out) + b
    return y.reshape(n, ho, wo, c_out), cols


def _conv_backward(dy, x_shape, w, cols, stride, pad, need_dx=True):
    k, _, c_in, c_out = w.shape
    n, ho, wo = dy.shape[:3]
    dy_mat = dy.reshape(n * ho * wo, c_out)
    dw = (cols.T @ dy_mat).reshape(w.shape)
    db = dy_mat.sum(axis=0)
    if not need_dx:
        return None, dw, db
    dcols = (dy_mat @ w.reshape(-1, c_out).T).reshape(n, ho, wo, k, k, c_in)
    h_pad, w_pad = x_shape[1] + 2 * pad, x_shape[2] + 2 * pad
    dxp = np.zeros((n, h_pad, w_pad, c_in))
    for i in range(k):
        for j in range(k):
            dxp[:, i : i + ho * stride : stride, j : j + wo * stride : stride] += dcols[:, :, :, i, j]
    dx = dxp[:, pad:-pad, pad:-pad] if pad else dxp
    return dx, dw, db


def _maxpool_forward(x, window, with_idx=True):
    """Window max over strided slices. idx records the winning in-window
    offset in (row-major) order; the strict > keeps the first maximum on
    ties, so gradient routing is deterministic."""
    if x.shape[1] % window or x.shape[2] % window:
        raise ValueError(f"pool window {window} does not divide {x.shape[1:3]}")
    y = x[:, ::window, ::window, :].copy()
    idx = np.zeros(y.shape, dtype=np.int8) if with_idx else None
    j = 0
    for kh in range(window):
        for kw in range(window):
            if j > 0:
                s = x[:, kh::window, kw::window, :]
                better = s > y
                np.copyto(y, s, where=better)
                if with_idx:
                    idx[better] = j
            j += 1
    return y, idx


def _maxpool_backward(dy, idx, x_shape, window):
    dx = np.zeros(x_shape)
    j = 0
    for kh in range(window):
        for kw in range(window):
            np.copyto(dx[:, kh::window, kw::window, :], dy, where=(idx == j))
            j += 1
    return dx


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy and dL/dlogits. Labels must lie in [0, N_CLASSES)."""
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= N_CLASSES):
        raise ValueError(f"labels out of range [0, {N_CLASSES})")
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    z = exps.sum(axis=1)
    loss = float(np.mean(np.log(z) - shifted[np.arange(n), labels]))
    dlogits = exps / z[:, None]
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    return loss, dlogits


# ---------------------------------------------------------------------------
# network-level ops

def forward(state, batch, need_cache=True):
    """Run the stack on a (N, 28, 28, 1) batch; returns (logits, cache).

    With need_cache=False (inference) the cache is None and the pool layers
    skip their argmax bookkeeping.
    """
    x = np.asarray(batch, dtype=np.float64)
    expected = (x.shape[0],) + tuple(INPUT_SHAPE)
    if x.shape != expected:
        raise ValueError(f"batch shape {x.shape} != {expected}")
    cache = [] if need_cache else None
    for i, s in enumerate(state.specs):
        if s.kind == CONV:
            y, cols = _conv_forward(x, state.weights[i], state.biases[i], s.stride, s.padding)
            if need_cache:
                cache.append((x.shape, cols))
            x = y
        elif s.kind == RELU:
            if need_cache:
                cache.append(x)
            x = np.maximum(x, 0.0)
        elif s.kind == MAXPOOL:
            y, idx = _maxpool_forward(x, s.window, with_idx=need_cache)
            if need_cache:
                cache.append((x.shape, idx))
            x = y
        elif s.kind == FLATTEN:
            if need_cache:
                cache.append(x.shape)
            x = x.reshape(x.shape[0], -1)
        elif s.kind == FC:
            if need_cache:
                cache.append(x)
            x = x @ state.weights[i] + state.biases[i]
        elif s.kind == SOFTMAX_XENT:
            if need_cache:
                cache.append(x)  # the logits; backward starts the chain here
        else:
            raise ValueError(f"unknown layer kind {s.kind}")
    return x, cache


def backward(state, cache, labels):
    """Gradients of the mean cross-entropy at the cached forward pass.

    Returns ({layer_id: (dw, db)}, loss).
    """
    if state.specs[-1].kind != SOFTMAX_XENT:
        raise ValueError("network must end with a softmax cross-entropy layer")
    loss, dx = softmax_cross_entropy(cache[-1], labels)
    grads = {}
    for i in reversed(range(len(state.specs) - 1)):
        s = state.specs[i]
        if s.kind == CONV:
            x_shape, cols = cache[i]
            dx, dw, db = _conv_backward(
                dx, x_shape, state.weights[i], cols, s.stride, s.padding,
                need_dx=(i > 0),  # nothing below the input layer needs its gradient
            )
            grads[i] = (dw, db)
        elif s.kind == RELU:
            # subgradient 1 at 0 so exactly-zeroized filters still get gradient
            dx = dx * (cache[i] >= 0.0)
        elif s.kind == MAXPOOL:
            x_shape, idx = cache[i]
            dx = _maxpool_backward(dx, idx, x_shape, s.window)
        elif s.kind == FLATTEN:
            dx = dx.reshape(cache[i])
        elif s.kind == FC:
            x = cache[i]
            grads[i] = (x.T @ dx, dx.sum(axis=0))
            dx = dx @ state.weights[i].T
    return grads, loss


def sgd_step(state, grads, lr):
    """w <- w - lr * g, in place. Pruned filters are NOT exempted."""
    for i, (dw, db) in grads.items():
        if dw.shape != state.weights[i].shape or db.shape != state.biases[i].shape:
            raise ValueError(f"gradient shape mismatch at layer {i}")
        state.weights[i] -= lr * dw
        state.biases[i] -= lr * db
    return state


def evaluate(state, images, labels, chunk=256):
    """Fraction of argmax(logits) == label; argmax ties go to the lower class."""
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels)
    if images.shape[0] == 0:
        raise ValueError("dataset is empty")
    correct = 0
    for start in range(0, images.shape[0], chunk):
        batch = images[start : start + chunk]
        if batch.ndim == 3:
            batch = batch[..., None]
        logits, _ = forward(state, batch, need_cache=False)
        correct += int(np.sum(np.argmax(logits, axis=1) == labels[start : start + chunk]))
    return correct / images.shape[0]
