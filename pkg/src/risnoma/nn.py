"""Dense ReLU network with hand-written backpropagation for Q-value regression."""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

_MAGIC = b"QNET"


@dataclass
class QNetworkParams:
    """Weights ``W[i]`` of shape (fan_in, fan_out) and biases ``b[i]``.

    Hidden layers use ReLU; the last layer is linear and emits one value per
    action.
    """

    weights: list
    biases: list

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise DimensionError("need one bias vector per weight matrix")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise DimensionError(f"layer {i}: weight {w.shape} and bias {b.shape} disagree")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise DimensionError(f"layer {i} input {w.shape[0]} does not chain "
                                     f"with previous output {self.weights[i - 1].shape[1]}")

    @property
    def sizes(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def copy(self):
        return QNetworkParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def arrays(self):
        """Parameters in a fixed order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def is_finite(self):
        return all(np.all(np.isfinite(a)) for a in self.arrays())


def init_params(sizes, rng):
    """Zero-mean normal weights with std sqrt(2 / fan_in); zero biases."""
    if len(sizes) < 2 or min(sizes) < 1:
        raise DimensionError(f"invalid layer sizes {sizes}")
    rng = np.random.default_rng(rng)
    ws, bs = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        ws.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        bs.append(np.zeros(fan_out))
    return QNetworkParams(ws, bs)


def _check_input(params, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.weights[0].shape[0]:
        raise DimensionError(f"input has {x.shape[-1]} features, network expects "
                             f"{params.weights[0].shape[0]}")
    return x


def forward(params, x):
    """Q-values for one state (1-D) or a batch (rows)."""
    h = _check_input(params, x)
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i < last:
            h = np.maximum(h, 0.0)
    return h


def _forward_cached(params, x):
    acts = [x]
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i < last:
            h = np.maximum(h, 0.0)
        acts.append(h)
    return acts


def loss_and_gradient(params, x, actions, y):
    """Batch-mean squared TD error on the taken actions and its gradient.

    ``loss = mean_i (y_i - Q(x_i)[a_i])**2``; the gradient is returned as a
    :class:`QNetworkParams` with the same shapes as ``params``.
    """
    x = np.atleast_2d(_check_input(params, x))
    actions = np.asarray(actions, dtype=int).ravel()
    y = np.asarray(y, dtype=float).ravel()
    n = x.shape[0]
    if n == 0 or actions.size != n or y.size != n:
        raise DimensionError("batch needs matching, non-empty states, actions and targets")
    acts = _forward_cached(params, x)
    q = acts[-1]
    rows = np.arange(n)
    err = q[rows, actions] - y
    loss = float(np.mean(err ** 2))

    delta = np.zeros_like(q)
    delta[rows, actions] = 2.0 * err / n
    gw = [None] * len(params.weights)
    gb = [None] * len(params.weights)
    for i in range(len(params.weights) - 1, -1, -1):
        gw[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ params.weights[i].T) * (acts[i] > 0)
    return loss, QNetworkParams(gw, gb)


def apply_update(params, grad, lr):
    """Plain gradient step ``theta - lr * g``."""
    if [w.shape for w in params.weights] != [g.shape for g in grad.weights]:
        raise DimensionError("gradient shapes do not match the parameters")
    return QNetworkParams([w - lr * g for w, g in zip(params.weights, grad.weights)],
                          [b - lr * g for b, g in zip(params.biases, grad.biases)])


def save_params(path, params):
    """Binary checkpoint: magic, layer count, layer sizes, then float64 values row-major."""
    sizes = params.sizes
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(sizes)))
        fh.write(struct.pack(f"<{len(sizes)}I", *sizes))
        for a in params.arrays():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_params(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MAGIC:
        raise ValueError(f"{path}: not a Q-network checkpoint")
    (n,) = struct.unpack_from("<I", data, 4)
    sizes = struct.unpack_from(f"<{n}I", data, 8)
    off = 8 + 4 * n
    ws, bs = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = np.frombuffer(data, dtype="<f8", count=fan_in * fan_out, offset=off)
        off += 8 * fan_in * fan_out
        b = np.frombuffer(data, dtype="<f8", count=fan_out, offset=off)
        off += 8 * fan_out
        ws.append(w.reshape(fan_in, fan_out).copy())
        bs.append(b.copy())
    if off != len(data):
        raise ValueError(f"{path}: checkpoint size does not match its header")
    return QNetworkParams(ws, bs)
