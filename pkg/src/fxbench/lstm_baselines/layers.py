"""Numpy layers with hand-written backward passes.

Every layer keeps the arrays it needs for its backward pass from the most
recent forward call, exposes its parameters in ``params`` and writes
gradients with the same keys into ``grads``. Sequences are laid out as
``(batch, time, features)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _uniform(rng, fan_in, shape):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class LstmState:
    hidden: np.ndarray
    cell: np.ndarray

    @classmethod
    def zeros(cls, units: int, batch: int | None = None) -> "LstmState":
        shape = (units,) if batch is None else (batch, units)
        return cls(np.zeros(shape), np.zeros(shape))


def _cell_step(x, h, c, W, b):
    units = h.shape[-1]
    z = np.concatenate([x, h], axis=-1) @ W + b
    i = sigmoid(z[..., :units])
    f = sigmoid(z[..., units:2 * units])
    o = sigmoid(z[..., 2 * units:3 * units])
    g = np.tanh(z[..., 3 * units:])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    return h_new, c_new, (x, h, c, i, f, o, g, tc)


def _cell_backward(dh, dc, cache, W):
    x, h, c, i, f, o, g, tc = cache
    dc = dc + dh * o * (1.0 - tc * tc)
    do = dh * tc
    di = dc * g
    dg = dc * i
    df = dc * c
    dz = np.concatenate(
        [di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g * g)], axis=-1
    )
    xh = np.concatenate([x, h], axis=-1)
    dW = xh.T @ dz
    db = dz.sum(axis=0)
    dxh = dz @ W.T
    d_in = x.shape[-1]
    return dxh[:, :d_in], dxh[:, d_in:], dc * f, dW, db


def lstm_cell_forward(x, state: LstmState, weights):
    """One LSTM step with sigmoid i/f/o gates and a tanh candidate.

    ``weights`` is ``(W, b)`` with ``W`` of shape ``(input + units, 4 * units)``
    and gate blocks ordered i, f, o, g. Works on single vectors or batches.
    """
    W, b = weights
    x = np.asarray(x, dtype=np.float64)
    units = state.hidden.shape[-1]
    if W.shape != (x.shape[-1] + units, 4 * units) or b.shape != (4 * units,):
        raise ValueError(
            f"weights {W.shape}/{b.shape} do not fit input {x.shape[-1]} and {units} units"
        )
    if state.cell.shape != state.hidden.shape:
        raise ValueError("hidden and cell state shapes differ")
    h, c, _ = _cell_step(x, state.hidden, state.cell, W, b)
    return h, LstmState(h, c)


class Layer:
    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def forward(self, x):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int, rng):
        super().__init__()
        self.params = {"W": _uniform(rng, n_in, (n_in, n_out)), "b": _uniform(rng, n_in, (n_out,))}

    def forward(self, x):
        self._x = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, dy):
        self.grads["W"] = self._x.T @ dy
        self.grads["b"] = dy.sum(axis=0)
        return dy @ self.params["W"].T


class ReLU(Layer):
    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dy):
        return dy * self._mask


class Conv1D(Layer):
    """Stride-1 temporal convolution with zero 'same' padding (odd kernels)."""

    def __init__(self, c_in: int, c_out: int, rng, kernel: int = 3):
        super().__init__()
        if kernel % 2 != 1:
            raise ValueError("kernel size must be odd for same-length padding")
        self.kernel = kernel
        fan_in = kernel * c_in
        self.params = {
            "W": _uniform(rng, fan_in, (kernel, c_in, c_out)),
            "b": _uniform(rng, fan_in, (c_out,)),
        }

    def forward(self, x):
        pad = self.kernel // 2
        T = x.shape[1]
        xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
        self._xp = xp
        W = self.params["W"]
        out = xp[:, 0:T] @ W[0]
        for k in range(1, self.kernel):
            out += xp[:, k:k + T] @ W[k]
        return out + self.params["b"]

    def backward(self, dy):
        pad = self.kernel // 2
        B, T, c_out = dy.shape
        W = self.params["W"]
        xp = self._xp
        dy2 = dy.reshape(B * T, c_out)
        dW = np.empty_like(W)
        dxp = np.zeros_like(xp)
        for k in range(self.kernel):
            dW[k] = xp[:, k:k + T].reshape(B * T, -1).T @ dy2
            dxp[:, k:k + T] += dy @ W[k].T
        self.grads["W"] = dW
        self.grads["b"] = dy2.sum(axis=0)
        return dxp[:, pad:pad + T]


class LSTM(Layer):
    """Unrolled LSTM over a window; backward is full BPTT through the window.

    ``forward`` returns the hidden state after the last processed step (the
    first time index when ``reverse`` is set); ``forward_sequence`` returns
    all hidden states aligned to input positions.
    """

    def __init__(self, n_in: int, units: int, rng, reverse: bool = False):
        super().__init__()
        self.units = units
        self.reverse = reverse
        self.params = {
            "W": _uniform(rng, n_in + units, (n_in + units, 4 * units)),
            "b": _uniform(rng, n_in + units, (4 * units,)),
        }

    def _order(self, T):
        return range(T - 1, -1, -1) if self.reverse else range(T)

    def forward_sequence(self, x):
        B, T, _ = x.shape
        W, b = self.params["W"], self.params["b"]
        h = np.zeros((B, self.units))
        c = np.zeros((B, self.units))
        hs = np.empty((B, T, self.units))
        self._caches = []
        self._shape = x.shape
        for t in self._order(T):
            h, c, cache = _cell_step(x[:, t], h, c, W, b)
            self._caches.append((t, cache))
            hs[:, t] = h
        return hs

    def forward(self, x):
        hs = self.forward_sequence(x)
        return hs[:, 0] if self.reverse else hs[:, -1]

    def backward_sequence(self, dhs):
        """Backward from gradients w.r.t. every hidden state in ``forward_sequence``."""
        W = self.params["W"]
        dx = np.zeros(self._shape)
        dW = np.zeros_like(W)
        db = np.zeros(W.shape[1])
        B = self._shape[0]
        dh = np.zeros((B, self.units))
        dc = np.zeros((B, self.units))
        for t, cache in reversed(self._caches):
            dh = dh + dhs[:, t]
            dxt, dh, dc, dWt, dbt = _cell_backward(dh, dc, cache, W)
            dx[:, t] = dxt
            dW += dWt
            db += dbt
        self.grads["W"] = dW
        self.grads["b"] = db
        return dx

    def backward(self, dy):
        dhs = np.zeros(self._shape[:2] + (self.units,))
        dhs[:, 0 if self.reverse else -1] = dy
        return self.backward_sequence(dhs)


class Bidirectional(Layer):
    """Forward and backward LSTMs over the same window, final states concatenated."""

    def __init__(self, n_in: int, units: int, rng):
        super().__init__()
        self.fwd = LSTM(n_in, units, rng)
        self.bwd = LSTM(n_in, units, rng, reverse=True)
        self.units = units
        self.params = {
            "fwd_W": self.fwd.params["W"], "fwd_b": self.fwd.params["b"],
            "bwd_W": self.bwd.params["W"], "bwd_b": self.bwd.params["b"],
        }

    def forward_sequence(self, x):
        return np.concatenate([self.fwd.forward_sequence(x), self.bwd.forward_sequence(x)], axis=-1)

    def forward(self, x):
        return np.concatenate([self.fwd.forward(x), self.bwd.forward(x)], axis=-1)

    def backward(self, dy):
        H = self.units
        dx = self.fwd.backward(dy[:, :H]) + self.bwd.backward(dy[:, H:])
        self.grads = {
            "fwd_W": self.fwd.grads["W"], "fwd_b": self.fwd.grads["b"],
            "bwd_W": self.bwd.grads["W"], "bwd_b": self.bwd.grads["b"],
        }
        return dx
