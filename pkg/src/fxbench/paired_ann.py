"""Paired trainer/predictor networks fed by the indicator simulators.

Each pair owns two copies of a small tanh network. The trainer learns
online by back-propagation: every tick it takes one gradient step on the
newest sample whose 900-tick outcome has just become known. Once it has
seen ``train_window`` such samples, its weights are copied to the predictor
every ``transfer_every`` ticks; only the predictor scores the current tick. The predictors' outputs are
averaged into a single intensity in [-3, 3].

Parameters of one network live in a flat float64 vector, layer by layer:
``W`` (row-major, ``fan_in x fan_out``) followed by ``b``. The compiled
kernels below walk that layout directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from numba import njit

from .errors import DataError, InsufficientDataError
from .indicators import IndicatorConfig, IndicatorFrame, indicator_vector_stream
from .signals import MAX_INTENSITY, ForecastSignal, emit_signals
from .tickdata import PIP, PriceSeries

MAX_HALVINGS = 30


@dataclass(frozen=True)
class AnnPairConfig:
    pair_count: int = 5
    hidden_layout: tuple[int, ...] = (8,)
    learning_rate: float = 0.01
    train_window: int = 900
    transfer_every: int = 100
    emission_threshold: float = 0.25
    seed: int = 0
    horizon: int = 900
    target_pips: float = 10.0  # realised move mapped to a target of +-1
    label: str = "Custom ANN"

    def __post_init__(self):
        object.__setattr__(self, "hidden_layout", tuple(int(h) for h in self.hidden_layout))
        if self.pair_count < 1:
            raise ValueError("pair_count must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.emission_threshold < 0:
            raise ValueError("emission_threshold must be >= 0")
        if any(h < 1 for h in self.hidden_layout):
            raise ValueError("hidden layer widths must be positive")
        if self.train_window < 1 or self.transfer_every < 1 or self.horizon < 1:
            raise ValueError("train_window, transfer_every and horizon must be >= 1")
        if self.target_pips <= 0:
            raise ValueError("target_pips must be positive")


@dataclass(frozen=True)
class AnnPair:
    sizes: tuple[int, ...]
    trainer: np.ndarray = field(repr=False)
    predictor: np.ndarray = field(repr=False)
    input_slice: tuple[int, ...] = ()

    def layers(self, which: str = "trainer") -> list[tuple[np.ndarray, np.ndarray]]:
        """Views of ``(W, b)`` per layer of the trainer or predictor."""
        flat = self.trainer if which == "trainer" else self.predictor
        out, off = [], 0
        for n_in, n_out in zip(self.sizes[:-1], self.sizes[1:]):
            w = flat[off:off + n_in * n_out].reshape(n_in, n_out)
            off += n_in * n_out
            b = flat[off:off + n_out]
            off += n_out
            out.append((w, b))
        return out


def parameter_count(sizes: Sequence[int]) -> int:
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


# --------------------------------------------------------------------------
# compiled network kernels


@njit(cache=True)
def _forward(params, p0, sizes, X, row, cols, acts):
    """Forward pass; activations land in ``acts`` (one slot per unit)."""
    n0 = sizes[0]
    for i in range(n0):
        acts[i] = X[row, cols[i]]
    a_off = 0
    p_off = p0
    for layer in range(sizes.shape[0] - 1):
        n_in = sizes[layer]
        n_out = sizes[layer + 1]
        b_off = p_off + n_in * n_out
        nxt = a_off + n_in
        for j in range(n_out):
            s = params[b_off + j]
            for i in range(n_in):
                s += acts[a_off + i] * params[p_off + i * n_out + j]
            acts[nxt + j] = math.tanh(s)
        a_off = nxt
        p_off = b_off + n_out
    return acts[a_off]


@njit(cache=True)
def _backward(params, p0, sizes, acts, dout, grad, deltas):
    """Accumulate d(loss)/d(params) into ``grad`` given d(loss)/d(output)."""
    n_layers = sizes.shape[0] - 1
    # walk forward once to find where the last layer's activations and
    # parameters start, then peel layers off backwards
    a_in = 0
    w_off = p0
    for layer in range(n_layers - 1):
        a_in += sizes[layer]
        w_off += sizes[layer] * sizes[layer + 1] + sizes[layer + 1]
    a_out = a_in + sizes[n_layers - 1]
    y = acts[a_out]
    deltas[a_out] = dout * (1.0 - y * y)
    for layer in range(n_layers - 1, -1, -1):
        n_in = sizes[layer]
        n_out = sizes[layer + 1]
        b_off = w_off + n_in * n_out
        for j in range(n_out):
            d = deltas[a_out + j]
            grad[b_off - p0 + j] += d
            for i in range(n_in):
                grad[w_off - p0 + i * n_out + j] += acts[a_in + i] * d
        if layer > 0:
            for i in range(n_in):
                s = 0.0
                for j in range(n_out):
                    s += params[w_off + i * n_out + j] * deltas[a_out + j]
                h = acts[a_in + i]
                deltas[a_in + i] = s * (1.0 - h * h)
            a_out = a_in
            a_in -= sizes[layer - 1]
            w_off -= sizes[layer - 1] * n_in + n_in


@njit(cache=True)
def _batch_loss(params, p0, sizes, X, r0, r1, cols, y, acts):
    total = 0.0
    for r in range(r0, r1):
        e = _forward(params, p0, sizes, X, r, cols, acts) - y[r]
        total += e * e
    return total / (r1 - r0)


@njit(cache=True)
def _batch_loss_grad(params, p0, sizes, X, r0, r1, cols, y, grad, acts, deltas):
    grad[:] = 0.0
    n = r1 - r0
    total = 0.0
    for r in range(r0, r1):
        e = _forward(params, p0, sizes, X, r, cols, acts) - y[r]
        total += e * e
        _backward(params, p0, sizes, acts, 2.0 * e / n, grad, deltas)
    return total / n


@njit(cache=True)
def _train_step(params, p0, n_params, sizes, X, r0, r1, cols, y, lr, grad, cand, acts, deltas):
    """One full-batch gradient step over rows ``r0:r1``; never raises the loss.

    A step that would increase the batch loss is halved until it does not;
    after MAX_HALVINGS attempts the parameters are left unchanged.
    """
    loss0 = _batch_loss_grad(params, p0, sizes, X, r0, r1, cols, y, grad, acts, deltas)
    step = lr
    for _ in range(MAX_HALVINGS):
        for k in range(n_params):
            cand[k] = params[p0 + k] - step * grad[k]
        loss1 = _batch_loss(cand, 0, sizes, X, r0, r1, cols, y, acts)
        if loss1 <= loss0:
            for k in range(n_params):
                params[p0 + k] = cand[k]
            return loss1
        step *= 0.5
    return loss0


@njit(cache=True)
def _run_kernel(X, prices, sizes_all, size_ptr, feats_all, feat_ptr, trainers, predictors,
                par_ptr, horizon, target_scale, lr, transfer_every, train_window, max_units,
                max_params):
    m = X.shape[0]
    n_pairs = size_ptr.shape[0] - 1
    intensity = np.empty(m)
    targets = np.zeros(m)
    acts = np.empty(max_units)
    deltas = np.empty(max_units)
    grad = np.empty(max_params)
    cand = np.empty(max_params)
    for t in range(m):
        # newest sample whose horizon has just matured
        s = t - horizon
        if s >= 0:
            move = (prices[t] - prices[s]) / target_scale
            targets[s] = min(1.0, max(-1.0, move))
            for p in range(n_pairs):
                sizes = sizes_all[size_ptr[p]:size_ptr[p + 1]]
                cols = feats_all[feat_ptr[p]:feat_ptr[p + 1]]
                n_par = par_ptr[p + 1] - par_ptr[p]
                _train_step(trainers, par_ptr[p], n_par, sizes, X, s, s + 1, cols, targets,
                            lr, grad, cand, acts, deltas)
        # the predictor is first refreshed once the trainer has seen a full
        # window of matured samples
        if t % transfer_every == 0 and s + 1 >= train_window:
            predictors[:] = trainers
        total = 0.0
        for p in range(n_pairs):
            sizes = sizes_all[size_ptr[p]:size_ptr[p + 1]]
            cols = feats_all[feat_ptr[p]:feat_ptr[p + 1]]
            total += _forward(predictors, par_ptr[p], sizes, X, t, cols, acts)
        intensity[t] = 3.0 * total / n_pairs
    return intensity


# --------------------------------------------------------------------------
# public operations


def _input_slices(pair_count: int, icfg: IndicatorConfig) -> list[tuple[int, ...]]:
    families = icfg.families
    dim = len(icfg.column_names)
    slices: list[list[int]] = [[] for _ in range(pair_count)]
    for f, cols in enumerate(families):
        slices[f % pair_count].extend(cols)
    # surplus pairs beyond the number of families see the whole vector
    return [tuple(sorted(s)) if s else tuple(range(dim)) for s in slices]


def init_pairs(cfg: AnnPairConfig, icfg: IndicatorConfig | None = None) -> list[AnnPair]:
    """Create ``cfg.pair_count`` pairs with uniform(+-1/sqrt(fan_in)) weights."""
    icfg = icfg or IndicatorConfig()
    rng = np.random.default_rng(cfg.seed)
    pairs = []
    for cols in _input_slices(cfg.pair_count, icfg):
        sizes = (len(cols), *cfg.hidden_layout, 1)
        chunks = []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / math.sqrt(n_in)
            chunks.append(rng.uniform(-bound, bound, size=n_in * n_out))
            chunks.append(rng.uniform(-bound, bound, size=n_out))
        trainer = np.concatenate(chunks)
        pairs.append(AnnPair(sizes, trainer, trainer.copy(), cols))
    return pairs


def _as_history(pair: AnnPair, inputs: np.ndarray, targets: np.ndarray):
    X = np.ascontiguousarray(inputs, dtype=np.float64)
    y = np.ascontiguousarray(targets, dtype=np.float64).reshape(-1)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[0] == 0:
        raise DataError("training history is empty")
    if X.shape[0] != y.shape[0]:
        raise DataError("inputs and targets differ in length")
    if X.shape[1] != pair.sizes[0]:
        raise DataError(f"pair expects {pair.sizes[0]} inputs, history has {X.shape[1]}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DataError("non-finite values in training history")
    return X, y


def _buffers(sizes):
    n_units = int(sum(sizes))
    n_par = parameter_count(sizes)
    return np.empty(n_units), np.empty(n_units), np.empty(n_par), np.empty(n_par)


def loss_and_gradient(pair: AnnPair, inputs: np.ndarray, targets: np.ndarray,
                      params: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Mean squared error of the trainer on a batch and its analytic gradient.

    ``inputs`` hold only this pair's input columns.
    """
    X, y = _as_history(pair, inputs, targets)
    flat = pair.trainer if params is None else np.ascontiguousarray(params, dtype=np.float64)
    sizes = np.array(pair.sizes, dtype=np.int64)
    cols = np.arange(X.shape[1], dtype=np.int64)
    acts, deltas, grad, _ = _buffers(pair.sizes)
    loss = _batch_loss_grad(flat, 0, sizes, X, 0, X.shape[0], cols, y, grad, acts, deltas)
    return loss, grad


def train_step(pair: AnnPair, inputs: np.ndarray, targets: np.ndarray,
               learning_rate: float = 0.01) -> AnnPair:
    """One full-batch gradient-descent step of the trainer on a history window.

    Args:
        pair: The pair to update; its predictor is left untouched.
        inputs: ``(n, k)`` normalised inputs restricted to the pair's slice.
        targets: ``(n,)`` realised trend targets in [-1, 1].
        learning_rate: Initial step size; halved while the step raises the
            batch loss.
    """
    X, y = _as_history(pair, inputs, targets)
    trainer = pair.trainer.copy()
    sizes = np.array(pair.sizes, dtype=np.int64)
    cols = np.arange(X.shape[1], dtype=np.int64)
    acts, deltas, grad, cand = _buffers(pair.sizes)
    _train_step(trainer, 0, trainer.size, sizes, X, 0, X.shape[0], cols, y,
                float(learning_rate), grad, cand, acts, deltas)
    return replace(pair, trainer=trainer)


def transfer_weights(pair: AnnPair) -> AnnPair:
    return replace(pair, predictor=pair.trainer.copy())


def _forward_flat(pair: AnnPair, flat: np.ndarray, x: np.ndarray) -> float:
    x = np.ascontiguousarray(x, dtype=np.float64).reshape(1, -1)
    if x.shape[1] != pair.sizes[0]:
        raise DataError(f"pair expects {pair.sizes[0]} inputs, got {x.shape[1]}")
    sizes = np.array(pair.sizes, dtype=np.int64)
    acts = np.empty(int(sum(pair.sizes)))
    return float(_forward(flat, 0, sizes, x, 0, np.arange(x.shape[1]), acts))


def predict(pair: AnnPair, vector) -> float:
    """Score one input with the predictor.

    ``vector`` may be a full normalised IndicatorVector (or its array), in
    which case the pair's input slice is taken from it, or an array already
    restricted to the slice.
    """
    x = getattr(vector, "normalized", vector)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != pair.sizes[0]:
        if x.size <= max(pair.input_slice, default=-1):
            raise DataError(
                f"input of length {x.size} does not cover slice {pair.input_slice}"
            )
        x = x[list(pair.input_slice)]
    return _forward_flat(pair, pair.predictor, x)


def trainer_output(pair: AnnPair, x) -> float:
    """The trainer evaluated as a pure function (for comparisons with the predictor)."""
    return _forward_flat(pair, pair.trainer, np.asarray(x, dtype=np.float64).reshape(-1))


def combine(outputs: Sequence[float]) -> float:
    """Average per-pair predictions into an intensity in [-3, 3]."""
    outputs = np.asarray(outputs, dtype=np.float64)
    if outputs.size == 0:
        raise ValueError("no predictions to combine")
    return float(np.clip(MAX_INTENSITY * outputs.mean(), -MAX_INTENSITY, MAX_INTENSITY))


@dataclass
class CustomAnnTrace:
    """Per-tick intensities of one adaptive pass plus the final pair state."""

    indices: np.ndarray
    intensity: np.ndarray
    pairs: list[AnnPair]
    frame: IndicatorFrame = field(repr=False)


def minimum_length(cfg: AnnPairConfig, icfg: IndicatorConfig) -> int:
    return icfg.warmup + cfg.train_window


def custom_ann_trace(series: PriceSeries, cfg: AnnPairConfig | None = None,
                     icfg: IndicatorConfig | None = None) -> CustomAnnTrace:
    """One causal pass: indicators, online training, transfers, prediction."""
    cfg = cfg or AnnPairConfig()
    icfg = icfg or IndicatorConfig()
    need = minimum_length(cfg, icfg)
    if len(series) <= need:
        raise InsufficientDataError(
            f"custom ANN needs more than {need} ticks (warm-up {icfg.warmup} + "
            f"train window {cfg.train_window}); series has {len(series)}",
            need + 1, len(series),
        )
    frame = indicator_vector_stream(series, icfg)
    pairs = init_pairs(cfg, icfg)
    sizes_all = np.concatenate([np.array(p.sizes, dtype=np.int64) for p in pairs])
    size_ptr = np.cumsum([0] + [len(p.sizes) for p in pairs]).astype(np.int64)
    feats_all = np.concatenate([np.array(p.input_slice, dtype=np.int64) for p in pairs])
    feat_ptr = np.cumsum([0] + [len(p.input_slice) for p in pairs]).astype(np.int64)
    par_ptr = np.cumsum([0] + [p.trainer.size for p in pairs]).astype(np.int64)
    trainers = np.concatenate([p.trainer for p in pairs])
    predictors = trainers.copy()
    intensity = _run_kernel(
        np.ascontiguousarray(frame.normalized), frame.mids, sizes_all, size_ptr, feats_all,
        feat_ptr, trainers, predictors, par_ptr, cfg.horizon, cfg.target_pips * PIP,
        cfg.learning_rate, cfg.transfer_every, cfg.train_window,
        int(max(sum(p.sizes) for p in pairs)), int(max(p.trainer.size for p in pairs)),
    )
    final = [
        replace(p, trainer=trainers[a:b].copy(), predictor=predictors[a:b].copy())
        for p, a, b in zip(pairs, par_ptr[:-1], par_ptr[1:])
    ]
    return CustomAnnTrace(frame.indices, intensity, final, frame)


def run_custom_ann(series: PriceSeries, cfg: AnnPairConfig | None = None,
                   icfg: IndicatorConfig | None = None) -> list[ForecastSignal]:
    cfg = cfg or AnnPairConfig()
    trace = custom_ann_trace(series, cfg, icfg)
    return emit_signals(
        trace.intensity, trace.indices, series.timestamps_ms[trace.indices], cfg.label,
        cfg.emission_threshold,
    )
