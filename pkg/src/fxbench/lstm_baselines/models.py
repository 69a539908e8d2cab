"""The eight LSTM baselines: construction, training, signals, checkpoints."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import DivergenceError, InsufficientDataError, ModelError
from ..signals import MAX_INTENSITY, ForecastSignal, emit_signals
from ..tickdata import PIP, PriceSeries
from .layers import LSTM, Bidirectional, Conv1D, Dense, Layer, ReLU

CHECKPOINT_VERSION = 1
CONV_CHANNELS = 4
CONV_KERNEL = 3
SCALE_WINDOW = 900


@dataclass(frozen=True)
class ModelSpec:
    name: str
    lstm_units: int
    dense_layout: tuple[int, ...]  # widths of the dense head, last is the output unit
    lookback: int
    bidirectional: bool
    convolutional: bool


# Lookback follows the table's column, including the two rows whose names
# suggest a different window (sLSTM-15-1,15 and biLSTM-15-1,15).
TABLE1: dict[str, ModelSpec] = {
    s.name: s
    for s in (
        ModelSpec("sLSTM-1-1", 100, (1,), 1, False, False),
        ModelSpec("sLSTM-15-1", 100, (1,), 15, False, False),
        ModelSpec("sLSTM-15-1,15", 100, (15, 1), 1, False, False),
        ModelSpec("biLSTM-1-1", 100, (1,), 1, True, False),
        ModelSpec("biLSTM-15-1", 100, (1,), 15, True, False),
        ModelSpec("biLSTM-15-1,15", 100, (15, 1), 15, True, False),
        ModelSpec("convLSTM-1-1", 60, (1,), 1, False, True),
        ModelSpec("convLSTM-1-1,15", 64, (1,), 15, False, True),
    )
}


def get_spec(name: str) -> ModelSpec:
    try:
        return TABLE1[name]
    except KeyError:
        raise ModelError(f"unknown LSTM variant {name!r}; choose from {sorted(TABLE1)}") from None


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 3
    batch: int = 32
    learning_rate: float = 1e-3
    momentum: float = 0.9
    grad_clip: float = 1.0
    train_fraction: float = 0.7
    seed: int = 0
    emission_threshold: float = 0.25

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")
        if self.epochs < 1 or self.batch < 1:
            raise ValueError("epochs and batch must be >= 1")
        if self.learning_rate <= 0 or self.grad_clip <= 0:
            raise ValueError("learning_rate and grad_clip must be positive")


@dataclass
class TrainingReport:
    epoch_losses: list[float]
    samples: int
    steps: int


class SequenceModel:
    """A stack of layers mapping ``(batch, lookback, 1)`` to ``(batch, 1)``."""

    def __init__(self, spec: ModelSpec, seed: int, layers: list[Layer]):
        self.spec = spec
        self.seed = seed
        self.layers = layers
        self.trained = False
        self.report: TrainingReport | None = None
        self.meta: dict = {}

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dy):
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy

    def parameters(self):
        """``(key, param, layer, name)`` for every trainable array, in a fixed order."""
        for k, layer in enumerate(self.layers):
            for name in sorted(layer.params):
                yield f"{k}/{name}", layer.params[name], layer, name

    def state_dict(self) -> dict[str, np.ndarray]:
        return {key: p.copy() for key, p, _, _ in self.parameters()}

    def predict(self, x, chunk: int = 4096) -> np.ndarray:
        out = np.empty(x.shape[0])
        for start in range(0, x.shape[0], chunk):
            out[start:start + chunk] = self.forward(x[start:start + chunk])[:, 0]
        return out


def build_model(spec: ModelSpec | str, seed: int = 0) -> SequenceModel:
    """Lay out [conv + ReLU] -> LSTM / BiLSTM -> dense head, seeded."""
    if isinstance(spec, str):
        spec = get_spec(spec)
    if TABLE1.get(spec.name) != spec:
        raise ModelError(f"{spec!r} does not match any row of the baseline table")
    rng = np.random.default_rng(seed)
    layers: list[Layer] = []
    n_in = 1
    if spec.convolutional:
        layers += [Conv1D(n_in, CONV_CHANNELS, rng, CONV_KERNEL), ReLU()]
        n_in = CONV_CHANNELS
    if spec.bidirectional:
        layers.append(Bidirectional(n_in, spec.lstm_units, rng))
        width = 2 * spec.lstm_units
    else:
        layers.append(LSTM(n_in, spec.lstm_units, rng))
        width = spec.lstm_units
    for k, units in enumerate(spec.dense_layout):
        layers.append(Dense(width, units, rng))
        if k < len(spec.dense_layout) - 1:
            layers.append(ReLU())
        width = units
    return SequenceModel(spec, seed, layers)


# --------------------------------------------------------------------------
# data preparation


def pip_changes(series: PriceSeries) -> np.ndarray:
    """One-step mid changes in pips; element ``k`` ends at series index ``k + 1``."""
    return np.diff(series.mids) / PIP


@dataclass
class SampleSet:
    inputs: np.ndarray   # (n, lookback, 1)
    targets: np.ndarray  # (n,)
    indices: np.ndarray  # series index at which each forecast is made


def make_samples(series: PriceSeries, lookback: int) -> SampleSet:
    """Sliding windows of past changes, each labelled with the next change."""
    d = pip_changes(series)
    n = len(d) - lookback
    if n < 1:
        raise InsufficientDataError(
            f"lookback {lookback} needs at least {lookback + 2} ticks, series has {len(series)}",
            lookback + 2, len(series),
        )
    windows = np.lib.stride_tricks.sliding_window_view(d[:-1], lookback)
    inputs = np.ascontiguousarray(windows[:, :, None])
    targets = d[lookback:].copy()
    indices = np.arange(lookback, lookback + n, dtype=np.int64)
    return SampleSet(inputs, targets, indices)


def split_point(n_samples: int, train_fraction: float) -> int:
    return int(n_samples * train_fraction)


# --------------------------------------------------------------------------
# training


def _clip_and_step(model: SequenceModel, velocity: dict, tcfg: TrainConfig) -> None:
    params = list(model.parameters())
    grads = [layer.grads[name] for _, _, layer, name in params]
    norm = np.sqrt(sum(float(np.vdot(g, g)) for g in grads))
    scale = tcfg.grad_clip / norm if norm > tcfg.grad_clip else 1.0
    for (key, p, _, _), g in zip(params, grads):
        v = velocity.setdefault(key, np.zeros_like(p))
        v *= tcfg.momentum
        v -= tcfg.learning_rate * scale * g
        p += v


def train(model: SequenceModel, series: PriceSeries, spec: ModelSpec | None = None,
          tcfg: TrainConfig | None = None) -> SequenceModel:
    """Fit on the leading ``train_fraction`` of windows with momentum SGD.

    Loss is the batch mean squared error of the next one-step change (in
    pips); gradients are back-propagated through the whole lookback window
    and clipped to a global norm. The per-epoch mean loss is stored in
    ``model.report``.
    """
    spec = spec or model.spec
    tcfg = tcfg or TrainConfig()
    if spec != model.spec:
        raise ModelError("spec does not match the model being trained")
    samples = make_samples(series, spec.lookback)
    n_train = split_point(len(samples.targets), tcfg.train_fraction)
    if n_train < 1:
        raise InsufficientDataError("no training windows in the leading split", None, len(series))
    X, y = samples.inputs[:n_train], samples.targets[:n_train]
    rng = np.random.default_rng(tcfg.seed)
    velocity: dict[str, np.ndarray] = {}
    epoch_losses = []
    step = 0
    for _ in range(tcfg.epochs):
        order = rng.permutation(n_train)
        total = 0.0
        for start in range(0, n_train, tcfg.batch):
            idx = order[start:start + tcfg.batch]
            pred = model.forward(X[idx])[:, 0]
            err = pred - y[idx]
            loss = float(np.mean(err * err))
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at step {step}", step)
            model.backward((2.0 / len(idx)) * err[:, None])
            _clip_and_step(model, velocity, tcfg)
            total += loss * len(idx)
            step += 1
        epoch_losses.append(total / n_train)
    model.trained = True
    model.meta.update(train_fraction=tcfg.train_fraction, emission_threshold=tcfg.emission_threshold)
    model.report = TrainingReport(epoch_losses, n_train, step)
    return model


# --------------------------------------------------------------------------
# signals


def rolling_mean_abs_change(series: PriceSeries, window: int = SCALE_WINDOW) -> np.ndarray:
    """Trailing mean |one-step change| in pips at each series index (index 0 is 0)."""
    d = np.abs(pip_changes(series))
    csum = np.concatenate([[0.0], np.cumsum(d)])
    out = np.zeros(len(series))
    # change ending at index i is d[i - 1]
    for_index = np.arange(1, len(series))
    lo = np.maximum(for_index - window, 0)
    out[1:] = (csum[for_index] - csum[lo]) / (for_index - lo)
    return out


def intensity_from_predictions(pred: np.ndarray, scale) -> np.ndarray:
    scale = np.broadcast_to(np.asarray(scale, dtype=np.float64), pred.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = np.where(scale > 0, MAX_INTENSITY * pred / scale, 0.0)
    return np.clip(raw, -MAX_INTENSITY, MAX_INTENSITY)


def predict_signals(model: SequenceModel, series: PriceSeries, spec: ModelSpec | None = None,
                    scale=None, threshold: float | None = None,
                    train_fraction: float | None = None) -> list[ForecastSignal]:
    """Forecast the held-out span and turn forecasts into signals.

    Intensity is ``3 * y_hat / scale`` clipped to [-3, 3]; by default the
    scale is the trailing 900-tick mean absolute one-step change. Emission
    uses the same rule as the custom ANN.
    """
    spec = spec or model.spec
    if not model.trained:
        raise ModelError(f"{spec.name} has not been trained")
    samples = make_samples(series, spec.lookback)
    frac = train_fraction if train_fraction is not None else _train_fraction(model)
    start = split_point(len(samples.targets), frac)
    if start >= len(samples.targets):
        raise InsufficientDataError("held-out span is empty", None, len(series))
    idx = samples.indices[start:]
    pred = model.predict(samples.inputs[start:])
    if scale is None:
        scale = rolling_mean_abs_change(series)[idx]
    thr = threshold if threshold is not None else _threshold(model)
    return emit_signals(
        intensity_from_predictions(pred, scale), idx, series.timestamps_ms[idx], spec.name, thr
    )


def _train_fraction(model: SequenceModel) -> float:
    return model.meta.get("train_fraction", TrainConfig.train_fraction)


def _threshold(model: SequenceModel) -> float:
    return model.meta.get("emission_threshold", TrainConfig.emission_threshold)


def run_lstm(series: PriceSeries, spec: ModelSpec | str, seed: int = 0,
             tcfg: TrainConfig | None = None) -> list[ForecastSignal]:
    """Build, train and predict: the end-to-end path timed by the bench."""
    tcfg = tcfg or TrainConfig(seed=seed)
    model = build_model(spec, seed)
    train(model, series, model.spec, tcfg)
    return predict_signals(model, series, model.spec, threshold=tcfg.emission_threshold,
                           train_fraction=tcfg.train_fraction)


# --------------------------------------------------------------------------
# checkpoints


def save_checkpoint(model: SequenceModel, path: str | os.PathLike) -> None:
    """Write an ``.npz`` holding every parameter plus a JSON header.

    The header records the format version, the model layout, the seed and whether
    the model was trained.
    """
    meta = {
        "format_version": CHECKPOINT_VERSION,
        "spec": asdict(model.spec),
        "seed": model.seed,
        "trained": model.trained,
        "extra": model.meta,
    }
    arrays = {f"param:{k}": v for k, v in model.state_dict().items()}
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.array(json.dumps(meta, sort_keys=True)), **arrays)


def load_checkpoint(path: str | os.PathLike) -> SequenceModel:
    try:
        data = np.load(path, allow_pickle=False)
    except (ValueError, EOFError) as exc:
        raise ModelError(f"{os.fspath(path)} is not a checkpoint: {exc}") from None
    if not hasattr(data, "files") or "meta" not in data.files:
        raise ModelError(f"{os.fspath(path)} has no checkpoint header")
    with data:
        meta = json.loads(str(data["meta"]))
        if meta.get("format_version") != CHECKPOINT_VERSION:
            raise ModelError(f"unsupported checkpoint version {meta.get('format_version')}")
        spec_fields = meta["spec"]
        spec_fields["dense_layout"] = tuple(spec_fields["dense_layout"])
        model = build_model(ModelSpec(**spec_fields), meta["seed"])
        expected = {key for key, *_ in model.parameters()}
        stored = {k[len("param:"):] for k in data.files if k.startswith("param:")}
        if expected != stored:
            raise ModelError("checkpoint parameters do not match the model layout")
        for key, p, _, _ in model.parameters():
            src = data[f"param:{key}"]
            if src.shape != p.shape:
                raise ModelError(f"shape mismatch for {key}: {src.shape} vs {p.shape}")
            np.copyto(p, src)
    model.trained = bool(meta["trained"])
    model.meta = dict(meta.get("extra") or {})
    return model
