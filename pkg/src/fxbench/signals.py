"""Forecast signals, the shared emission rule and the signal-log format.

Both the paired ANN and the LSTM baselines turn a per-tick intensity stream
into discrete signals through :func:`emit_signals`, so their signal counts
are directly comparable.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO, Union

import numpy as np
from numba import njit

from .errors import DataError

MAX_INTENSITY = 3.0
ROBUST_BOUNDARY = 1.0
SIGNAL_LOG_HEADER = ["index", "timestamp_ms", "direction", "intensity", "model_label"]


@dataclass(frozen=True)
class ForecastSignal:
    index: int
    direction: str  # "up" | "down"
    intensity: float
    model_label: str
    timestamp_ms: int = 0

    def __post_init__(self):
        if self.direction not in ("up", "down"):
            raise ValueError(f"direction must be up or down, got {self.direction!r}")
        if not -MAX_INTENSITY <= self.intensity <= MAX_INTENSITY:
            raise ValueError(f"intensity {self.intensity} outside [-3, 3]")
        if (self.intensity > 0) != (self.direction == "up") or self.intensity == 0:
            raise ValueError("intensity sign must match direction and be non-zero")


@njit(cache=True)
def _emission_kernel(intensity, threshold, boundary):
    n = intensity.shape[0]
    emitted = np.zeros(n, dtype=np.bool_)
    last_dir = 0
    prev_abs = 0.0
    prev_dir = 0
    for t in range(n):
        v = intensity[t]
        a = abs(v)
        d = 1 if v > 0.0 else (-1 if v < 0.0 else 0)
        if a >= threshold and d != 0:
            if last_dir == 0 or d != last_dir:
                emitted[t] = True
            elif a >= boundary and (prev_abs < boundary or prev_dir != d):
                emitted[t] = True
            if emitted[t]:
                last_dir = d
        prev_abs = a
        prev_dir = d
    return emitted


def emission_mask(intensity: np.ndarray, threshold: float = 0.25,
                  boundary: float = ROBUST_BOUNDARY) -> np.ndarray:
    """Boolean mask of ticks at which a signal is emitted.

    A tick emits when ``|intensity| >= threshold`` and either nothing has
    been emitted yet, the direction differs from the last emitted signal, or
    the intensity has just crossed the robust boundary from below in the
    same direction as the previous tick.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    x = np.ascontiguousarray(intensity, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("intensity stream contains non-finite values")
    return _emission_kernel(x, float(threshold), float(boundary))


def emit_signals(
    intensity: np.ndarray,
    indices: np.ndarray,
    timestamps_ms: np.ndarray,
    model_label: str,
    threshold: float = 0.25,
) -> list[ForecastSignal]:
    """Apply the emission rule to an intensity stream.

    ``indices`` and ``timestamps_ms`` give the series position and clock
    time of each intensity sample.
    """
    intensity = np.clip(np.asarray(intensity, dtype=np.float64), -MAX_INTENSITY, MAX_INTENSITY)
    mask = emission_mask(intensity, threshold)
    out = []
    for k in np.flatnonzero(mask).tolist():
        v = float(intensity[k])
        out.append(
            ForecastSignal(
                index=int(indices[k]),
                direction="up" if v > 0 else "down",
                intensity=v,
                model_label=model_label,
                timestamp_ms=int(timestamps_ms[k]),
            )
        )
    return out


def write_signal_log(signals: Iterable[ForecastSignal], target: Union[str, os.PathLike, TextIO]) -> None:
    owned = isinstance(target, (str, os.PathLike))
    handle = open(target, "w", encoding="utf-8", newline="") if owned else target
    try:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SIGNAL_LOG_HEADER)
        for s in signals:
            writer.writerow([s.index, s.timestamp_ms, s.direction, repr(s.intensity), s.model_label])
    finally:
        if owned:
            handle.close()


def read_signal_log(source: Union[str, os.PathLike, TextIO]) -> list[ForecastSignal]:
    owned = isinstance(source, (str, os.PathLike))
    handle = open(source, "r", encoding="utf-8", newline="") if owned else source
    try:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != SIGNAL_LOG_HEADER:
            raise DataError(f"not a signal log (header {header!r})")
        return [
            ForecastSignal(int(row[0]), row[2], float(row[3]), row[4], int(row[1]))
            for row in reader
            if row
        ]
    finally:
        if owned:
            handle.close()


def directions(signals: Sequence[ForecastSignal]) -> list[str]:
    return [s.direction for s in signals]
