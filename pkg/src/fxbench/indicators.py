"""Streaming technical-indicator simulators on tick prices.

Every kernel makes one pass over the input, keeps its own rolling state
(ring buffers, running sums, monotonic queues) and reads each price once.
Ticks have a single price, so bar-based indicators use it as high, low and
close alike.

Output arrays are aligned to the first index at which the indicator is
defined: element ``k`` of ``moving_average(s, w)`` belongs to series index
``k + w - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from numba import njit

from .errors import DataError, InsufficientDataError
from .tickdata import PIP, PriceSeries


class IndicatorError(DataError):
    pass


@dataclass(frozen=True)
class IndicatorConfig:
    ma_windows: tuple[int, ...] = (300, 600, 900)
    rsi_period: int = 300
    cci_period: int = 300
    williams_period: int = 300
    # normalisation constants for the ANN input layer
    ma_scale: float = 50 * PIP
    cci_clamp: float = 300.0

    def __post_init__(self):
        object.__setattr__(self, "ma_windows", tuple(int(w) for w in self.ma_windows))
        if not self.ma_windows:
            raise IndicatorError("at least one moving-average window is required")
        periods = (*self.ma_windows, self.rsi_period, self.cci_period, self.williams_period)
        if min(periods) < 2:
            raise IndicatorError(f"all periods must be >= 2, got {periods}")
        if self.ma_scale <= 0 or self.cci_clamp <= 0:
            raise IndicatorError("normalisation scales must be positive")

    @property
    def warmup(self) -> int:
        """Number of prices needed before the first full vector exists."""
        return max(max(self.ma_windows), self.rsi_period + 1, self.cci_period, self.williams_period)

    @property
    def column_names(self) -> list[str]:
        ma = [f"ma{w}" for w in self.ma_windows]
        po = [f"po{k}" for k in range(1, len(self.ma_windows))]
        return ma + ["rsi", "cci", "williams"] + po

    @property
    def families(self) -> list[list[int]]:
        """Column indices grouped by indicator family: MAs, RSI, CCI, Williams, oscillator."""
        m = len(self.ma_windows)
        groups = [list(range(m)), [m], [m + 1], [m + 2]]
        if m > 1:
            groups.append(list(range(m + 3, m + 3 + m - 1)))
        return groups


@dataclass(frozen=True)
class IndicatorVector:
    index: int
    ma: tuple[float, ...]
    rsi: float
    cci: float
    williams: float
    price_osc: tuple[float, ...]
    normalized: np.ndarray = field(repr=False, compare=False)


# --------------------------------------------------------------------------
# compiled single-pass kernels


@njit(cache=True)
def _rolling_mean_kernel(x, window):
    n = x.shape[0]
    out = np.empty(n - window + 1)
    buf = np.empty(window)
    total = 0.0
    for i in range(n):
        slot = i % window
        v = x[i]
        if i >= window:
            total -= buf[slot]
        buf[slot] = v
        total += v
        if i >= window - 1:
            out[i - window + 1] = total / window
    return out


@njit(cache=True)
def _rsi_kernel(x, period):
    n = x.shape[0]
    out = np.empty(n - period)
    gains = np.zeros(period)
    losses = np.zeros(period)
    gain_sum = 0.0
    loss_sum = 0.0
    n_gain = 0
    n_loss = 0
    prev = x[0]
    for i in range(1, n):
        v = x[i]
        d = v - prev
        prev = v
        slot = (i - 1) % period
        if i > period:
            if gains[slot] > 0.0:
                gain_sum -= gains[slot]
                n_gain -= 1
            if losses[slot] > 0.0:
                loss_sum -= losses[slot]
                n_loss -= 1
        g = d if d > 0.0 else 0.0
        l = -d if d < 0.0 else 0.0
        gains[slot] = g
        losses[slot] = l
        if g > 0.0:
            gain_sum += g
            n_gain += 1
        if l > 0.0:
            loss_sum += l
            n_loss += 1
        if i >= period:
            # integer counts decide the degenerate cases exactly
            if n_loss == 0 and n_gain == 0:
                r = 50.0
            elif n_loss == 0:
                r = 100.0
            elif n_gain == 0:
                r = 0.0
            else:
                gs = gain_sum if gain_sum > 0.0 else 0.0
                ls = loss_sum if loss_sum > 0.0 else 0.0
                r = 100.0 - 100.0 / (1.0 + gs / ls) if ls > 0.0 else 100.0
            out[i - period] = r
    return out


@njit(cache=True)
def _cci_kernel(x, period):
    n = x.shape[0]
    out = np.empty(n - period + 1)
    buf = np.empty(period)
    for i in range(n):
        v = x[i]
        buf[i % period] = v
        if i >= period - 1:
            # deviations taken about the current price keep constant
            # windows exactly degenerate
            mean_dev = 0.0
            for j in range(period):
                mean_dev += buf[j] - v
            mean_dev /= period
            md = 0.0
            for j in range(period):
                md += abs(buf[j] - v - mean_dev)
            md /= period
            if md == 0.0:
                out[i - period + 1] = 0.0
            else:
                out[i - period + 1] = -mean_dev / (0.015 * md)
    return out


@njit(cache=True)
def _williams_kernel(x, period):
    n = x.shape[0]
    out = np.empty(n - period + 1)
    # monotonic queues stored as ring buffers of (index, value)
    max_idx = np.empty(period, dtype=np.int64)
    max_val = np.empty(period)
    min_idx = np.empty(period, dtype=np.int64)
    min_val = np.empty(period)
    max_head = 0
    max_len = 0
    min_head = 0
    min_len = 0
    for i in range(n):
        v = x[i]
        # expire entries that left the window
        if max_len > 0 and max_idx[max_head] <= i - period:
            max_head = (max_head + 1) % period
            max_len -= 1
        if min_len > 0 and min_idx[min_head] <= i - period:
            min_head = (min_head + 1) % period
            min_len -= 1
        while max_len > 0 and max_val[(max_head + max_len - 1) % period] <= v:
            max_len -= 1
        slot = (max_head + max_len) % period
        max_idx[slot] = i
        max_val[slot] = v
        max_len += 1
        while min_len > 0 and min_val[(min_head + min_len - 1) % period] >= v:
            min_len -= 1
        slot = (min_head + min_len) % period
        min_idx[slot] = i
        min_val[slot] = v
        min_len += 1
        if i >= period - 1:
            hh = max_val[max_head]
            ll = min_val[min_head]
            if hh == ll:
                out[i - period + 1] = -50.0
            else:
                out[i - period + 1] = -100.0 * ((hh - v) / (hh - ll))
    return out


# --------------------------------------------------------------------------
# public operations


def _prices(series: PriceSeries | np.ndarray) -> np.ndarray:
    if isinstance(series, PriceSeries):
        return series.mids
    return np.ascontiguousarray(series, dtype=np.float64)


def _require(n: int, needed: int, what: str) -> None:
    if n < needed:
        raise InsufficientDataError(
            f"{what} needs at least {needed} prices, series has {n}", needed, n
        )


def moving_average(series, window: int) -> np.ndarray:
    x = _prices(series)
    if window < 1:
        raise IndicatorError("window must be >= 1")
    _require(len(x), window, f"moving average over {window}")
    return _rolling_mean_kernel(x, window)


def rsi(series, period: int = 300) -> np.ndarray:
    """Relative strength index with simple rolling means of gains and losses.

    Element ``k`` belongs to series index ``k + period``. A window with no
    losses scores 100, no gains 0, neither 50.
    """
    x = _prices(series)
    if period < 2:
        raise IndicatorError("period must be >= 2")
    _require(len(x), period + 1, f"RSI over {period}")
    return _rsi_kernel(x, period)


def cci(series, period: int = 300) -> np.ndarray:
    """Commodity channel index using the price itself as typical price.

    Zero mean absolute deviation yields 0.
    """
    x = _prices(series)
    if period < 2:
        raise IndicatorError("period must be >= 2")
    _require(len(x), period, f"CCI over {period}")
    return _cci_kernel(x, period)


def williams_r(series, period: int = 300) -> np.ndarray:
    """Williams %R in [-100, 0]; a flat window returns -50."""
    x = _prices(series)
    if period < 2:
        raise IndicatorError("period must be >= 2")
    _require(len(x), period, f"Williams %R over {period}")
    return _williams_kernel(x, period)


def price_oscillator(series, windows: Sequence[int] = (300, 600, 900)) -> np.ndarray:
    """Differences between the shortest MA and each longer MA.

    Returns shape ``(n - max(windows) + 1, len(windows) - 1)``.
    """
    x = _prices(series)
    windows = [int(w) for w in windows]
    if len(windows) < 2:
        raise IndicatorError("price oscillator needs at least two windows")
    longest = max(windows)
    _require(len(x), longest, f"price oscillator over {windows}")
    m = len(x) - longest + 1
    mas = [moving_average(x, w)[-m:] for w in windows]
    return np.column_stack([mas[0] - other for other in mas[1:]])


@dataclass
class IndicatorFrame:
    """Aligned indicator outputs for every index past the warm-up."""

    config: IndicatorConfig
    indices: np.ndarray
    mids: np.ndarray
    ma: np.ndarray
    rsi: np.ndarray
    cci: np.ndarray
    williams: np.ndarray
    price_osc: np.ndarray
    normalized: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self) -> Iterator[IndicatorVector]:
        for k in range(len(self.indices)):
            yield IndicatorVector(
                index=int(self.indices[k]),
                ma=tuple(self.ma[k].tolist()),
                rsi=float(self.rsi[k]),
                cci=float(self.cci[k]),
                williams=float(self.williams[k]),
                price_osc=tuple(self.price_osc[k].tolist()),
                normalized=self.normalized[k],
            )

    def raw_matrix(self) -> np.ndarray:
        return np.column_stack(
            [self.ma, self.rsi, self.cci, self.williams, self.price_osc]
        )

    def to_csv(self, path) -> None:
        header = "index," + ",".join(self.config.column_names)
        body = np.column_stack([self.indices, self.raw_matrix()])
        fmt = ["%d"] + ["%.17g"] * (body.shape[1] - 1)
        np.savetxt(path, body, delimiter=",", header=header, comments="", fmt=fmt)


def indicator_vector_stream(series, cfg: IndicatorConfig | None = None) -> IndicatorFrame:
    """Run every indicator simulator and align them into ANN input vectors.

    Normalised layout per row: one MA distance per window, RSI, CCI,
    Williams, then the oscillator components; every entry lies in [-1, 1].
    """
    cfg = cfg or IndicatorConfig()
    x = _prices(series)
    warm = cfg.warmup
    _require(len(x), warm, "indicator vector stream")
    m = len(x) - warm + 1
    ma = np.column_stack([moving_average(x, w)[-m:] for w in cfg.ma_windows])
    r = rsi(x, cfg.rsi_period)[-m:]
    c = cci(x, cfg.cci_period)[-m:]
    w = williams_r(x, cfg.williams_period)[-m:]
    if len(cfg.ma_windows) > 1:
        po = ma[:, :1] - ma[:, 1:]
    else:
        po = np.empty((m, 0))
    px = x[-m:]
    norm = np.empty((m, len(cfg.column_names)))
    k = len(cfg.ma_windows)
    norm[:, :k] = np.clip((px[:, None] - ma) / cfg.ma_scale, -1.0, 1.0)
    norm[:, k] = (r - 50.0) / 50.0
    norm[:, k + 1] = np.clip(c, -cfg.cci_clamp, cfg.cci_clamp) / cfg.cci_clamp
    norm[:, k + 2] = (w + 50.0) / 50.0
    norm[:, k + 3:] = np.clip(po / cfg.ma_scale, -1.0, 1.0)
    indices = np.arange(warm - 1, len(x), dtype=np.int64)
    return IndicatorFrame(cfg, indices, px.copy(), ma, r, c, w, po, norm)
