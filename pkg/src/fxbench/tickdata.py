"""Tick parsing, synthetic series and flat-area preprocessing.

TrueFX monthly files carry one quote per line and no header::

    EUR/USD,20211001 00:00:00.123,1.15712,1.15714

Series are kept as two parallel numpy arrays (UTC epoch milliseconds and
prices) so downstream indicator kernels can consume them without copying.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, TextIO, Union

import numpy as np

from .errors import DataError

PIP = 0.0001
SERIES_HEADER = "timestamp_ms,mid"

# 2021-10-01T00:00:00Z, used as the default clock origin for synthetic data.
SYNTH_EPOCH_MS = 1633046400000


class TickDataError(DataError):
    """Base class for problems with tick input."""


class TickParseError(TickDataError):
    """A tick line could not be parsed. Carries the offending line."""

    def __init__(self, message: str, line: str, lineno: int | None = None):
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(f"{where}{message}: {line.strip()!r}")
        self.line = line
        self.lineno = lineno


class FieldCountError(TickParseError):
    pass


class TimestampError(TickParseError):
    pass


class PriceError(TickParseError):
    pass


class CrossedQuoteError(TickParseError):
    pass


class EmptySeriesError(TickDataError):
    pass


@dataclass(frozen=True)
class Tick:
    pair: str
    timestamp: datetime
    bid: float
    ask: float

    @property
    def mid(self) -> float:
        return (self.bid + self.ask) / 2.0

    @property
    def timestamp_ms(self) -> int:
        return _datetime_to_ms(self.timestamp)


@dataclass
class PriceSeries:
    """Ordered prices with millisecond UTC timestamps.

    ``mids`` holds whichever quote side was selected at load time (mid by
    default). Timestamps must be non-decreasing.
    """

    timestamps_ms: np.ndarray
    mids: np.ndarray
    source_label: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.timestamps_ms = np.asarray(self.timestamps_ms, dtype=np.int64)
        self.mids = np.asarray(self.mids, dtype=np.float64)
        if self.timestamps_ms.shape != self.mids.shape or self.mids.ndim != 1:
            raise TickDataError("timestamps and mids must be 1-d arrays of equal length")
        if len(self.timestamps_ms) > 1 and np.any(np.diff(self.timestamps_ms) < 0):
            raise TickDataError("timestamps must be non-decreasing")

    def __len__(self) -> int:
        return len(self.mids)

    def slice(self, start: int, stop: int | None = None, label: str | None = None) -> "PriceSeries":
        return PriceSeries(
            self.timestamps_ms[start:stop].copy(),
            self.mids[start:stop].copy(),
            self.source_label if label is None else label,
        )

    def with_offset(self, delta: float) -> "PriceSeries":
        return PriceSeries(self.timestamps_ms.copy(), self.mids + delta, self.source_label)


def _datetime_to_ms(ts: datetime) -> int:
    delta = ts - datetime(1970, 1, 1, tzinfo=timezone.utc)
    return (delta.days * 86400 + delta.seconds) * 1000 + delta.microseconds // 1000


def _parse_timestamp(text: str) -> datetime:
    # "yyyymmdd hh:mm:ss.fff"
    if len(text) != 21 or text[8] != " " or text[11] != ":" or text[14] != ":" or text[17] != ".":
        raise ValueError("expected 'yyyymmdd hh:mm:ss.fff'")
    parts = (text[0:4], text[4:6], text[6:8], text[9:11], text[12:14], text[15:17], text[18:21])
    if not all(p.isdigit() for p in parts):
        raise ValueError("non-digit in timestamp")
    y, mo, d, h, mi, s, ms = (int(p) for p in parts)
    return datetime(y, mo, d, h, mi, s, ms * 1000, tzinfo=timezone.utc)


def _parse_price(text: str) -> float:
    value = float(text)
    if not np.isfinite(value) or value <= 0:
        raise ValueError("price must be a positive finite number")
    return value


def parse_tick_line(line: str, lineno: int | None = None) -> Tick:
    """Parse one TrueFX record into a validated :class:`Tick`.

    Raises a distinct :class:`TickParseError` subclass for each failure kind
    (field count, timestamp, price, crossed quote).
    """
    fields = line.strip().split(",")
    if len(fields) != 4:
        raise FieldCountError(f"expected 4 fields, got {len(fields)}", line, lineno)
    pair, ts_text, bid_text, ask_text = (f.strip() for f in fields)
    try:
        ts = _parse_timestamp(ts_text)
    except ValueError as exc:
        raise TimestampError(f"bad timestamp ({exc})", line, lineno) from None
    try:
        bid = _parse_price(bid_text)
        ask = _parse_price(ask_text)
    except ValueError as exc:
        raise PriceError(f"bad price ({exc})", line, lineno) from None
    if ask < bid:
        raise CrossedQuoteError(f"crossed quote: ask {ask} < bid {bid}", line, lineno)
    return Tick(pair, ts, bid, ask)


def _open_lines(source: Union[str, os.PathLike, TextIO, Iterable[str]]):
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="ascii", newline=""), True
    return source, False


def load_series(
    source: Union[str, os.PathLike, TextIO, Iterable[str]],
    pair_filter: str | None = None,
    price: str = "mid",
    label: str | None = None,
) -> PriceSeries:
    """Read a TrueFX tick file into a raw (not yet de-flattened) series.

    Args:
        source: Path, open text reader, or any iterable of lines.
        pair_filter: Keep only ticks for this pair (e.g. ``"EUR/USD"``).
        price: ``"mid"``, ``"bid"`` or ``"ask"``.
        label: Series label; defaults to the file stem for path sources.
    """
    if price not in ("mid", "bid", "ask"):
        raise ValueError(f"price must be mid, bid or ask, got {price!r}")
    handle, owned = _open_lines(source)
    ts_list: list[int] = []
    px_list: list[float] = []
    try:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            tick = parse_tick_line(line, lineno)
            if pair_filter is not None and tick.pair != pair_filter:
                continue
            ts_list.append(tick.timestamp_ms)
            if price == "mid":
                px_list.append(tick.mid)
            else:
                px_list.append(tick.bid if price == "bid" else tick.ask)
    finally:
        if owned:
            handle.close()
    if not px_list:
        raise EmptySeriesError("source contains no tick lines")
    if label is None:
        label = os.path.splitext(os.path.basename(os.fspath(source)))[0] if owned else ""
    return PriceSeries(np.array(ts_list, dtype=np.int64), np.array(px_list), label)


def remove_flat_areas(series: PriceSeries) -> PriceSeries:
    """Collapse every run of equal consecutive prices to its first point."""
    if len(series) == 0:
        raise EmptySeriesError("cannot preprocess an empty series")
    keep = np.empty(len(series), dtype=bool)
    keep[0] = True
    keep[1:] = series.mids[1:] != series.mids[:-1]
    return PriceSeries(series.timestamps_ms[keep], series.mids[keep], series.source_label)


def synthesize_series(
    seed: int,
    length: int,
    start: float = 1.15,
    vol: float = PIP,
    drift: float = 0.0,
    step_ms: int = 1000,
    start_ms: int = SYNTH_EPOCH_MS,
    label: str = "synthetic",
) -> PriceSeries:
    """Seeded Gaussian random walk, already free of flat areas.

    Steps that are exactly zero, or that leave the price unchanged after
    floating-point addition, are redrawn.
    """
    if length <= 0:
        raise ValueError("length must be positive")
    if vol <= 0:
        raise ValueError("vol must be positive")
    rng = np.random.default_rng(seed)
    steps = rng.normal(drift, vol, size=length - 1)
    while True:
        mids = np.empty(length)
        mids[0] = start
        np.cumsum(steps, out=mids[1:])
        mids[1:] += start
        flat = np.flatnonzero(mids[1:] == mids[:-1])
        if flat.size == 0:
            break
        steps[flat] = rng.normal(drift, vol, size=flat.size)
    timestamps = start_ms + step_ms * np.arange(length, dtype=np.int64)
    return PriceSeries(timestamps, mids, label)


def write_series(series: PriceSeries, target: Union[str, os.PathLike, TextIO]) -> None:
    """Serialize as ``timestamp_ms,mid`` CSV; floats use shortest round-trip repr."""
    owned = isinstance(target, (str, os.PathLike))
    handle = open(target, "w", encoding="ascii", newline="") if owned else target
    try:
        handle.write(SERIES_HEADER + "\n")
        for ts, mid in zip(series.timestamps_ms.tolist(), series.mids.tolist()):
            handle.write(f"{ts},{mid!r}\n")
    finally:
        if owned:
            handle.close()


def read_series(source: Union[str, os.PathLike, TextIO], label: str | None = None) -> PriceSeries:
    owned = isinstance(source, (str, os.PathLike))
    handle = open(source, "r", encoding="ascii") if owned else source
    try:
        header = handle.readline().strip()
        if header != SERIES_HEADER:
            raise TickDataError(f"expected header {SERIES_HEADER!r}, got {header!r}")
        ts_list, px_list = [], []
        for lineno, line in enumerate(handle, start=2):
            if not line.strip():
                continue
            try:
                ts_text, mid_text = line.split(",")
                ts_list.append(int(ts_text))
                px_list.append(float(mid_text))
            except ValueError:
                raise TickDataError(f"line {lineno}: malformed series row {line.strip()!r}") from None
    finally:
        if owned:
            handle.close()
    if not px_list:
        raise EmptySeriesError("series file has no rows")
    if label is None:
        label = os.path.splitext(os.path.basename(os.fspath(source)))[0] if owned else ""
    return PriceSeries(np.array(ts_list, dtype=np.int64), np.array(px_list), label)


def series_to_csv(series: PriceSeries) -> str:
    buf = io.StringIO()
    write_series(series, buf)
    return buf.getvalue()
