"""Signal verification and STA/STS aggregation.

A signal succeeds when, at any tick inside the verification horizon, the
price has moved from its emission level in the signal's direction by at
least ``magnitude_per_intensity * |intensity|`` pips. Signals emitted too
close to the end of the data to see a whole horizon are excluded from every
count.

STA is the success rate over all counted signals, STS the same over robust
signals (``|intensity| >= 1``).
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Iterable, Sequence

import numpy as np

from .signals import ROBUST_BOUNDARY, ForecastSignal
from .tickdata import PIP, PriceSeries

OVERALL = "Overall"
NA = "N/A"
# absorbs float noise in pip arithmetic (e.g. 1.1502 - 1.15 != 2 pips exactly)
PIP_EPS = 1e-9


@dataclass(frozen=True)
class VerificationConfig:
    horizon: int = 900
    pip: float = PIP
    magnitude_per_intensity: float = 1.0

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.magnitude_per_intensity < 0:
            raise ValueError("magnitude_per_intensity must be >= 0")
        if self.pip <= 0:
            raise ValueError("pip must be positive")

    def describe(self) -> str:
        return (
            f"horizon={self.horizon} ticks; success needs a favourable move of "
            f">= {self.magnitude_per_intensity:g} pip x |intensity| (pip={self.pip:g})"
        )


@dataclass(frozen=True)
class SignalOutcome:
    signal: ForecastSignal
    verdict: str  # "success" | "failure" | "excluded"
    realized_move: float  # best excursion in the signal's direction, price units
    period: str = ""

    @property
    def robust(self) -> bool:
        return classify_signal(self.signal) == "robust"


def classify_signal(signal: ForecastSignal) -> str:
    v = signal.intensity
    return "robust" if v <= -ROBUST_BOUNDARY or v >= ROBUST_BOUNDARY else "weak"


def verify_signal(signal: ForecastSignal, entry: float, future: Sequence[float],
                  cfg: VerificationConfig | None = None, period: str = "") -> SignalOutcome:
    """Judge one signal against the prices that follow its emission.

    Args:
        signal: The signal to check.
        entry: Price at the emission tick.
        future: Prices of the following ticks; only the first ``horizon`` are
            used and fewer than ``horizon`` mean the signal is excluded.
        cfg: Horizon and magnitude rule.
        period: Label copied onto the outcome for aggregation.
    """
    cfg = cfg or VerificationConfig()
    future = np.asarray(future, dtype=np.float64)[: cfg.horizon]
    sign = 1.0 if signal.direction == "up" else -1.0
    best = float(np.max(sign * (future - entry))) if future.size else 0.0
    if future.size < cfg.horizon:
        return SignalOutcome(signal, "excluded", best, period)
    needed = cfg.magnitude_per_intensity * abs(signal.intensity)
    ok = best / cfg.pip >= needed - PIP_EPS
    return SignalOutcome(signal, "success" if ok else "failure", best, period)


def evaluate_signals(signals: Iterable[ForecastSignal], series: PriceSeries,
                     cfg: VerificationConfig | None = None,
                     period: str | None = None) -> list[SignalOutcome]:
    """Verify every signal against ``series``; ``period`` defaults to the series label."""
    cfg = cfg or VerificationConfig()
    label = series.source_label if period is None else period
    mids = series.mids
    out = []
    for s in signals:
        if not 0 <= s.index < len(mids):
            raise IndexError(f"signal index {s.index} outside series of length {len(mids)}")
        out.append(verify_signal(s, mids[s.index], mids[s.index + 1:s.index + 1 + cfg.horizon], cfg, label))
    return out


def percent(successes: int, total: int) -> Decimal | None:
    """``100 * successes / total`` rounded half-up to two decimals; None if total is 0."""
    if total == 0:
        return None
    return (Decimal(100 * successes) / Decimal(total)).quantize(Decimal("0.01"), ROUND_HALF_UP)


def format_percent(value: Decimal | None, decimal_sep: str = ".") -> str:
    if value is None:
        return NA
    text = f"{value:.2f}%"
    return text.replace(".", decimal_sep) if decimal_sep != "." else text


@dataclass
class QualityCell:
    successful_all: int = 0
    total_all: int = 0
    successful_robust: int = 0
    total_robust: int = 0

    @property
    def sta_pct(self) -> Decimal | None:
        return percent(self.successful_all, self.total_all)

    @property
    def sts_pct(self) -> Decimal | None:
        return percent(self.successful_robust, self.total_robust)

    def add(self, outcome: SignalOutcome) -> None:
        if outcome.verdict == "excluded":
            return
        win = outcome.verdict == "success"
        self.total_all += 1
        self.successful_all += win
        if outcome.robust:
            self.total_robust += 1
            self.successful_robust += win


@dataclass
class QualityReport:
    models: list[str]
    periods: list[str]  # excludes the overall column
    cells: dict[tuple[str, str], QualityCell] = field(default_factory=dict)
    config: VerificationConfig = field(default_factory=VerificationConfig)

    def cell(self, model: str, period: str) -> QualityCell:
        return self.cells.get((model, period), QualityCell())


def month_of(outcome: SignalOutcome) -> str:
    ts = datetime.fromtimestamp(outcome.signal.timestamp_ms / 1000, tz=timezone.utc)
    return ts.strftime("%Y-%m")


def aggregate(outcomes: Iterable[SignalOutcome],
              period_of: Callable[[SignalOutcome], str] | None = None,
              cfg: VerificationConfig | None = None,
              models: Sequence[str] = (), periods: Sequence[str] = ()) -> QualityReport:
    """Count successes per (model, period) and per model overall.

    ``period_of`` defaults to the outcome's own period label, falling back
    to the calendar month of the signal. Extra ``models``/``periods`` make
    empty rows and columns appear in the report.
    """
    if period_of is None:
        period_of = lambda o: o.period or month_of(o)  # noqa: E731
    cells: dict[tuple[str, str], QualityCell] = defaultdict(QualityCell)
    seen_models, seen_periods = set(models), set(periods)
    for o in outcomes:
        model, period = o.signal.model_label, period_of(o)
        seen_models.add(model)
        seen_periods.add(period)
        cells[(model, period)].add(o)
        cells[(model, OVERALL)].add(o)
    for m in seen_models:
        cells.setdefault((m, OVERALL), QualityCell())
    return QualityReport(
        sorted(seen_models), sorted(seen_periods), dict(cells),
        cfg or VerificationConfig(),
    )


# --------------------------------------------------------------------------
# rendering

QUALITY_CSV_HEADER = [
    "model", "period", "successful_all", "total_all", "sta_pct",
    "successful_robust", "total_robust", "sts_pct",
]


def render_quality_csv(report: QualityReport, header_lines: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in (f"verification: {report.config.describe()}", *header_lines):
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(QUALITY_CSV_HEADER)
    for model in report.models:
        for period in [*report.periods, OVERALL]:
            c = report.cell(model, period)
            w.writerow([
                model, period, c.successful_all, c.total_all, format_percent(c.sta_pct),
                c.successful_robust, c.total_robust, format_percent(c.sts_pct),
            ])
    return buf.getvalue()


def read_quality_csv(text: str) -> QualityReport:
    rows = [r for r in csv.reader(line for line in text.splitlines() if not line.startswith("#"))]
    if not rows or rows[0] != QUALITY_CSV_HEADER:
        raise ValueError("not a quality report CSV")
    cells, models, periods = {}, [], []
    for r in rows[1:]:
        model, period = r[0], r[1]
        if model not in models:
            models.append(model)
        if period != OVERALL and period not in periods:
            periods.append(period)
        cells[(model, period)] = QualityCell(int(r[2]), int(r[3]), int(r[5]), int(r[6]))
    return QualityReport(models, periods, cells)


def render_quality_markdown(report: QualityReport, decimal_sep: str = ",",
                            include_overall: bool = True) -> str:
    """Quality table with STA/STS column pairs per period."""
    periods = [*report.periods, OVERALL] if include_overall else list(report.periods)
    head = "| Model |" + "".join(f" {p} STA | {p} STS |" for p in periods)
    sep = "|---|" + "---:|---:|" * len(periods)
    lines = [head, sep]
    for model in report.models:
        lines.append(f"| **{model}** |" + " |" * (2 * len(periods)))
        rows = {
            "Successful Forecasting Signals": lambda c: (c.successful_all, c.successful_robust),
            "Total forecasting signals": lambda c: (c.total_all, c.total_robust),
            "% Success": lambda c: (
                format_percent(c.sta_pct, decimal_sep), format_percent(c.sts_pct, decimal_sep)
            ),
        }
        for title, getter in rows.items():
            vals = [getter(report.cell(model, p)) for p in periods]
            lines.append(f"| {title} |" + "".join(f" {a} | {b} |" for a, b in vals))
    return "\n".join(lines) + "\n"
