"""Timing harness, report rendering and the end-to-end benchmark driver.

Only one timed run may execute at a time in a process; :func:`time_run`
takes a module-level lock without blocking and fails on contention. Data
loading and any untimed preparation happen before the clock starts, and
each record keeps the median wall time over the plan's repetitions.
"""

from __future__ import annotations

import csv
import gc
import io
import json
import logging
import os
import platform
import statistics
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import psutil

from .errors import FxBenchError
from .evaluation import (
    OVERALL,
    QualityReport,
    VerificationConfig,
    aggregate,
    evaluate_signals,
    render_quality_csv,
    render_quality_markdown,
)
from .indicators import IndicatorConfig
from .lstm_baselines import TrainConfig, build_model, get_spec, predict_signals, train
from .paired_ann import AnnPairConfig, run_custom_ann
from .signals import ForecastSignal, emission_mask, write_signal_log
from .tickdata import PriceSeries, synthesize_series

log = logging.getLogger(__name__)

MODES = ("end_to_end", "predict_only")
FAILED = "FAILED"
SAMPLE_HZ = 20.0


class PlanError(FxBenchError, ValueError):
    pass


class BenchLockError(FxBenchError, RuntimeError):
    pass


_RUN_LOCK = threading.Lock()


# --------------------------------------------------------------------------
# environment


def _cpu_model() -> str:
    try:
        with open("/proc/cpuinfo", encoding="utf-8") as fh:
            for line in fh:
                if line.lower().startswith("model name"):
                    return line.split(":", 1)[1].strip()
    except OSError:
        pass
    return platform.processor() or platform.machine() or "unknown"


def environment_descriptor() -> dict:
    """Host facts embedded in every report (CPU, cores, RAM, OS, runtime)."""
    return {
        "cpu_model": _cpu_model(),
        "cpu_cores": os.cpu_count() or 0,
        "total_ram_gib": round(psutil.virtual_memory().total / 2**30, 2),
        "os": f"{platform.system()} {platform.release()}",
        "python": platform.python_version(),
        "numpy": np.__version__,
    }


def environment_lines(env: dict) -> list[str]:
    return [f"environment: {json.dumps(env, sort_keys=True)}"]


# --------------------------------------------------------------------------
# model references


class ModelRef:
    """Something the harness can time.

    ``prepare`` runs untimed and returns the zero-argument callable whose
    execution is measured; the callable returns the produced signals.
    """

    label: str = "model"

    def prepare(self, series: PriceSeries, mode: str) -> Callable[[], list[ForecastSignal]]:
        raise NotImplementedError


@dataclass
class CustomAnnModel(ModelRef):
    cfg: AnnPairConfig = field(default_factory=AnnPairConfig)
    icfg: IndicatorConfig = field(default_factory=IndicatorConfig)

    @property
    def label(self) -> str:
        return self.cfg.label

    def prepare(self, series, mode):
        _warm_custom_ann(self.cfg, self.icfg)
        # a single adaptive pass in either mode: there is no separate fit phase
        return lambda: run_custom_ann(series, self.cfg, self.icfg)


@dataclass
class LstmModel(ModelRef):
    name: str
    seed: int = 0
    tcfg: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        self.spec = get_spec(self.name)

    @property
    def label(self) -> str:
        return self.name

    def prepare(self, series, mode):
        tcfg = self.tcfg
        emission_mask(np.zeros(2))  # load the compiled emission rule outside the clock

        def fit():
            return train(build_model(self.spec, self.seed), series, self.spec, tcfg)

        def emit(model):
            return predict_signals(model, series, self.spec,
                                   threshold=tcfg.emission_threshold,
                                   train_fraction=tcfg.train_fraction)

        if mode == "predict_only":
            model = fit()
            return lambda: emit(model)
        return lambda: emit(fit())


_WARMED: set = set()


def _warm_custom_ann(cfg: AnnPairConfig, icfg: IndicatorConfig) -> None:
    """Trigger JIT compilation outside the clock."""
    key = (len(icfg.ma_windows), len(cfg.hidden_layout))
    if key in _WARMED:
        return
    small = IndicatorConfig(ma_windows=tuple(range(3, 3 + len(icfg.ma_windows))),
                            rsi_period=3, cci_period=3, williams_period=3)
    tiny = AnnPairConfig(pair_count=cfg.pair_count, hidden_layout=cfg.hidden_layout,
                         train_window=5, transfer_every=3, horizon=4)
    run_custom_ann(synthesize_series(0, 64), tiny, small)
    _WARMED.add(key)


def model_from_name(name: str, seed: int, ann_cfg: AnnPairConfig, icfg: IndicatorConfig,
                    tcfg: TrainConfig) -> ModelRef:
    if name in ("custom_ann", ann_cfg.label):
        return CustomAnnModel(ann_cfg, icfg)
    return LstmModel(name, seed, tcfg)


# --------------------------------------------------------------------------
# timing


@dataclass
class BenchPlan:
    models: list
    datasets: list[str]
    repetitions: int = 3
    mode: str = "end_to_end"

    def validate(self) -> None:
        if not self.models:
            raise PlanError("plan has no models")
        if not self.datasets:
            raise PlanError("plan has no datasets")
        if self.repetitions < 1:
            raise PlanError("repetitions must be >= 1")
        if self.mode not in MODES:
            raise PlanError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass
class TimingRecord:
    model_label: str
    period_label: str
    wall_seconds: float
    peak_memory_mib: float
    environment: dict
    status: str = "ok"
    error: str = ""
    runs: tuple[float, ...] = ()
    signals: list = field(default_factory=list, repr=False, compare=False)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


class _MemorySampler(threading.Thread):
    """Polls this process's resident set size; touches nothing else."""

    def __init__(self, hz: float = SAMPLE_HZ):
        super().__init__(daemon=True)
        self._proc = psutil.Process()
        self._period = 1.0 / hz
        self._halt = threading.Event()
        self.peak = self._proc.memory_info().rss

    def run(self):
        while not self._halt.is_set():
            self.peak = max(self.peak, self._proc.memory_info().rss)
            self._halt.wait(self._period)

    def stop(self) -> int:
        self._halt.set()
        self.join()
        self.peak = max(self.peak, self._proc.memory_info().rss)
        return self.peak


def time_run(model: ModelRef, series: PriceSeries, plan: BenchPlan,
             environment: dict | None = None) -> TimingRecord:
    """Time one model on one series; the median of ``plan.repetitions`` runs.

    A model that raises produces a record with ``status='failed'`` instead
    of propagating, so a plan can carry on with the next model.
    """
    plan.validate()
    env = environment or environment_descriptor()
    if not _RUN_LOCK.acquire(blocking=False):
        raise BenchLockError("another benchmark run is in progress")
    try:
        label = model.label
        try:
            work = model.prepare(series, plan.mode)
            durations = []
            sampler = _MemorySampler()
            sampler.start()
            try:
                for _ in range(plan.repetitions):
                    gc.collect()
                    t0 = time.perf_counter()
                    signals = work()
                    durations.append(time.perf_counter() - t0)
            finally:
                peak = sampler.stop()
        except Exception as exc:  # model failure is data, not a crash
            log.warning("model %s failed on %s: %s", label, series.source_label, exc)
            return TimingRecord(label, series.source_label, 0.0, 0.0, env, "failed",
                                f"{type(exc).__name__}: {exc}")
        return TimingRecord(
            label, series.source_label, float(statistics.median(durations)),
            peak / 2**20, env, runs=tuple(durations), signals=signals,
        )
    finally:
        _RUN_LOCK.release()


# --------------------------------------------------------------------------
# timing tables and plot data


@dataclass
class TimingTable:
    models: list[str]
    periods: list[str]
    values: dict[tuple[str, str], float | None]  # None marks a failed or missing run
    overall: dict[str, float | None]


def timing_table(records: Sequence[TimingRecord], periods: Sequence[str] | None = None) -> TimingTable:
    """Arrange records on a model x period grid with an Overall sum column."""
    values: dict[tuple[str, str], float | None] = {}
    for r in records:
        key = (r.model_label, r.period_label)
        if key in values:
            raise PlanError(f"duplicate timing record for {key}")
        values[key] = r.wall_seconds if r.ok else None
    models = sorted({m for m, _ in values})
    cols = list(periods) if periods is not None else sorted({p for _, p in values})
    overall = {}
    for m in models:
        row = [values.get((m, p)) for p in cols]
        overall[m] = None if any(v is None for v in row) else sum(row)
    return TimingTable(models, cols, values, overall)


def _fmt_seconds(v: float | None, digits: int) -> str:
    return FAILED if v is None else f"{v:.{digits}f}"


def render_timing_table(records: Sequence[TimingRecord], fmt: str = "md", digits: int = 3,
                        periods: Sequence[str] | None = None,
                        header_lines: Sequence[str] = ()) -> str:
    table = timing_table(records, periods)
    header = ["model", *table.periods, OVERALL]
    rows = [
        [m, *(_fmt_seconds(table.values.get((m, p)), digits) for p in table.periods),
         _fmt_seconds(table.overall[m], digits)]
        for m in table.models
    ]
    if fmt == "csv":
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return buf.getvalue()
    if fmt != "md":
        raise ValueError(f"unknown format {fmt!r}")
    lines = ["| " + " | ".join(header) + " |", "|---|" + "---:|" * (len(header) - 1)]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines) + "\n"


def timing_records_csv(records: Sequence[TimingRecord], header_lines: Sequence[str] = ()) -> str:
    """Long-format dump of every record, including per-repetition times."""
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "period", "wall_seconds", "peak_memory_mib", "status", "runs", "error"])
    for r in sorted(records, key=lambda r: (r.model_label, r.period_label)):
        w.writerow([r.model_label, r.period_label, f"{r.wall_seconds:.6f}",
                    f"{r.peak_memory_mib:.1f}", r.status,
                    ";".join(f"{x:.6f}" for x in r.runs), r.error])
    return buf.getvalue()


def read_timing_records(text: str, environment: dict | None = None) -> list[TimingRecord]:
    rows = list(csv.reader(line for line in text.splitlines() if not line.startswith("#")))
    if not rows or rows[0][:3] != ["model", "period", "wall_seconds"]:
        raise ValueError("not a timing CSV")
    out = []
    for r in rows[1:]:
        runs = tuple(float(x) for x in r[5].split(";") if x)
        out.append(TimingRecord(r[0], r[1], float(r[2]), float(r[3]), environment or {},
                                r[4], r[6], runs))
    return out


def render_plot_data(quality: QualityReport, timing: Sequence[TimingRecord],
                     header_lines: Sequence[str] = ()) -> tuple[str, str]:
    """CSV data behind the time-per-period chart and the signals-versus-time chart.

    Returns ``(figure1, figure2)``: ``model,period,seconds`` rows and
    ``model,successful_signals_overall,total_seconds_overall`` rows.
    """
    if not quality.models:
        raise PlanError("quality report is empty")
    table = timing_table(timing)
    if set(quality.models) != set(table.models):
        raise PlanError(
            f"model sets differ: quality {sorted(quality.models)} vs timing {table.models}"
        )
    prefix = "".join(f"# {line}\n" for line in header_lines)
    b1 = io.StringIO()
    w = csv.writer(b1, lineterminator="\n")
    w.writerow(["model", "period", "seconds"])
    for m in table.models:
        for p in table.periods:
            v = table.values.get((m, p))
            w.writerow([m, p, FAILED if v is None else repr(v)])
    b2 = io.StringIO()
    w = csv.writer(b2, lineterminator="\n")
    w.writerow(["model", "successful_signals_overall", "total_seconds_overall"])
    for m in table.models:
        v = table.overall[m]
        w.writerow([m, quality.cell(m, OVERALL).successful_all, FAILED if v is None else repr(v)])
    return prefix + b1.getvalue(), prefix + b2.getvalue()


# --------------------------------------------------------------------------
# the full benchmark


@dataclass
class BenchResult:
    timing: list[TimingRecord]
    quality: QualityReport
    outputs: dict[str, Path]
    environment: dict


def safe_name(label: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in label)


def run_bench(plan: BenchPlan, series_by_label: dict[str, PriceSeries], out_dir: str | os.PathLike,
              vcfg: VerificationConfig | None = None, decimal_sep: str = ",",
              extra_header: Sequence[str] = ()) -> BenchResult:
    """Time every model on every dataset, evaluate signals and write the report bundle.

    Files written to ``out_dir``: ``timing.csv``, ``quality.csv``,
    ``signals_<model>_<period>.csv``, ``figure1.csv``, ``figure2.csv``,
    ``report.md`` and ``environment.json``.
    """
    plan.validate()
    vcfg = vcfg or VerificationConfig()
    missing = [d for d in plan.datasets if d not in series_by_label]
    if missing:
        raise PlanError(f"no series loaded for datasets {missing}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    env = environment_descriptor()
    header = [*environment_lines(env), f"mode: {plan.mode}; repetitions: {plan.repetitions}",
              *extra_header]
    records, outcomes, outputs = [], [], {}
    for model in plan.models:
        for label in plan.datasets:
            series = series_by_label[label]
            rec = time_run(model, series, plan, env)
            records.append(rec)
            log.info("%s on %s: %s %.3fs", rec.model_label, label, rec.status, rec.wall_seconds)
            if not rec.ok:
                continue
            path = out / f"signals_{safe_name(rec.model_label)}_{safe_name(label)}.csv"
            write_signal_log(rec.signals, path)
            outputs[path.name] = path
            outcomes += evaluate_signals(rec.signals, series, vcfg, label)
    labels = [m.label for m in plan.models]
    quality = aggregate(outcomes, cfg=vcfg, models=labels, periods=plan.datasets)

    def put(name: str, text: str) -> None:
        path = out / name
        path.write_text(text, encoding="utf-8")
        outputs[name] = path

    put("timing.csv", timing_records_csv(records, header))
    put("quality.csv", render_quality_csv(quality, header))
    fig1, fig2 = render_plot_data(quality, records, header)
    put("figure1.csv", fig1)
    put("figure2.csv", fig2)
    put("report.md", render_report(records, quality, env, plan, decimal_sep, extra_header))
    put("environment.json", json.dumps(env, indent=2, sort_keys=True) + "\n")
    return BenchResult(records, quality, outputs, env)


def render_report(records, quality: QualityReport, env: dict, plan: BenchPlan | None = None,
                  decimal_sep: str = ",", extra_header: Sequence[str] = ()) -> str:
    parts = ["# Benchmark report", "", "## Environment", ""]
    parts += [f"- {k}: {v}" for k, v in sorted(env.items())]
    if plan is not None:
        parts.append(f"- mode: {plan.mode}, repetitions: {plan.repetitions} (median reported)")
    parts += [f"- {line}" for line in extra_header]
    parts += ["", "## Time in seconds", "",
              render_timing_table(records, "md", 3, sorted(quality.periods) or None),
              "## Forecasting quality", "",
              f"Verification: {quality.config.describe()}.", "",
              render_quality_markdown(quality, decimal_sep)]
    failed = [r for r in records if not r.ok]
    if failed:
        parts += ["## Failed runs", ""]
        parts += [f"- {r.model_label} / {r.period_label}: {r.error}" for r in failed]
        parts.append("")
    return "\n".join(parts)


def synthetic_datasets(labels: Sequence[str], seed: int, length: int, start: float,
                       vol: float, drift: float = 0.0) -> dict[str, PriceSeries]:
    """One seeded random walk per label; label ``k`` uses seed ``seed + k``."""
    return {
        label: synthesize_series(seed + k, length, start, vol, drift, label=label)
        for k, label in enumerate(labels)
    }

