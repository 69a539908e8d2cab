"""Command-line entry point: ``fxbench <subcommand> ...``.

Exit status: 0 success, 1 usage or config error, 2 data error, 3 model failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .bench import (
    BenchPlan,
    PlanError,
    environment_descriptor,
    environment_lines,
    model_from_name,
    read_timing_records,
    render_timing_table,
    run_bench,
    safe_name,
    synthetic_datasets,
)
from .config import BenchConfig, ConfigError, load_config
from .errors import DataError, FxBenchError, InsufficientDataError, ModelError
from .evaluation import (
    aggregate,
    evaluate_signals,
    read_quality_csv,
    render_quality_csv,
    render_quality_markdown,
)
from .lstm_baselines import TABLE1, build_model, load_checkpoint, predict_signals, save_checkpoint, train
from .paired_ann import run_custom_ann
from .signals import read_signal_log, write_signal_log
from .tickdata import PriceSeries, load_series, read_series, remove_flat_areas, synthesize_series, write_series

log = logging.getLogger("fxbench")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_MODEL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    """Usage errors print help and exit 1 rather than argparse's 2 (2 means bad data here)."""

    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(EXIT_USAGE, f"\n{self.prog}: error: {message}\n")


class _UsageError(FxBenchError):
    pass


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # on subparsers the defaults are suppressed so they never clobber values given before the subcommand
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", default=d(None), help="TOML config file")
    parser.add_argument("--seed", type=int, default=d(None), help="override the config seed")
    parser.add_argument("--out", default=d("results"), help="output directory (default: results)")
    parser.add_argument("--format", choices=("csv", "md"), default=d("md"),
                        help="format of tables printed to stdout")
    parser.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fxbench", description="FX tick forecasting benchmark.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(p, suppress=False)
    sub = p.add_subparsers(dest="command", metavar="<command>", parser_class=_Parser)
    sub.required = True

    def add(name, help_text):
        sp = sub.add_parser(name, help=help_text, description=help_text)
        _global_flags(sp, suppress=True)
        return sp

    sp = add("ingest", "parse a TrueFX tick file, drop flat areas, write a series CSV")
    sp.add_argument("ticks", help="TrueFX CSV file")
    sp.add_argument("--pair", default=None, help="keep only this pair (default: config data.pair)")
    sp.add_argument("--price", choices=("mid", "bid", "ask"), default=None)
    sp.add_argument("--label", default=None, help="series label (default: file stem)")
    sp.add_argument("--keep-flat", action="store_true", help="skip flat-area removal")

    sp = add("synth", "write a seeded synthetic random-walk series")
    sp.add_argument("--length", type=int, default=None)
    sp.add_argument("--vol", type=float, default=None, help="per-tick standard deviation")
    sp.add_argument("--drift", type=float, default=None)
    sp.add_argument("--start", type=float, default=None)
    sp.add_argument("--label", default="synthetic")

    sp = add("train", "train one LSTM variant and save a checkpoint")
    sp.add_argument("--model", required=True, choices=sorted(TABLE1))
    sp.add_argument("--series", required=True, help="series CSV written by ingest or synth")

    sp = add("run", "produce the signal log of one model on one series")
    sp.add_argument("--model", required=True, help="'custom_ann' or an LSTM variant name")
    sp.add_argument("--series", required=True)
    sp.add_argument("--checkpoint", default=None, help="trained LSTM checkpoint (skips training)")

    sp = add("evaluate", "verify signal logs against a series and write a quality report")
    sp.add_argument("--series", required=True)
    sp.add_argument("--signals", required=True, nargs="+", help="signal log CSV files")
    sp.add_argument("--period", default=None, help="period label (default: series label)")

    add("bench", "run the configured plan: timing, quality, signal logs and plot data")

    sp = add("report", "render saved timing.csv and quality.csv as tables")
    sp.add_argument("results", nargs="?", default=None,
                    help="directory holding bench outputs (default: --out)")
    return p


# --------------------------------------------------------------------------
# helpers


def _config(args) -> BenchConfig:
    cfg = load_config(args.config)
    return cfg.with_seed(args.seed) if args.seed is not None else cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _is_custom(name: str, cfg: BenchConfig) -> bool:
    return name in ("custom_ann", cfg.custom_ann.label)


def _config_lines(cfg: BenchConfig) -> list[str]:
    return [*environment_lines(environment_descriptor()), *cfg.summary_lines()]


# --------------------------------------------------------------------------
# subcommands


def cmd_ingest(args, cfg: BenchConfig) -> int:
    series = load_series(args.ticks, pair_filter=args.pair or cfg.data.pair,
                         price=args.price or cfg.data.price, label=args.label)
    raw = len(series)
    if not args.keep_flat:
        series = remove_flat_areas(series)
    path = _out_dir(args) / f"{safe_name(series.source_label or 'series')}.csv"
    write_series(series, path)
    log.info("%d ticks read, %d kept", raw, len(series))
    _emit(str(path))
    return EXIT_OK


def cmd_synth(args, cfg: BenchConfig) -> int:
    d = cfg.data
    series = synthesize_series(
        cfg.seed,
        args.length if args.length is not None else d.synthetic_length,
        args.start if args.start is not None else d.synthetic_start,
        args.vol if args.vol is not None else d.synthetic_vol,
        args.drift if args.drift is not None else d.synthetic_drift,
        label=args.label,
    )
    path = _out_dir(args) / f"{safe_name(args.label)}.csv"
    write_series(series, path)
    _emit(str(path))
    return EXIT_OK


def cmd_train(args, cfg: BenchConfig) -> int:
    series = read_series(args.series)
    model = train(build_model(args.model, cfg.lstm.seed), series, tcfg=cfg.lstm)
    path = _out_dir(args) / f"{safe_name(args.model)}.npz"
    save_checkpoint(model, path)
    losses = ", ".join(f"{v:.6g}" for v in model.report.epoch_losses)
    log.info("epoch losses: %s", losses)
    _emit(str(path))
    return EXIT_OK


def cmd_run(args, cfg: BenchConfig) -> int:
    series = read_series(args.series)
    if _is_custom(args.model, cfg):
        signals = run_custom_ann(series, cfg.custom_ann, cfg.indicators)
        label = cfg.custom_ann.label
    else:
        if args.model not in TABLE1:
            raise _UsageError(f"unknown model {args.model!r}; choose custom_ann or one of {sorted(TABLE1)}")
        if args.checkpoint:
            model = load_checkpoint(args.checkpoint)
            if model.spec.name != args.model:
                raise _UsageError(f"checkpoint holds {model.spec.name}, not {args.model}")
        else:
            model = train(build_model(args.model, cfg.lstm.seed), series, tcfg=cfg.lstm)
        signals = predict_signals(model, series, threshold=cfg.lstm.emission_threshold,
                                  train_fraction=cfg.lstm.train_fraction)
        label = args.model
    path = _out_dir(args) / f"signals_{safe_name(label)}_{safe_name(series.source_label)}.csv"
    write_signal_log(signals, path)
    log.info("%d signals", len(signals))
    _emit(str(path))
    return EXIT_OK


def cmd_evaluate(args, cfg: BenchConfig) -> int:
    series = read_series(args.series)
    period = args.period or series.source_label
    outcomes, empty = [], []
    for path in args.signals:
        signals = read_signal_log(path)
        if not signals:
            empty.append(Path(path).stem)  # no label to read, so the file names the row
        outcomes += evaluate_signals(signals, series, cfg.evaluation, period)
    report = aggregate(outcomes, cfg=cfg.evaluation, models=empty, periods=[period])
    (_out_dir(args) / "quality.csv").write_text(
        render_quality_csv(report, _config_lines(cfg)), encoding="utf-8")
    if args.format == "csv":
        _emit(render_quality_csv(report))
    else:
        _emit(render_quality_markdown(report, cfg.decimal))
    return EXIT_OK


def _bench_series(cfg: BenchConfig) -> dict[str, PriceSeries]:
    d = cfg.data
    if not d.files:
        return synthetic_datasets(d.periods, cfg.seed, d.synthetic_length, d.synthetic_start,
                                  d.synthetic_vol, d.synthetic_drift)
    missing = [p for p in d.periods if p not in d.files]
    if missing:
        raise DataError(f"data.files has no entry for periods {missing}")
    return {
        p: remove_flat_areas(load_series(d.files[p], pair_filter=d.pair, price=d.price, label=p))
        for p in d.periods
    }


def cmd_bench(args, cfg: BenchConfig) -> int:
    series = _bench_series(cfg)
    models = [
        model_from_name(name, cfg.lstm.seed, cfg.custom_ann, cfg.indicators, cfg.lstm)
        for name in cfg.plan.models
    ]
    plan = BenchPlan(models, list(cfg.data.periods), cfg.plan.repetitions, cfg.plan.mode)
    result = run_bench(plan, series, _out_dir(args), cfg.evaluation, cfg.decimal,
                       cfg.summary_lines())
    _emit(_render_tables(result.timing, result.quality, args.format, cfg.decimal))
    failed = [r for r in result.timing if not r.ok]
    for r in failed:
        log.error("%s on %s failed: %s", r.model_label, r.period_label, r.error)
    return EXIT_MODEL if failed else EXIT_OK


def _render_tables(timing, quality, fmt: str, decimal_sep: str) -> str:
    periods = list(quality.periods) or None
    if fmt == "csv":
        return render_timing_table(timing, "csv", periods=periods) + "\n" + render_quality_csv(quality)
    return (render_timing_table(timing, "md", periods=periods) + "\n"
            + render_quality_markdown(quality, decimal_sep))


def cmd_report(args, cfg: BenchConfig) -> int:
    root = Path(args.results or args.out)
    try:
        timing = read_timing_records((root / "timing.csv").read_text(encoding="utf-8"))
        quality = read_quality_csv((root / "quality.csv").read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise DataError(f"missing bench output: {exc.filename}") from None
    except ValueError as exc:
        raise DataError(str(exc)) from None
    _emit(_render_tables(timing, quality, args.format, cfg.decimal))
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest, "synth": cmd_synth, "train": cmd_train, "run": cmd_run,
    "evaluate": cmd_evaluate, "bench": cmd_bench, "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, PlanError, _UsageError) as exc:
        print(f"fxbench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InsufficientDataError as exc:
        need = f" (minimum length {exc.required})" if exc.required else ""
        print(f"fxbench: data error: {exc}{need}", file=sys.stderr)
        return EXIT_DATA
    except (DataError, OSError) as exc:
        print(f"fxbench: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ModelError, FloatingPointError) as exc:
        print(f"fxbench: model failure: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
