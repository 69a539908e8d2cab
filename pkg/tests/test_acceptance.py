"""Acceptance gate: one PASS/FAIL line per primary criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they
happen; they are repeated in the terminal summary either way.
"""

import itertools
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fxbench import bench
from fxbench.bench import BenchPlan, TimingRecord, render_timing_table, time_run, timing_table
from fxbench.cli import main
from fxbench.evaluation import OVERALL, SignalOutcome, aggregate, format_percent
from fxbench.indicators import cci, moving_average, price_oscillator, rsi, williams_r
from fxbench.lstm_baselines import TABLE1, Bidirectional, Conv1D, Dense, LSTM
from fxbench.paired_ann import AnnPairConfig, init_pairs, loss_and_gradient
from fxbench.signals import ForecastSignal, read_signal_log
from fxbench.tickdata import PIP, remove_flat_areas, synthesize_series
from helpers import (
    criterion,
    naive_cci,
    naive_ma,
    naive_rsi,
    naive_williams,
    numeric_grad,
    rel_error,
    series_of,
)
from test_bench import MONTHS, TABLE3
from test_lstm import _Stack, check_layer

# (successful STA, total STA, successful STS, total STS, STA %, STS %) per model and month
TABLE2 = {
    "ANN": [(3808, 4641, 310, 407, "82,05%", "76,17%"), (10923, 13371, 880, 1070, "81,69%", "82,24%"),
            (10989, 13689, 437, 593, "80,28%", "73,69%")],
    "sLSTM-1-1": [(761, 1091, 101, 161, "69,75%", "62,73%"), (831, 1133, 161, 237, "73,35%", "67,93%"),
                  (1419, 1921, 253, 424, "73,87%", "59,67%")],
    "sLSTM-15-1": [(769, 1122, 96, 158, "68,54%", "60,76%"), (483, 653, 80, 115, "73,97%", "69,57%"),
                   (1334, 1803, 224, 372, "73,99%", "60,22%")],
    "sLSTM-15-1,15": [(782, 1133, 100, 164, "69,02%", "60,98%"), (310, 416, 58, 80, "74,52%", "72,50%"),
                      (1393, 1892, 248, 418, "73,63%", "59,33%")],
    "biLSTM-1-1": [(779, 1122, 105, 167, "69,43%", "62,87%"), (760, 1033, 142, 213, "73,57%", "66,67%"),
                   (1413, 1915, 249, 420, "73,79%", "59,29%")],
    "biLSTM-15-1": [(848, 1244, 113, 197, "68,17%", "57,36%"), (462, 621, 77, 109, "74,40%", "70,64%"),
                    (1344, 1823, 238, 401, "73,72%", "59,35%")],
    "biLSTM-15-1,15": [(821, 1199, 110, 191, "68,47%", "57,59%"), (289, 378, 50, 68, "76,46%", "73,53%"),
                       (1397, 1909, 259, 439, "73,18%", "59,00%")],
    "convLSTM-1-1": [(781, 1125, 107, 169, "69,42%", "63,31%"), (968, 1330, 203, 314, "72,78%", "64,65%"),
                     (1350, 1829, 240, 402, "73,81%", "59,70%")],
    "convLSTM-1-1,15": [(352, 471, 37, 51, "74,73%", "72,55%"), (106, 148, 24, 36, "71,62%", "66,67%"),
                        (894, 1179, 104, 165, "75,83%", "63,03%")],
}


def outcomes_for(model, month, sa, ta, ss, ts):
    """Materialize individual outcomes that realize the given counts."""
    kinds = [(1.5, "success", ss), (1.5, "failure", ts - ss),
             (0.5, "success", sa - ss), (0.5, "failure", (ta - ts) - (sa - ss))]
    out = []
    for intensity, verdict, n in kinds:
        s = ForecastSignal(0, "up", intensity, model)
        out += [SignalOutcome(s, verdict, 0.0, month)] * n
    return out


def test_metric_fixtures():
    with criterion("metric fixtures: every quality-table percentage to 2 decimals") as c:
        outcomes = []
        for model, rows in TABLE2.items():
            for month, row in zip(MONTHS, rows):
                outcomes += outcomes_for(model, month, *row[:4])
        report = aggregate(outcomes)
        checked = 0
        for model, rows in TABLE2.items():
            for month, row in zip(MONTHS, rows):
                cell = report.cell(model, month)
                assert format_percent(cell.sta_pct, ",") == row[4], (model, month)
                assert format_percent(cell.sts_pct, ",") == row[5], (model, month)
                checked += 2
        assert checked == 54
        assert format_percent(report.cell("ANN", OVERALL).sta_pct) == "81.13%"
        assert report.cell("ANN", OVERALL).total_all == 31701
        c.detail = f"{checked} percentages"


def test_timing_table_fixtures():
    with criterion("timing-table fixtures: Overall column reproduced") as c:
        recs = [TimingRecord(m, p, float(v), 0.0, {"cpu_model": "x"})
                for m, row in TABLE3.items() for p, v in zip(MONTHS, row[:3])]
        t = timing_table(recs, MONTHS)
        got = [t.overall[m] for m in TABLE3]
        assert got == [row[3] for row in TABLE3.values()]
        md = render_timing_table(recs, "md", digits=0)
        for m, row in TABLE3.items():
            assert f"| {m} | {row[0]} | {row[1]} | {row[2]} | {row[3]} |" in md
        c.detail = ", ".join(str(int(v)) for v in got)


def test_gradient_suite():
    with criterion("gradient suite: cell, dense, ReLU, conv, bidirectional, paired ANN < 1e-4"):
        for draw in range(3):
            rng = np.random.default_rng(1000 + draw)
            check_layer(LSTM(2, 3, rng), rng.normal(size=(2, 4, 2)), draw)
            check_layer(Dense(4, 3, rng), rng.normal(size=(3, 4)), draw)
            check_layer(_Stack(rng), rng.normal(size=(3, 4)), draw)
            check_layer(Conv1D(1, 4, rng), rng.normal(size=(2, 5, 1)), draw)
            check_layer(Bidirectional(2, 3, rng), rng.normal(size=(2, 4, 2)), draw)
            for pair in init_pairs(AnnPairConfig(seed=draw)):
                X = rng.uniform(-1, 1, (10, pair.sizes[0]))
                y = rng.uniform(-1, 1, 10)
                params = pair.trainer.copy()
                _, g = loss_and_gradient(pair, X, y, params)
                num = numeric_grad(lambda: loss_and_gradient(pair, X, y, params)[0], params)
                assert rel_error(g, num) < 1e-4


def test_indicator_oracle_suite():
    with criterion("indicator oracles: streaming == naive within 1e-9 on 10,000 points") as c:
        x = synthesize_series(77, 10_000, vol=PIP).mids
        worst = 0.0
        pairs = [
            (moving_average(x, 300), naive_ma(x, 300)),
            (moving_average(x, 900), naive_ma(x, 900)),
            (rsi(x, 300), naive_rsi(x, 300)),
            (cci(x, 300), naive_cci(x, 300)),
            (williams_r(x, 300), naive_williams(x, 300)),
        ]
        po = price_oscillator(x)
        m = len(po)
        pairs.append((po[:, 0], naive_ma(x, 300)[-m:] - naive_ma(x, 600)[-m:]))
        pairs.append((po[:, 1], naive_ma(x, 300)[-m:] - naive_ma(x, 900)[-m:]))
        for got, want in pairs:
            assert got.shape == want.shape
            worst = max(worst, float(np.max(np.abs(got - want))))
        assert worst <= 1e-9
        c.detail = f"max abs error {worst:.1e}"


def test_evaluation_oracle():
    with criterion("evaluation oracle: aggregate == brute-force recount on 1,000 outcomes"):
        rng = np.random.default_rng(5)
        outs = []
        for k in range(1000):
            v = float(rng.choice([-1, 1]) * rng.choice([0.3, 0.99, 1.0, 2.2, 3.0]))
            s = ForecastSignal(k, "up" if v > 0 else "down", v, str(rng.choice(["A", "B"])))
            outs.append(SignalOutcome(s, str(rng.choice(["success", "failure", "excluded"])), 0.0,
                                      str(rng.choice(MONTHS))))
        rep = aggregate(outs)
        for m, p in itertools.product(rep.models, [*MONTHS, OVERALL]):
            pool = [o for o in outs if o.signal.model_label == m and o.verdict != "excluded"
                    and (p == OVERALL or o.period == p)]
            rob = [o for o in pool if abs(o.signal.intensity) >= 1]
            want = (sum(o.verdict == "success" for o in pool), len(pool),
                    sum(o.verdict == "success" for o in rob), len(rob))
            c = rep.cell(m, p)
            assert (c.successful_all, c.total_all, c.successful_robust, c.total_robust) == want


def test_preprocessing_properties():
    cases = []

    @settings(max_examples=1000, database=None)
    @given(st.one_of(
        st.lists(st.integers(0, 4), min_size=1, max_size=60),
        st.integers(1, 60).map(lambda n: [2] * n),
        st.integers(1, 60).map(lambda n: list(range(n))),
    ))
    def check(values):
        s = series_of(1.1 + PIP * np.array(values, dtype=float))
        once = remove_flat_areas(s)
        assert np.all(once.mids[1:] != once.mids[:-1])
        assert remove_flat_areas(once).mids.tobytes() == once.mids.tobytes()
        if len(set(values)) == 1:
            assert len(once) == 1
        if all(a != b for a, b in zip(values, values[1:])):
            assert once.mids.tobytes() == s.mids.tobytes()
        cases.append(1)

    with criterion("preprocessing properties: idempotent, no consecutive equals") as c:
        check()
        c.detail = f"{len(cases)} series"


@pytest.fixture(scope="module")
def smoke_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("smoke")


def test_smoke_matrix(smoke_dir):
    with criterion("smoke matrix: 8 LSTM specs + custom ANN on 2,000 ticks, full bundle") as c:
        series = {"smoke": synthesize_series(9, 2000, vol=2e-5, label="smoke")}
        models = [bench.CustomAnnModel()] + [bench.LstmModel(n) for n in TABLE1]
        res = bench.run_bench(BenchPlan(models, ["smoke"], 1), series, smoke_dir)
        assert all(r.ok for r in res.timing), [r.error for r in res.timing if not r.ok]
        for m in models:
            log = smoke_dir / f"signals_{bench.safe_name(m.label)}_smoke.csv"
            for s in read_signal_log(log):
                assert 0 <= s.index < 2000 and 0.25 <= abs(s.intensity) <= 3
        for name in ("timing.csv", "quality.csv", "figure1.csv", "figure2.csv", "report.md"):
            text = (smoke_dir / name).read_text()
            assert "cpu_model" in text and "total_ram_gib" in text, name
        assert (smoke_dir / "environment.json").exists()
        c.detail = f"{len(res.timing)} runs"


def test_directional_timing():
    with criterion("directional timing: custom ANN >= 3x faster than fastest LSTM, 20,000 ticks") as c:
        series = synthesize_series(42, 20_000, vol=2e-5, label="timing")
        models = [bench.CustomAnnModel()] + [bench.LstmModel(n) for n in TABLE1]
        plan = BenchPlan(models, ["timing"], repetitions=3)
        recs = {m.label: time_run(m, series, plan) for m in models}
        assert all(r.ok for r in recs.values())
        ann = recs["Custom ANN"].wall_seconds
        fastest = min((r for k, r in recs.items() if k != "Custom ANN"), key=lambda r: r.wall_seconds)
        ratio = fastest.wall_seconds / ann
        c.detail = (f"custom ANN {ann:.3f}s, fastest LSTM {fastest.model_label} "
                    f"{fastest.wall_seconds:.3f}s, ratio {ratio:.1f}x")
        assert ratio >= 3.0


def test_determinism(tmp_path):
    cfg = tmp_path / "det.toml"
    models = ", ".join(f'"{m}"' for m in ["custom_ann", *TABLE1])
    cfg.write_text(
        "schema_version = 1\nseed = 42\n[data]\nperiods = [\"p1\", \"p2\"]\n"
        f"synthetic_length = 2500\n[plan]\nmodels = [{models}]\nrepetitions = 1\n"
    )
    with criterion("determinism: two bench runs give byte-identical signal and quality files") as c:
        t0 = time.perf_counter()
        for out in ("a", "b"):
            assert main(["bench", "--config", str(cfg), "--seed", "42", "--out", str(tmp_path / out)]) == 0
        files = sorted(p.name for p in (tmp_path / "a").glob("signals_*.csv")) + ["quality.csv"]
        assert len(files) == 9 * 2 + 1
        for name in files:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
        c.detail = f"{len(files)} files compared in {time.perf_counter() - t0:.0f}s"
