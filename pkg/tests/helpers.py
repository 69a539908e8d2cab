"""Shared oracles for the test modules."""

import time

import numpy as np

from fxbench.tickdata import PriceSeries


def series_of(values, label="t"):
    values = np.asarray(values, dtype=np.float64)
    return PriceSeries(1000 * np.arange(len(values), dtype=np.int64), values, label)


def rel_error(a, b, floor=1e-7):
    """Largest elementwise relative error; ``floor`` keeps near-zero entries from dominating."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return float(np.max(np.abs(a - b) / np.maximum(floor, np.abs(a) + np.abs(b))))


def numeric_grad(f, x, eps=1e-5):
    """Central differences of scalar ``f`` with respect to array ``x`` (modified in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        up = f()
        x[i] = old - eps
        down = f()
        x[i] = old
        g[i] = (up - down) / (2 * eps)
    return g


# naive indicator oracles: full recomputation of every window

def naive_ma(x, w):
    return np.array([x[i - w + 1:i + 1].mean() for i in range(w - 1, len(x))])


def naive_rsi(x, p):
    out = []
    for i in range(p, len(x)):
        d = np.diff(x[i - p:i + 1])
        g, l = d[d > 0].sum() / p, -d[d < 0].sum() / p
        if g == 0 and l == 0:
            out.append(50.0)
        elif l == 0:
            out.append(100.0)
        elif g == 0:
            out.append(0.0)
        else:
            out.append(100 - 100 / (1 + g / l))
    return np.array(out)


def naive_cci(x, p):
    # extended precision: tiny deviations about the mean cancel badly in doubles
    x = np.asarray(x, dtype=np.longdouble)
    out = []
    for i in range(p - 1, len(x)):
        win = x[i - p + 1:i + 1]
        sma = win.mean()
        md = np.abs(win - sma).mean()
        out.append(0.0 if md == 0 else (x[i] - sma) / (np.longdouble("0.015") * md))
    return np.array(out, dtype=np.float64)


def naive_williams(x, p):
    out = []
    for i in range(p - 1, len(x)):
        win = x[i - p + 1:i + 1]
        hh, ll = win.max(), win.min()
        out.append(-50.0 if hh == ll else -100 * (hh - x[i]) / (hh - ll))
    return np.array(out)


# acceptance lines, echoed again in the terminal summary
ACCEPTANCE: list[str] = []


class criterion:
    """Context manager recording one PASS/FAIL line for an acceptance criterion."""

    def __init__(self, name: str):
        self.name = name
        self.detail = ""

    def __enter__(self):
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        took = time.perf_counter() - self._t0
        status = "PASS" if exc_type is None else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        if exc_type is not None and not self.detail:
            extra = f" ({exc_type.__name__}: {exc})"
        line = f"{status} {self.name}{extra} [{took:.1f}s]"
        ACCEPTANCE.append(line)
        print(line)
        return False
