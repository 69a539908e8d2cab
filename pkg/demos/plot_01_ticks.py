"""
Tick files and flat-area removal
================================

Parse TrueFX-style quotes, take mid prices and drop repeated values.
"""

import io

import numpy as np

from fxbench.tickdata import load_series, remove_flat_areas, synthesize_series, write_series

###############################################################################
# A TrueFX line carries the pair, a millisecond UTC timestamp, bid and ask.
raw = io.StringIO(
    "EUR/USD,20211001 00:00:00.123,1.15712,1.15714\n"
    "EUR/USD,20211001 00:00:00.456,1.15712,1.15714\n"
    "EUR/USD,20211001 00:00:01.002,1.15713,1.15715\n"
    "EUR/USD,20211001 00:00:01.870,1.15711,1.15714\n"
)
series = load_series(raw, pair_filter="EUR/USD", label="oct")
print("mids:", series.mids)

###############################################################################
# The second quote repeats the first. Collapsing runs keeps the earliest point.
clean = remove_flat_areas(series)
print(len(series), "->", len(clean), "points")

###############################################################################
# Without real data, a seeded random walk stands in. It never has flat steps.
walk = synthesize_series(seed=7, length=5000, vol=2e-5)
print("flat steps:", int(np.sum(walk.mids[1:] == walk.mids[:-1])))

buf = io.StringIO()
write_series(clean, buf)
print(buf.getvalue())
