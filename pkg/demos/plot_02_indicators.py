"""
Streaming indicators
====================

Moving averages, RSI, CCI, Williams %R and the price oscillator, computed in
one pass each and stacked into normalized input vectors.
"""

import numpy as np

from fxbench.indicators import IndicatorConfig, indicator_vector_stream, rsi, williams_r
from fxbench.tickdata import synthesize_series

series = synthesize_series(seed=1, length=3000, vol=2e-5)

###############################################################################
# Individual indicators return arrays aligned to the first defined index.
r = rsi(series, 300)
w = williams_r(series, 300)
print(f"RSI range [{r.min():.1f}, {r.max():.1f}], Williams range [{w.min():.1f}, {w.max():.1f}]")

###############################################################################
# The frame aligns everything from index ``warmup - 1`` onwards.
cfg = IndicatorConfig()
frame = indicator_vector_stream(series, cfg)
print(len(frame), "vectors; first at index", frame.indices[0])
print(dict(zip(cfg.column_names, np.round(frame.normalized[-1], 3))))
