"""
LSTM baselines
==============

Build a baseline from its table row, fit it with momentum SGD and turn the
forecasts into signals with the shared emission rule.
"""

import numpy as np

from fxbench.lstm_baselines import TABLE1, build_model, predict_signals, train
from fxbench.tickdata import PriceSeries

for name, spec in TABLE1.items():
    print(f"{name:16s} units={spec.lstm_units:3d} lookback={spec.lookback:2d} head={spec.dense_layout}")

###############################################################################
# A noisy sine gives the network something learnable.
i = np.arange(3000)
rng = np.random.default_rng(0)
series = PriceSeries(1000 * i, 1.15 + 1e-3 * np.sin(2 * np.pi * i / 50) + rng.normal(0, 1e-5, i.size))

model = train(build_model("sLSTM-15-1", seed=0), series)
print("epoch losses:", np.round(model.report.epoch_losses, 4))

###############################################################################
# Forecasts on the held-out 30% become signals.
signals = predict_signals(model, series)
print(len(signals), "signals; first:", signals[:2])
