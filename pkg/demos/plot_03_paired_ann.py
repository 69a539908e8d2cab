"""
Paired trainer/predictor networks
=================================

Each pair holds a trainer that learns online from matured targets and a
predictor that only changes when weights are copied across.
"""

import numpy as np

from fxbench.paired_ann import (
    AnnPairConfig,
    custom_ann_trace,
    init_pairs,
    predict,
    run_custom_ann,
    train_step,
    transfer_weights,
)
from fxbench.tickdata import synthesize_series

###############################################################################
# One pair per indicator family. Training moves the trainer only.
pair = init_pairs(AnnPairConfig(seed=0))[1]  # the RSI pair
x, y = np.array([[0.4]]), np.array([0.9])
trained = train_step(pair, x, y, learning_rate=0.5)
print("predictor before/after training:", predict(pair, x[0]), predict(trained, x[0]))
print("after transfer:", predict(transfer_weights(trained), x[0]))

###############################################################################
# A full pass over a drifting series. Intensity is three times the mean
# predictor output.
series = synthesize_series(seed=1, length=20_000, vol=2e-5, drift=2e-6)
trace = custom_ann_trace(series)
print(f"intensity range [{trace.intensity.min():.2f}, {trace.intensity.max():.2f}]")

signals = run_custom_ann(series)
for s in signals[:5]:
    print(s)
