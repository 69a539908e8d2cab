"""
Verifying signals
=================

A signal succeeds if the price moves its way by at least one pip per unit of
intensity within 900 ticks. Robust signals have ``|intensity| >= 1``.
"""

import numpy as np

from fxbench.evaluation import aggregate, evaluate_signals, render_quality_markdown, verify_signal
from fxbench.paired_ann import run_custom_ann
from fxbench.signals import ForecastSignal
from fxbench.tickdata import PIP, synthesize_series

###############################################################################
# Hand-made case: +2.5 pips at tick 400 satisfies an intensity-2 up signal.
future = np.full(900, 1.15)
future[399] += 2.5 * PIP
print(verify_signal(ForecastSignal(0, "up", 2.0, "demo"), 1.15, future).verdict)

###############################################################################
# Whole runs aggregate into success rates per model and period.
outcomes = []
for k, month in enumerate(["2021-10", "2021-11"]):
    series = synthesize_series(seed=k, length=15_000, vol=2e-5, label=month)
    outcomes += evaluate_signals(run_custom_ann(series), series)
print(render_quality_markdown(aggregate(outcomes)))
