"""
Timing models side by side
==========================

Run the custom ANN and two baselines on the same series, then render the
timing table, quality table and plot data. Writes into ``demo_results/``.
"""

from fxbench.bench import BenchPlan, CustomAnnModel, LstmModel, run_bench, synthetic_datasets

datasets = synthetic_datasets(["2021-10", "2021-11"], seed=42, length=5000, start=1.15, vol=2e-5)
plan = BenchPlan(
    models=[CustomAnnModel(), LstmModel("sLSTM-1-1"), LstmModel("convLSTM-1-1")],
    datasets=list(datasets),
    repetitions=3,
)
result = run_bench(plan, datasets, "demo_results")

###############################################################################
# The report bundle: timing.csv, quality.csv, per-run signal logs,
# figure1.csv / figure2.csv and a markdown summary.
print(sorted(result.outputs))
print((result.outputs["report.md"]).read_text())
