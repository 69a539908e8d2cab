"""Tick-level FX forecasting benchmark: a paired-ANN forecaster, LSTM baselines,
signal verification and a timing harness."""

__version__ = "0.1.0"

from .errors import DataError, DivergenceError, FxBenchError, InsufficientDataError, ModelError
from .evaluation import VerificationConfig, aggregate, evaluate_signals
from .indicators import IndicatorConfig, indicator_vector_stream
from .paired_ann import AnnPairConfig, run_custom_ann
from .signals import ForecastSignal
from .tickdata import PriceSeries, load_series, remove_flat_areas, synthesize_series

__all__ = [
    "AnnPairConfig", "DataError", "DivergenceError", "ForecastSignal", "FxBenchError",
    "IndicatorConfig", "InsufficientDataError", "ModelError", "PriceSeries",
    "VerificationConfig", "aggregate", "evaluate_signals", "indicator_vector_stream",
    "load_series", "remove_flat_areas", "run_custom_ann", "synthesize_series",
]
