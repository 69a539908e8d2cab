"""From-scratch LSTM baselines (stacked, bidirectional, convolutional)."""

from .layers import (
    LSTM,
    Bidirectional,
    Conv1D,
    Dense,
    LstmState,
    ReLU,
    lstm_cell_forward,
)
from .models import (
    TABLE1,
    ModelSpec,
    SequenceModel,
    TrainConfig,
    TrainingReport,
    build_model,
    get_spec,
    load_checkpoint,
    make_samples,
    predict_signals,
    rolling_mean_abs_change,
    run_lstm,
    save_checkpoint,
    train,
)

__all__ = [
    "LSTM", "Bidirectional", "Conv1D", "Dense", "LstmState", "ReLU", "lstm_cell_forward",
    "TABLE1", "ModelSpec", "SequenceModel", "TrainConfig", "TrainingReport", "build_model",
    "get_spec", "load_checkpoint", "make_samples", "predict_signals",
    "rolling_mean_abs_change", "run_lstm", "save_checkpoint", "train",
]
