import numpy as np
import pytest

from fxbench.errors import InsufficientDataError, ModelError
from fxbench.lstm_baselines import (
    LSTM,
    TABLE1,
    Bidirectional,
    Conv1D,
    Dense,
    LstmState,
    ReLU,
    TrainConfig,
    build_model,
    get_spec,
    load_checkpoint,
    lstm_cell_forward,
    make_samples,
    predict_signals,
    rolling_mean_abs_change,
    save_checkpoint,
    train,
)
from fxbench.lstm_baselines.models import intensity_from_predictions
from fxbench.tickdata import PriceSeries, synthesize_series
from helpers import numeric_grad, rel_error


def sine_series(n=2000, seed=0):
    rng = np.random.default_rng(seed)
    i = np.arange(n)
    mids = 1.15 + 1e-3 * np.sin(2 * np.pi * i / 50) + rng.normal(0, 1e-5, n)
    return PriceSeries(1000 * i, mids, "sine")


def check_layer(layer, x, draw):
    """Compare analytic parameter and input gradients with central differences."""
    rng = np.random.default_rng(draw)
    y = layer.forward(x)
    R = rng.normal(size=y.shape)

    def loss():
        return float(np.sum(layer.forward(x) * R))

    layer.forward(x)
    dx = layer.backward(R)
    for name, p in layer.params.items():
        assert rel_error(layer.grads[name], numeric_grad(loss, p)) < 1e-4, name
    assert rel_error(dx, numeric_grad(loss, x)) < 1e-4


@pytest.mark.parametrize("draw", range(3))
def test_lstm_cell_gradients(draw):
    rng = np.random.default_rng(draw)
    check_layer(LSTM(3, 4, rng), rng.normal(size=(2, 1, 3)), draw)


@pytest.mark.parametrize("draw", range(3))
def test_lstm_bptt_gradients(draw):
    rng = np.random.default_rng(10 + draw)
    check_layer(LSTM(2, 3, rng), rng.normal(size=(2, 5, 2)), draw)
    check_layer(LSTM(2, 3, rng, reverse=True), rng.normal(size=(2, 5, 2)), draw)


@pytest.mark.parametrize("draw", range(3))
def test_dense_gradients(draw):
    rng = np.random.default_rng(20 + draw)
    check_layer(Dense(5, 3, rng), rng.normal(size=(4, 5)), draw)


class _Stack:
    """Dense -> ReLU -> Dense exposed as one layer for the checker."""

    def __init__(self, rng):
        self.parts = [Dense(4, 6, rng), ReLU(), Dense(6, 2, rng)]
        self.params = {f"{k}{n}": p for k, l in enumerate(self.parts) for n, p in l.params.items()}

    def forward(self, x):
        for layer in self.parts:
            x = layer.forward(x)
        return x

    def backward(self, dy):
        for layer in reversed(self.parts):
            dy = layer.backward(dy)
        self.grads = {f"{k}{n}": g for k, l in enumerate(self.parts) for n, g in l.grads.items()}
        return dy


@pytest.mark.parametrize("draw", range(3))
def test_relu_composition_gradients(draw):
    rng = np.random.default_rng(30 + draw)
    x = rng.normal(size=(5, 4))
    check_layer(_Stack(rng), x, draw)


@pytest.mark.parametrize("draw", range(3))
def test_conv_gradients(draw):
    rng = np.random.default_rng(40 + draw)
    check_layer(Conv1D(2, 3, rng), rng.normal(size=(2, 6, 2)), draw)


@pytest.mark.parametrize("draw", range(3))
def test_bidirectional_gradients(draw):
    rng = np.random.default_rng(50 + draw)
    check_layer(Bidirectional(2, 3, rng), rng.normal(size=(2, 4, 2)), draw)


@pytest.mark.parametrize("name", sorted(TABLE1))
def test_whole_model_gradient_sample(name):
    model = build_model(name, seed=1)
    rng = np.random.default_rng(2)
    x = rng.normal(size=(3, model.spec.lookback, 1))
    R = rng.normal(size=(3, 1))
    model.forward(x)
    model.backward(R)

    def loss():
        return float(np.sum(model.forward(x) * R))

    for key, p, layer, pname in model.parameters():
        grad = layer.grads[pname]
        flat_idx = rng.choice(p.size, size=min(6, p.size), replace=False)
        for k in flat_idx:
            i = np.unravel_index(k, p.shape)
            old = p[i]
            p[i] = old + 1e-5
            up = loss()
            p[i] = old - 1e-5
            down = loss()
            p[i] = old
            assert rel_error(grad[i], (up - down) / 2e-5) < 1e-4, key


def test_palindrome_symmetry():
    rng = np.random.default_rng(3)
    layer = Bidirectional(2, 4, rng)
    layer.bwd.params["W"][:] = layer.fwd.params["W"]
    layer.bwd.params["b"][:] = layer.fwd.params["b"]
    half = rng.normal(size=(1, 3, 2))
    x = np.concatenate([half, half[:, ::-1]], axis=1)
    hs = layer.forward_sequence(x)
    np.testing.assert_allclose(hs[:, :, :4], hs[:, ::-1, 4:], rtol=0, atol=1e-14)
    out = layer.forward(x)
    np.testing.assert_allclose(out[:, :4], out[:, 4:], rtol=0, atol=1e-14)


def test_cell_zero_case():
    units, n_in = 3, 2
    W, b = np.zeros((n_in + units, 4 * units)), np.zeros(4 * units)
    h, state = lstm_cell_forward(np.zeros(n_in), LstmState.zeros(units), (W, b))
    assert np.array_equal(h, np.zeros(units))
    assert np.array_equal(state.cell, np.zeros(units))


def test_cell_forget_saturation_carries_cell():
    units, n_in = 3, 2
    W, b = np.zeros((n_in + units, 4 * units)), np.zeros(4 * units)
    b[units:2 * units] = 50.0
    c0 = np.array([0.3, -0.7, 1.2])
    _, state = lstm_cell_forward(np.array([0.5, -1.0]), LstmState(np.zeros(units), c0), (W, b))
    np.testing.assert_allclose(state.cell, c0, rtol=0, atol=1e-15)


def test_cell_dimension_mismatch():
    with pytest.raises(ValueError):
        lstm_cell_forward(np.zeros(2), LstmState.zeros(3), (np.zeros((4, 12)), np.zeros(12)))


def test_table_rows():
    s = get_spec("sLSTM-15-1")
    assert (s.lookback, s.lstm_units, s.dense_layout, s.bidirectional) == (15, 100, (1,), False)
    b = get_spec("biLSTM-1-1")
    assert b.bidirectional and b.lookback == 1
    c = get_spec("convLSTM-1-1")
    assert c.convolutional and c.lstm_units == 60
    assert get_spec("sLSTM-15-1,15").lookback == 1
    assert get_spec("biLSTM-15-1,15").lookback == 15
    with pytest.raises(ModelError):
        get_spec("gruLSTM")


def test_build_layout():
    m = build_model("convLSTM-1-1,15")
    kinds = [type(layer).__name__ for layer in m.layers]
    assert kinds == ["Conv1D", "ReLU", "LSTM", "Dense"]
    m = build_model("biLSTM-15-1,15")
    assert [type(layer).__name__ for layer in m.layers] == ["Bidirectional", "Dense", "ReLU", "Dense"]
    assert m.layers[1].params["W"].shape == (200, 15)


def test_build_is_function_of_seed():
    a, b, c = build_model("sLSTM-1-1", 4), build_model("sLSTM-1-1", 4), build_model("sLSTM-1-1", 5)
    sa, sb, sc = a.state_dict(), b.state_dict(), c.state_dict()
    assert all(np.array_equal(sa[k], sb[k]) for k in sa)
    assert not all(np.array_equal(sa[k], sc[k]) for k in sa)


def test_samples_lookback_one():
    s = make_samples(sine_series(50), 1)
    assert s.inputs.shape == (48, 1, 1)
    with pytest.raises(InsufficientDataError):
        make_samples(sine_series(16), 15)


@pytest.mark.parametrize("name", ["sLSTM-1-1", "convLSTM-1-1"])
def test_loss_trend_down_on_sine(name):
    model = train(build_model(name, 0), sine_series())
    losses = model.report.epoch_losses
    assert len(losses) == 3
    assert all(b <= a for a, b in zip(losses, losses[1:]))


def test_training_is_deterministic():
    series = sine_series(600)
    a = train(build_model("sLSTM-15-1,15", 0), series).state_dict()
    b = train(build_model("sLSTM-15-1,15", 0), series).state_dict()
    assert all(a[k].tobytes() == b[k].tobytes() for k in a)


def test_divergence_reported():
    series = sine_series(300)
    model = build_model("sLSTM-1-1", 0)
    model.layers[-1].params["b"][:] = np.inf
    with pytest.raises(ModelError) as info:
        train(model, series)
    assert info.value.step == 0


def _constant_head(model, value):
    head = model.layers[-1]
    head.params["W"][:] = 0.0
    head.params["b"][:] = value
    model.trained = True


def test_zero_prediction_gives_no_signals():
    model = build_model("sLSTM-1-1")
    _constant_head(model, 0.0)
    assert predict_signals(model, sine_series(500)) == []


def test_constant_prediction_gives_one_signal():
    model = build_model("sLSTM-1-1")
    _constant_head(model, 0.5)
    sig = predict_signals(model, sine_series(500), scale=2.0)
    assert len(sig) == 1 and sig[0].direction == "up"
    assert sig[0].intensity == pytest.approx(0.75)


def test_scale_array_and_scalar_agree():
    model = train(build_model("sLSTM-1-1", 0), sine_series(800))
    a = predict_signals(model, sine_series(800), scale=0.7)
    n = len(make_samples(sine_series(800), 1).targets)
    b = predict_signals(model, sine_series(800), scale=np.full(n - int(n * 0.7), 0.7))
    assert a == b


def test_intensity_clipping_and_zero_scale():
    out = intensity_from_predictions(np.array([10.0, -10.0, 0.1]), np.array([1.0, 1.0, 0.0]))
    assert out.tolist() == [3.0, -3.0, 0.0]


def test_rolling_scale():
    s = PriceSeries(np.arange(5), np.array([1.0, 1.0002, 1.0001, 1.0004, 1.0003]))
    sc = rolling_mean_abs_change(s, window=2)
    np.testing.assert_allclose(sc, [0.0, 2.0, 1.5, 2.0, 2.0], atol=1e-9)


def test_untrained_model_refused():
    with pytest.raises(ModelError):
        predict_signals(build_model("sLSTM-1-1"), sine_series(300))


def test_checkpoint_round_trip(tmp_path):
    series = sine_series(600)
    model = train(build_model("biLSTM-15-1,15", 2), series, tcfg=TrainConfig(epochs=1, train_fraction=0.5))
    path = tmp_path / "m.npz"
    save_checkpoint(model, path)
    back = load_checkpoint(path)
    a, b = model.state_dict(), back.state_dict()
    assert a.keys() == b.keys() and all(a[k].tobytes() == b[k].tobytes() for k in a)
    assert back.trained and back.spec == model.spec
    assert predict_signals(back, series) == predict_signals(model, series)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(train_fraction=1.0)
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)


def test_train_on_random_walk_all_specs_small():
    series = synthesize_series(0, 300, vol=2e-5)
    for name in TABLE1:
        model = train(build_model(name, 0), series, tcfg=TrainConfig(epochs=1))
        assert np.all(np.isfinite(model.report.epoch_losses))
