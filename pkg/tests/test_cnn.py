"""Forward/backward correctness, training behavior, checkpoints."""

import numpy as np
import pytest

from wordrec import errors
from wordrec.cnn import (
    PARAM_ORDER,
    CnnConfig,
    CnnModel,
    EvalReport,
    TrainConfig,
    backward,
    evaluate,
    forward,
    init_model,
    load_model,
    loss,
    save_model,
    train,
)

SMALL = CnnConfig(height=32, width=32, channels=1, seed=3)


def stripe_dataset(n=10, size=32, noise=0.1, seed=7):
    """Well-separated 5-class toy tensors: sinusoidal gratings per class."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size]
    data = []
    for i in range(n):
        k = i % 5
        base = np.sin(2 * np.pi * (k + 1) * xx / size) + np.cos(2 * np.pi * (k + 1) * yy / size)
        data.append(((base + noise * rng.standard_normal((size, size)))[:, :, None], k))
    return data


@pytest.fixture(scope="module")
def overfit_model():
    data = stripe_dataset()
    model, history = train(init_model(SMALL), data, TrainConfig(epochs=200, seed=1))
    return model, data, history


def test_config_validation():
    with pytest.raises(ValueError):
        CnnConfig(channels=3)
    with pytest.raises(ValueError):
        CnnConfig(kernel=4)
    with pytest.raises(ValueError):
        CnnConfig(height=100, width=100)  # not divisible by pool^2
    with pytest.raises(ValueError):
        CnnConfig(n_classes=1)
    with pytest.raises(ValueError):
        TrainConfig(epochs=-1)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0)


def test_init_shapes_and_determinism():
    model = init_model(SMALL)
    assert set(model.params) == set(PARAM_ORDER)
    for name, shape in SMALL.param_shapes().items():
        assert model.params[name].shape == shape
        assert model.params[name].dtype == np.float32
    np.testing.assert_array_equal(model.params["conv1_b"], np.zeros(32, dtype=np.float32))
    again = init_model(SMALL)
    for name in PARAM_ORDER:
        np.testing.assert_array_equal(model.params[name], again.params[name])
    other = init_model(CnnConfig(height=32, width=32, channels=1, seed=4))
    assert not np.array_equal(model.params["conv1_w"], other.params["conv1_w"])


def test_forward_is_a_distribution():
    model = init_model(SMALL)
    rng = np.random.default_rng(0)
    for _ in range(5):
        probs = forward(model, rng.standard_normal((32, 32, 1)))
        assert probs.shape == (5,)
        assert np.all(probs > 0) and np.all(probs < 1)
        assert abs(probs.sum() - 1.0) < 1e-6


def test_zero_input_gives_uniform_probabilities():
    # zero input -> zero GAP vector -> logits equal the (zero) dense bias
    probs = forward(init_model(SMALL), np.zeros((32, 32, 1)))
    np.testing.assert_allclose(probs, np.full(5, 0.2), atol=1e-12)


def test_forward_shape_checks():
    model = init_model(SMALL)
    with pytest.raises(errors.ShapeMismatch):
        forward(model, np.zeros((32, 32, 2)))
    with pytest.raises(errors.ShapeMismatch):
        forward(model, np.zeros((16, 32, 1)))


def test_forward_deterministic_across_fresh_inits():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((32, 32, 1))
    a = forward(init_model(SMALL), x)
    b = forward(init_model(SMALL), x)
    np.testing.assert_array_equal(a, b)


def test_dense_bias_gradient_is_softmax_minus_onehot():
    model = init_model(SMALL)
    rng = np.random.default_rng(2)
    x = rng.standard_normal((32, 32, 1))
    probs = forward(model, x)
    for target in (0, 3):
        grads = backward(model, x, target)
        expected = probs.copy()
        expected[target] -= 1.0
        np.testing.assert_allclose(grads["dense_b"], expected, atol=1e-12)
    # zero input reduces to the plain softmax case
    grads = backward(model, np.zeros((32, 32, 1)), 2)
    expected = np.full(5, 0.2)
    expected[2] -= 1.0
    np.testing.assert_allclose(grads["dense_b"], expected, atol=1e-12)


def test_backward_returns_all_parameter_gradients():
    model = init_model(SMALL)
    grads = backward(model, np.random.default_rng(3).standard_normal((32, 32, 1)), 1)
    assert set(grads) == set(PARAM_ORDER)
    for name in PARAM_ORDER:
        assert grads[name].shape == model.params[name].shape
    with pytest.raises(ValueError):
        backward(model, np.zeros((32, 32, 1)), 5)


def test_gradient_spot_check():
    model = init_model(SMALL)
    rng = np.random.default_rng(4)
    x = rng.standard_normal((32, 32, 1))
    grads = backward(model, x, 2)
    h = 1e-3
    for name in PARAM_ORDER:
        flat = model.params[name].ravel()
        for i in rng.choice(flat.size, size=min(4, flat.size), replace=False):
            original = flat[i]
            flat[i] = np.float32(original + h)
            up = loss(model, x, 2)
            hi_val = float(flat[i])
            flat[i] = np.float32(original - h)
            down = loss(model, x, 2)
            lo_val = float(flat[i])
            flat[i] = original
            fd = (up - down) / (hi_val - lo_val)  # actual float32 step
            analytic = grads[name].ravel()[i]
            assert abs(fd - analytic) / max(abs(fd), abs(analytic), 1e-12) < 1e-4


def test_shift_by_full_pool_period_preserves_output():
    # 4x4 pooling twice: moving the active region by 16 pixels on a zero
    # background must leave GAP, and hence the probabilities, unchanged
    config = CnnConfig(height=64, width=64, channels=1, seed=5)
    model = init_model(config)
    rng = np.random.default_rng(6)
    block = rng.standard_normal((8, 8))
    a = np.zeros((64, 64, 1))
    b = np.zeros((64, 64, 1))
    a[16:24, 16:24, 0] = block
    b[32:40, 32:40, 0] = block
    np.testing.assert_allclose(forward(model, a), forward(model, b), atol=1e-6)


def test_train_zero_epochs_is_identity():
    model = init_model(SMALL)
    trained, history = train(model, stripe_dataset(), TrainConfig(epochs=0))
    assert history == []
    for name in PARAM_ORDER:
        np.testing.assert_array_equal(trained.params[name], model.params[name])


def test_train_does_not_mutate_input_model():
    model = init_model(SMALL)
    before = {k: v.copy() for k, v in model.params.items()}
    train(model, stripe_dataset(), TrainConfig(epochs=2))
    for name in PARAM_ORDER:
        np.testing.assert_array_equal(model.params[name], before[name])


def test_train_determinism():
    data = stripe_dataset()
    cfg = TrainConfig(epochs=5, seed=9)
    a, hist_a = train(init_model(SMALL), data, cfg)
    b, hist_b = train(init_model(SMALL), data, cfg)
    assert hist_a == hist_b
    for name in PARAM_ORDER:
        np.testing.assert_array_equal(a.params[name], b.params[name])


def test_train_rejects_empty_and_bad_shapes():
    with pytest.raises(errors.EmptyDataset):
        train(init_model(SMALL), [], TrainConfig(epochs=1))
    bad = [(np.zeros((16, 16, 1)), 0)]
    with pytest.raises(errors.ShapeMismatch):
        train(init_model(SMALL), bad, TrainConfig(epochs=1))


def test_overfit_smoke(overfit_model):
    model, data, history = overfit_model
    assert history[-1] < history[0]
    report = evaluate(model, data)
    assert report.accuracy == 1.0
    # perfect predictions give a purely diagonal confusion matrix
    np.testing.assert_array_equal(report.confusion, np.diag([2, 2, 2, 2, 2]))


def test_evaluate_counting():
    model = init_model(SMALL)
    model.params["dense_w"] = np.zeros_like(model.params["dense_w"])
    model.params["dense_b"] = np.zeros_like(model.params["dense_b"])
    rng = np.random.default_rng(10)
    # zero head -> uniform logits -> argmax tie-break picks class 0 always
    xs = [rng.standard_normal((32, 32, 1)) for _ in range(5)]
    report = evaluate(model, list(zip(xs, [0, 0, 0, 1, 2])))
    assert report.accuracy == pytest.approx(0.6)
    assert report.confusion[:, 0].sum() == 5
    balanced = evaluate(model, list(zip(xs, [0, 1, 2, 3, 4])), condition="clean")
    assert balanced.accuracy == pytest.approx(0.2)
    assert balanced.condition == "clean"
    assert balanced.n_examples == 5
    assert balanced.accuracy == np.trace(balanced.confusion) / balanced.confusion.sum()


def test_checkpoint_round_trip(tmp_path, overfit_model):
    model, data, _ = overfit_model
    save_model(tmp_path / "m.fcm", model)
    back = load_model(tmp_path / "m.fcm")
    assert back.config == model.config
    for name in PARAM_ORDER:
        np.testing.assert_array_equal(back.params[name], model.params[name])
        assert back.params[name].dtype == np.float32
    x = data[0][0]
    np.testing.assert_array_equal(forward(back, x), forward(model, x))


def test_checkpoint_header_and_errors(tmp_path):
    model = init_model(SMALL)
    save_model(tmp_path / "m.fcm", model)
    raw = (tmp_path / "m.fcm").read_bytes()
    assert raw[:4] == b"FCM1"
    (tmp_path / "bad.fcm").write_bytes(b"NOPE" + raw[4:])
    with pytest.raises(errors.BadMagic):
        load_model(tmp_path / "bad.fcm")
    (tmp_path / "cut.fcm").write_bytes(raw[:-17])
    with pytest.raises(errors.ShapeMismatch):
        load_model(tmp_path / "cut.fcm")
    (tmp_path / "fat.fcm").write_bytes(raw + b"\x00")
    with pytest.raises(errors.ShapeMismatch):
        load_model(tmp_path / "fat.fcm")
