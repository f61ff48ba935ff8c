import numpy as np
import pytest

from urbantree import model as M
from urbantree.gradcheck import numerical_gradient, relative_error
from urbantree.rng import substream


def spec(**kw):
    base = dict(n_blocks=1, input_shape=(200, 200, 3), n_classes=6)
    base.update(kw)
    return M.ModelSpec(**base)


def test_n1_shape_walk():
    s = spec(filters_per_block=[32], fc_width=128)
    shapes = {name: (w, b) for name, w, b in M.layer_shapes(s)}
    assert shapes["block1_conv1"] == ((3, 3, 3, 32), (32,))
    assert shapes["block1_conv2"] == ((3, 3, 32, 32), (32,))
    assert shapes["fc1"] == ((320000, 128), (128,))
    assert shapes["fc2"] == ((128, 6), (6,))
    trace = dict(M.shape_trace(s))
    assert trace["block1_pool"] == (100, 100, 32)
    assert trace["flatten"] == (320000,)


def test_n6_spatial_trace():
    trace = M.shape_trace(spec(n_blocks=6))
    sizes = [200] + [shape[0] for name, shape in trace if name.endswith("_pool")]
    assert sizes == [200, 100, 50, 25, 12, 6, 3]


@pytest.mark.parametrize("n", [0, 7, 8])
def test_block_count_outside_range(n):
    with pytest.raises(ValueError, match="n_blocks"):
        spec(n_blocks=n)


def test_spatial_collapse_rejected():
    with pytest.raises(ValueError, match="n_blocks=4"):
        M.build(spec(n_blocks=4, input_shape=(8, 8, 3)))


def test_default_filters():
    assert spec(n_blocks=6).filters_per_block == [32, 64, 128, 256, 256, 256]


def test_count_parameters_pieces():
    s = spec(filters_per_block=[32], fc_width=128)
    assert 3 * 3 * 3 * 32 + 32 == 896
    assert 128 * 6 + 6 == 774
    shapes = M.layer_shapes(s)
    assert np.prod(shapes[0][1]) + np.prod(shapes[0][2]) == 896
    assert np.prod(shapes[-1][1]) + np.prod(shapes[-1][2]) == 774


def _independent_count(h, w, filters, k, fc, classes, cin=3):
    total = 0
    for f in filters:
        total += k * k * cin * f + f
        total += k * k * f * f + f
        cin = f
        h, w = h // 2, w // 2
    total += h * w * cin * fc + fc
    total += fc * classes + classes
    return total


def test_count_parameters_n6_matches_independent_sum():
    s = spec(n_blocks=6)
    expected = _independent_count(200, 200, [32, 64, 128, 256, 256, 256], 3, 128, 6)
    assert M.count_parameters(s) == expected


def test_build_deterministic_and_biases_zero():
    s = spec(n_blocks=2, input_shape=(16, 16, 3))
    a, b = M.build(s, seed=5), M.build(s, seed=5)
    for la, lb in zip(a, b):
        assert la.weights.tobytes() == lb.weights.tobytes()
        assert not la.bias.any()
    assert len(a) == 2 * 2 + 2


def test_layer_draws_independent_of_depth():
    a = M.build(spec(n_blocks=1, input_shape=(16, 16, 3), filters_per_block=[8]), seed=1)
    b = M.build(spec(n_blocks=2, input_shape=(16, 16, 3), filters_per_block=[8, 8]), seed=1)
    np.testing.assert_array_equal(a[0].weights, b[0].weights)
    np.testing.assert_array_equal(a[1].weights, b[1].weights)


@pytest.mark.parametrize("n", range(1, 7))
def test_forward_shape_every_depth(n):
    s = spec(n_blocks=n, input_shape=(64, 64, 3), filters_per_block=[4] * n, fc_width=16)
    params = M.build(s, seed=0)
    x = substream(0, "x").random((2, 64, 64, 3), dtype=np.float32)
    logits = M.forward(s, params, x)
    assert logits.shape == (2, 6)
    assert np.isfinite(logits).all()


def test_inference_deterministic_and_dropout_zero_invariant():
    s = spec(n_blocks=2, input_shape=(16, 16, 3), filters_per_block=[4, 8], fc_width=8)
    params = M.build(s, seed=0)
    x = substream(1, "x").random((3, 16, 16, 3), dtype=np.float32)
    a = M.forward(s, params, x)
    np.testing.assert_array_equal(a, M.forward(s, params, x))
    np.testing.assert_array_equal(a, M.forward(s, params, x, training=True, rng=substream(2)))


def test_dropout_changes_training_logits():
    s = spec(n_blocks=1, input_shape=(8, 8, 3), filters_per_block=[4], fc_width=16, dropout_rate=0.5)
    params = M.build(s, seed=0)
    x = substream(1, "x").random((2, 8, 8, 3), dtype=np.float32)
    assert not np.array_equal(M.forward(s, params, x), M.forward(s, params, x, True, substream(3)))


def test_input_shape_mismatch():
    s = spec(input_shape=(8, 8, 3), filters_per_block=[2], fc_width=4)
    with pytest.raises(ValueError, match="shape"):
        M.forward(s, M.build(s), np.zeros((1, 9, 8, 3)))


@pytest.mark.parametrize("dropout", [0.0, 0.3])
def test_end_to_end_gradient_double(dropout):
    s = spec(input_shape=(8, 8, 3), filters_per_block=[3], fc_width=5, dropout_rate=dropout,
             initializer="glorot_normal")
    params = M.build(s, seed=3, dtype=np.float64)
    for layer in params:
        layer.bias[:] = substream(4, layer.name).normal(0, 0.1, size=layer.bias.shape)
    x = substream(5, "x").random((2, 8, 8, 3))
    y = np.array([1, 4])
    w = np.array([1.0, 2.0, 0.5, 1.0, 1.5, 1.0])

    _, grads, _ = M.loss_and_grads(s, params, x, y, w, training=True, rng=substream(6))
    flat = M.flat_params(params)
    worst = 0.0
    for i, p in enumerate(flat):
        def loss_at(z, i=i):
            trial = list(flat)
            trial[i] = z
            return M.loss_and_grads(s, M.with_flat_params(params, trial), x, y, w,
                                    training=True, rng=substream(6))[0]

        numeric = numerical_gradient(loss_at, p.copy(), 1e-6)
        worst = max(worst, relative_error(grads[i], numeric))
    assert worst < 1e-4


def test_class_weights():
    np.testing.assert_allclose(M.compute_class_weights([10, 10, 10]), [1, 1, 1])
    np.testing.assert_allclose(M.compute_class_weights([100, 50, 50]), [2 / 3, 4 / 3, 4 / 3])
    w = M.compute_class_weights([1, 999])
    assert w[0] > w[1]


def test_class_weights_zero_rejected():
    with pytest.raises(ValueError, match="no samples"):
        M.compute_class_weights([3, 0, 2])


def test_class_weights_identity():
    counts = np.array([7, 3, 11, 1])
    w = M.compute_class_weights(counts)
    assert np.dot(w, counts) == pytest.approx(counts.sum())
    assert w.mean() >= 1


def test_spec_round_trip():
    s = spec(n_blocks=3, initializer="truncated_normal(0, 0.1)", dropout_rate=0.2)
    assert M.ModelSpec.from_dict(s.to_dict()) == s


def test_end_to_end_gradient_single_precision():
    s = spec(input_shape=(8, 8, 3), filters_per_block=[3], fc_width=5, initializer="glorot_normal")
    p64 = M.build(s, seed=3, dtype=np.float64)
    p32 = [M.Layer(l.name, l.weights.astype(np.float32), l.bias.astype(np.float32)) for l in p64]
    x = substream(5, "x").random((2, 8, 8, 3))
    y = np.array([0, 2])
    _, g32, _ = M.loss_and_grads(s, p32, x.astype(np.float32), y)
    flat = M.flat_params(p64)
    for i, p in enumerate(flat):
        def loss_at(z, i=i):
            trial = list(flat)
            trial[i] = z
            return M.loss_and_grads(s, M.with_flat_params(p64, trial), x, y)[0]

        numeric = numerical_gradient(loss_at, p.copy(), 1e-6)
        assert relative_error(g32[i], numeric) < 1e-3, p64[i // 2].name
