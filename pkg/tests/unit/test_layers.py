import numpy as np
import pytest

from deepsight.pt.deepsight_layers import (ALEXNET_INPUT_SHAPE,
                                           ALEXNET_LAYERS,
                                           ConvSpec,
                                           FullSpec,
                                           PoolSpec,
                                           conv_forward,
                                           conv_output_shape,
                                           forward_network,
                                           fully_connected,
                                           max_pool,
                                           network_shapes,
                                           pool_output_shape,
                                           relu,
                                           softmax)

from common import naive_conv, naive_max_pool


@pytest.mark.parametrize('in_size, spec, expected',
                         [(227, ConvSpec(11, 4, 0, 96), 55),
                          (5, ConvSpec(5, 1, 0), 1),
                          (55, ConvSpec(3, 2, 0), 27),
                          (224, ConvSpec(11, 4, 0, 96), 54)])
def test_conv_output_shape(in_size, spec, expected):
    assert conv_output_shape(in_size, spec) == expected


def test_conv_output_shape_too_small():
    with pytest.raises(ValueError):
        conv_output_shape(4, ConvSpec(7, 1, 1))
    with pytest.raises(ValueError):
        pool_output_shape(2, PoolSpec(3, 2))


@pytest.mark.parametrize('args', [(0, 1, 0, 1), (3, 0, 0, 1), (3, 1, -1, 1), (3, 1, 0, 0)])
def test_conv_spec_invariants(args):
    with pytest.raises(ValueError):
        ConvSpec(*args)


def test_pool_spec():
    assert PoolSpec(3, 2).overlapping
    assert not PoolSpec(2, 2).overlapping
    with pytest.raises(ValueError):
        PoolSpec(0, 1)


def test_first_stage_shape_chain():
    shapes = network_shapes(ALEXNET_INPUT_SHAPE, ALEXNET_LAYERS)
    assert shapes[:2] == [(55, 55, 96), (27, 27, 96)]


def test_full_network_shapes():
    shapes = network_shapes(ALEXNET_INPUT_SHAPE, ALEXNET_LAYERS)
    assert shapes == [(55, 55, 96),
                      (27, 27, 96),
                      (27, 27, 256),
                      (13, 13, 256),
                      (13, 13, 384),
                      (13, 13, 384),
                      (13, 13, 256),
                      (6, 6, 256),
                      (4096, ),
                      (4096, ),
                      (1000, )]


def test_conv_identity_filter():
    volume = np.random.RandomState(0).randint(-9, 10, size=(1, 4, 5))
    out = conv_forward(volume, np.ones((1, 1, 1, 1)), ConvSpec(1, 1, 0, 1))
    assert np.array_equal(out, volume)


def test_conv_all_ones():
    out = conv_forward(np.ones((1, 5, 5)), np.ones((1, 1, 3, 3)), ConvSpec(3, 1, 0, 1))
    assert out.shape == (1, 3, 3)
    assert np.all(out == 9)


def test_conv_bias_and_depth():
    out = conv_forward(np.ones((2, 3, 3)),
                       np.ones((3, 2, 3, 3)),
                       ConvSpec(3, 1, 0, 3),
                       bias=[0.0, 1.0, -18.0])
    assert out.reshape(-1).tolist() == [18.0, 19.0, 0.0]


def test_conv_shape_mismatch():
    with pytest.raises(ValueError):
        conv_forward(np.ones((2, 5, 5)), np.ones((1, 1, 3, 3)), ConvSpec(3, 1, 0, 1))


def test_conv_matches_oracle():
    rng = np.random.RandomState(42)
    for _ in range(200):
        depth = rng.randint(1, 4)
        height, width = rng.randint(1, 9, size=2)
        size = rng.randint(1, 4)
        pad = rng.randint(0, 2)
        if min(height, width) + 2 * pad < size:
            pad = size
        stride = rng.randint(1, 3)
        filters = rng.randint(1, 4)
        volume = rng.randint(-5, 6, size=(depth, height, width)).astype(np.float64)
        weights = rng.randint(-3, 4, size=(filters, depth, size, size)).astype(np.float64)
        spec = ConvSpec(size, stride, pad, filters)
        out = conv_forward(volume, weights, spec)
        assert np.array_equal(out, naive_conv(volume, weights, stride, pad))


def test_conv_matches_oracle_on_floats():
    rng = np.random.RandomState(8)
    for _ in range(50):
        volume = rng.randn(3, 8, 8)
        weights = rng.randn(2, 3, 3, 3)
        out = conv_forward(volume, weights, ConvSpec(3, 2, 1, 2))
        np.testing.assert_allclose(out, naive_conv(volume, weights, 2, 1), rtol=1e-9, atol=1e-12)


def test_max_pool_example():
    plane = np.arange(1, 26, dtype=np.float64).reshape(1, 5, 5)
    out = max_pool(plane, PoolSpec(3, 2))
    assert out.tolist() == [[[13, 15], [23, 25]]]


def test_max_pool_identity_and_constant():
    volume = np.random.RandomState(1).randn(2, 4, 4)
    assert np.array_equal(max_pool(volume, PoolSpec(1, 1)), volume)
    out = max_pool(np.full((3, 6, 6), 4.0), PoolSpec(3, 2))
    assert out.shape == (3, 2, 2)
    assert np.all(out == 4.0)


def test_max_pool_matches_oracle():
    rng = np.random.RandomState(17)
    for _ in range(200):
        depth = rng.randint(1, 4)
        height, width = rng.randint(1, 9, size=2)
        window = rng.randint(1, min(height, width) + 1)
        stride = rng.randint(1, 4)
        volume = rng.randint(-50, 50, size=(depth, height, width)).astype(np.float64)
        out = max_pool(volume, PoolSpec(window, stride))
        assert np.array_equal(out, naive_max_pool(volume, window, stride))


def test_relu():
    assert relu(-3) == 0
    assert relu(5) == 5
    volume = np.random.RandomState(2).randn(3, 4, 4)
    once = relu(volume)
    assert np.all(once >= 0)
    assert np.array_equal(relu(once), once)
    assert np.array_equal(once[volume > 0], volume[volume > 0])


def test_softmax_examples():
    np.testing.assert_allclose(softmax([0, 0, 0, 0]), [0.25] * 4)
    np.testing.assert_allclose(softmax([1, 2]), [0.26894, 0.73106], atol=1e-5)


def test_softmax_large_scores_do_not_overflow():
    out = softmax([1000.0, 1000.0, 0.0])
    np.testing.assert_allclose(out, [0.5, 0.5, 0.0], atol=1e-12)


def test_softmax_properties():
    rng = np.random.RandomState(1000)
    for _ in range(1000):
        z = rng.randn(1000) * 5
        out = softmax(z)
        assert abs(out.sum() - 1.0) <= 1e-6
    z = rng.randn(20)
    np.testing.assert_allclose(softmax(z + 123.5), softmax(z), rtol=1e-9, atol=1e-12)
    order = np.argsort(z)
    assert np.all(np.diff(softmax(z)[order]) > 0)


@pytest.mark.parametrize('z', [[], [1.0, float('nan')], [float('inf'), 0.0]])
def test_softmax_rejects(z):
    with pytest.raises(ValueError):
        softmax(z)


def test_fully_connected():
    out = fully_connected([1.0, 2.0, 3.0], [[1, 0, 0], [1, 1, 1]], [0.5, -6.0])
    assert out.tolist() == [1.5, 0.0]
    with pytest.raises(ValueError):
        fully_connected([1.0, 2.0], [[1, 0, 0]])


def test_forward_network():
    layers = [ConvSpec(1, 1, 0, 1), FullSpec(2)]
    params = [(np.ones((1, 1, 1, 1)), np.zeros(1)), (np.array([[1.0, 1, 1, 1], [0, 0, 0, 0]]), None)]
    out = forward_network(np.ones((1, 2, 2)), layers, params)
    expected = np.exp([4.0, 0.0]) / np.exp([4.0, 0.0]).sum()
    np.testing.assert_allclose(out, expected, rtol=1e-12)


def test_forward_network_with_pooling():
    rng = np.random.RandomState(4)
    layers = [ConvSpec(3, 1, 1, 4), PoolSpec(3, 2), FullSpec(8), FullSpec(3)]
    params = [(rng.randn(4, 3, 3, 3), rng.randn(4)),
              (rng.randn(8, 4 * 3 * 3), rng.randn(8)),
              (rng.randn(3, 8), rng.randn(3))]
    out = forward_network(rng.randn(3, 7, 7), layers, params)
    assert out.shape == (3, )
    assert abs(out.sum() - 1.0) < 1e-9


def test_forward_network_param_count():
    with pytest.raises(ValueError):
        forward_network(np.ones((1, 2, 2)), [FullSpec(2)], [])
