"""
Forward-only convolutional network kernels and shape arithmetic.

Volumes are numpy arrays laid out depth first, (D, H, W). Filter banks are
(K, D, F, F). The heavy lifting is done in float64 by torch.nn.functional so that
integer inputs give exact results.
"""

from collections import namedtuple

import numpy as np
import torch
import torch.nn.functional as F


class ConvSpec(namedtuple("ConvSpec", ["filter_size", "stride", "pad", "num_filters"])):
    """Receptive field F, stride S, zero padding P and filter count K."""
    __slots__ = ()

    def __new__(cls, filter_size, stride=1, pad=0, num_filters=1):
        if filter_size < 1 or stride < 1 or pad < 0 or num_filters < 1:
            raise ValueError(
                "Invalid conv spec: filter_size={}, stride={}, pad={}, num_filters={}".format(
                    filter_size,
                    stride,
                    pad,
                    num_filters))
        return super(ConvSpec, cls).__new__(cls, filter_size, stride, pad, num_filters)


class PoolSpec(namedtuple("PoolSpec", ["window", "stride"])):
    """Max pooling over window x window cells; overlapping when stride < window."""
    __slots__ = ()

    def __new__(cls, window, stride):
        if window < 1 or stride < 1:
            raise ValueError("Invalid pool spec: window={}, stride={}".format(window, stride))
        return super(PoolSpec, cls).__new__(cls, window, stride)

    @property
    def overlapping(self):
        return self.stride < self.window


class FullSpec(namedtuple("FullSpec", ["outputs"])):
    __slots__ = ()


# Five convolutional stages, overlapping pooling after the first, second and fifth,
# then three fully connected layers feeding a 1000-way softmax.
ALEXNET_INPUT_SHAPE = (227, 227, 3)
ALEXNET_LAYERS = [
    ConvSpec(11, 4, 0, 96),
    PoolSpec(3, 2),
    ConvSpec(5, 1, 2, 256),
    PoolSpec(3, 2),
    ConvSpec(3, 1, 1, 384),
    ConvSpec(3, 1, 1, 384),
    ConvSpec(3, 1, 1, 256),
    PoolSpec(3, 2),
    FullSpec(4096),
    FullSpec(4096),
    FullSpec(1000),
]


def conv_output_shape(in_size, spec):
    """floor((W - F + 2P) / S) + 1"""
    padded = in_size + 2 * spec.pad
    if padded < spec.filter_size:
        raise ValueError("Filter of size {} does not fit a padded input of {}".format(
            spec.filter_size,
            padded))
    return (in_size - spec.filter_size + 2 * spec.pad) // spec.stride + 1


def pool_output_shape(in_size, spec):
    if in_size < spec.window:
        raise ValueError("Pool window {} exceeds input of {}".format(spec.window, in_size))
    return (in_size - spec.window) // spec.stride + 1


def network_shapes(input_shape, layers):
    """Walk (H, W, D) through a layer list, returning the shape after each layer."""
    height, width, depth = input_shape
    shapes = []
    flat = None
    for layer in layers:
        if isinstance(layer, ConvSpec):
            assert flat is None, "convolution after a fully connected layer"
            height = conv_output_shape(height, layer)
            width = conv_output_shape(width, layer)
            depth = layer.num_filters
            shapes.append((height, width, depth))
        elif isinstance(layer, PoolSpec):
            assert flat is None, "pooling after a fully connected layer"
            height = pool_output_shape(height, layer)
            width = pool_output_shape(width, layer)
            shapes.append((height, width, depth))
        elif isinstance(layer, FullSpec):
            flat = layer.outputs
            shapes.append((flat, ))
        else:
            raise ValueError("Unknown layer {!r}".format(layer))
    return shapes


def _tensor(array):
    return torch.from_numpy(np.array(array, dtype=np.float64))


def _as_volume(volume):
    volume = np.asarray(volume, dtype=np.float64)
    if volume.ndim == 2:
        volume = volume[np.newaxis]
    if volume.ndim != 3:
        raise ValueError("Expected a (D, H, W) volume, got shape {}".format(volume.shape))
    return volume


def conv_forward(volume, filters, spec, bias=None):
    """Slide each of the K filters over the volume and stack the activation maps.

    Arguments:
        volume: (D, H, W) input
        filters: (K, D, F, F) weights
        spec: ConvSpec
        bias: Optional: K biases

    Returns:
        (K, H', W') float64 array
    """
    volume = _as_volume(volume)
    filters = np.asarray(filters, dtype=np.float64)
    expected = (spec.num_filters, volume.shape[0], spec.filter_size, spec.filter_size)
    if filters.shape != expected:
        raise ValueError("Filter bank shape {} does not match {} for input depth {}".format(
            filters.shape,
            expected,
            volume.shape[0]))
    conv_output_shape(volume.shape[1], spec)
    conv_output_shape(volume.shape[2], spec)

    bias_t = None
    if bias is not None:
        bias = np.asarray(bias, dtype=np.float64)
        if bias.shape != (spec.num_filters, ):
            raise ValueError("Expected {} biases, got shape {}".format(
                spec.num_filters,
                bias.shape))
        bias_t = _tensor(bias)

    with torch.no_grad():
        out = F.conv2d(_tensor(volume).unsqueeze(0),
                       _tensor(filters),
                       bias=bias_t,
                       stride=spec.stride,
                       padding=spec.pad)
    return out.squeeze(0).numpy()


def max_pool(volume, spec):
    """Per-slice maximum over window x window cells; depth is unchanged."""
    volume = _as_volume(volume)
    pool_output_shape(volume.shape[1], spec)
    pool_output_shape(volume.shape[2], spec)
    with torch.no_grad():
        out = F.max_pool2d(_tensor(volume).unsqueeze(0),
                           kernel_size=spec.window,
                           stride=spec.stride)
    return out.squeeze(0).numpy()


def relu(x):
    return np.maximum(x, 0)


def fully_connected(vector, weights, bias=None):
    vector = np.asarray(vector, dtype=np.float64).reshape(-1)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 2 or weights.shape[1] != vector.shape[0]:
        raise ValueError("Weights of shape {} cannot take an input of {}".format(
            weights.shape,
            vector.shape[0]))
    bias_t = None if bias is None else _tensor(np.asarray(bias).reshape(-1))
    with torch.no_grad():
        out = F.linear(_tensor(vector), _tensor(weights), bias_t)
    return out.numpy()


def softmax(scores):
    """e^z_j / sum_k e^z_k, evaluated after subtracting max(z)."""
    z = np.asarray(scores, dtype=np.float64).reshape(-1)
    if z.size == 0:
        raise ValueError("softmax of an empty vector")
    if not np.all(np.isfinite(z)):
        raise ValueError("softmax input must be finite")
    e = np.exp(z - z.max())
    return e / e.sum()


def forward_network(volume, layers, params):
    """Run a layer list forward.

    params holds one (weights, bias) pair per ConvSpec and FullSpec, in order.
    ReLU follows every convolution and every fully connected layer but the last,
    whose output goes through softmax.
    """
    params = list(params)
    weighted = [l for l in layers if not isinstance(l, PoolSpec)]
    if len(params) != len(weighted):
        raise ValueError("Expected {} weight sets, got {}".format(len(weighted), len(params)))

    x = _as_volume(volume)
    p = iter(params)
    last = len(layers) - 1
    for i, layer in enumerate(layers):
        if isinstance(layer, ConvSpec):
            weights, bias = next(p)
            x = relu(conv_forward(x, weights, layer, bias))
        elif isinstance(layer, PoolSpec):
            x = max_pool(x, layer)
        else:
            weights, bias = next(p)
            x = fully_connected(x, weights, bias)
            if i != last:
                x = relu(x)
    return softmax(x)
