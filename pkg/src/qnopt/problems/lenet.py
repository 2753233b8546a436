"""Layer descriptions and exact parameter counting for LeNet-style networks."""
from __future__ import annotations

from dataclasses import dataclass

from ..errors import ShapeMismatch, UnknownLayer


@dataclass(frozen=True)
class Conv2d:
    filters: int
    kernel: int
    stride: int = 1


@dataclass(frozen=True)
class MaxPool:
    window: int
    stride: int


@dataclass(frozen=True)
class Dense:
    units: int


LENET5 = (
    Conv2d(20, 5),
    MaxPool(2, 2),
    Conv2d(50, 5),
    MaxPool(2, 2),
    Dense(500),
    Dense(10),
)


def output_shapes(layers, input_shape=(1, 28, 28)) -> list[tuple[int, ...]]:
    """Shape after each layer; inputs are (channels, height, width) or (features,)."""
    shape = tuple(input_shape)
    shapes = []
    for layer in layers:
        if isinstance(layer, Conv2d):
            if len(shape) != 3:
                raise ShapeMismatch("convolution needs a (C, H, W) input")
            c, h, w = shape
            h = (h - layer.kernel) // layer.stride + 1
            w = (w - layer.kernel) // layer.stride + 1
            if h <= 0 or w <= 0:
                raise ShapeMismatch("kernel larger than input")
            shape = (layer.filters, h, w)
        elif isinstance(layer, MaxPool):
            if len(shape) != 3:
                raise ShapeMismatch("pooling needs a (C, H, W) input")
            c, h, w = shape
            shape = (c, (h - layer.window) // layer.stride + 1, (w - layer.window) // layer.stride + 1)
        elif isinstance(layer, Dense):
            shape = (layer.units,)
        else:
            raise UnknownLayer(f"unsupported layer {layer!r}")
        shapes.append(shape)
    return shapes


def param_count(layers, input_shape=(1, 28, 28)) -> int:
    """Trainable weights plus biases. Dense layers flatten whatever precedes them."""
    shape = tuple(input_shape)
    total = 0
    for layer, out in zip(layers, output_shapes(layers, input_shape)):
        if isinstance(layer, Conv2d):
            total += layer.filters * (shape[0] * layer.kernel**2 + 1)
        elif isinstance(layer, Dense):
            fan_in = 1
            for d in shape:
                fan_in *= d
            total += (fan_in + 1) * layer.units
        shape = out
    return total
