"""
Parameterised building blocks and the parameter registry.
"""

import logging
from collections import OrderedDict
from contextlib import contextmanager
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np

from swgan_inpaint.core.tensor import Tensor, matmul, reshape
from swgan_inpaint.errors import ConfigError, ShapeError
from swgan_inpaint.nn.functional import (
    conv2d,
    conv_output_size,
    effective_kernel_extent,
)

logger = logging.getLogger(__name__)


class LayerParamSet:
    """Ordered mapping from layer path to trainable tensor."""

    def __init__(self, items: Optional[Mapping[str, Tensor]] = None):
        self._params: "OrderedDict[str, Tensor]" = OrderedDict()
        for name, tensor in (items or {}).items():
            self.add(name, tensor)

    def add(self, name: str, tensor: Tensor) -> None:
        if name in self._params:
            raise ValueError(f"parameter path '{name}' registered twice")
        if any(existing is tensor for existing in self._params.values()):
            raise ValueError(f"tensor for '{name}' is already registered under another path")
        self._params[name] = tensor

    def items(self) -> Iterator[Tuple[str, Tensor]]:
        return iter(self._params.items())

    def names(self) -> List[str]:
        return list(self._params)

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __iter__(self) -> Iterator[Tensor]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def zero_grad(self) -> None:
        for p in self:
            p.zero_grad()

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.items()}


class Module:
    """Minimal container: child modules plus own parameters, walked in insertion order."""

    def __init__(self):
        self._children: "OrderedDict[str, Module]" = OrderedDict()
        self._own: "OrderedDict[str, Tensor]" = OrderedDict()

    def register(self, name: str, child: "Module") -> "Module":
        self._children[name] = child
        return child

    def parameter(self, name: str, data: np.ndarray) -> Tensor:
        tensor = Tensor(data, requires_grad=True)
        self._own[name] = tensor
        return tensor

    def parameters(self, prefix: str = "") -> LayerParamSet:
        params = LayerParamSet()
        for name, tensor in self._own.items():
            params.add(f"{prefix}{name}", tensor)
        for child_name, child in self._children.items():
            for name, tensor in child.parameters(f"{prefix}{child_name}.").items():
                params.add(name, tensor)
        return params

    def zero_grad(self) -> None:
        self.parameters().zero_grad()

    @contextmanager
    def frozen(self) -> Iterator[None]:
        """Temporarily stop gradients from reaching this module's parameters."""
        params = list(self.parameters())
        previous = [p.requires_grad for p in params]
        for p in params:
            p.requires_grad = False
        try:
            yield
        finally:
            for p, flag in zip(params, previous):
                p.requires_grad = flag

    def load_arrays(self, arrays: Mapping[str, np.ndarray], prefix: str = "") -> None:
        """Copy arrays into parameters; every path must be present with its shape."""
        problems = []
        params = self.parameters()
        for name, tensor in params.items():
            key = f"{prefix}{name}"
            if key not in arrays:
                problems.append(f"missing parameter '{key}'")
            elif tuple(arrays[key].shape) != tensor.shape:
                problems.append(
                    f"parameter '{key}' has shape {tuple(arrays[key].shape)}, expected {tensor.shape}"
                )
        if problems:
            raise ShapeError("; ".join(problems))
        for name, tensor in params.items():
            tensor.data = np.array(arrays[f"{prefix}{name}"], dtype=tensor.dtype)


def init_weight(
    rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int, init_std: Optional[float] = None
) -> np.ndarray:
    """He-uniform by default; N(0, init_std) when a standard deviation is given."""
    if init_std is not None:
        return rng.normal(0.0, init_std, size=shape)
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Conv2dLayer(Module):
    """Square-kernel convolution with dilation rate d_r, stride s and zero padding p."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        dilation_rate: int = 1,
        stride: int = 1,
        padding: Optional[int] = None,
        init_std: Optional[float] = None,
    ):
        super().__init__()
        problems = []
        for label, value in (
            ("in_channels", in_channels),
            ("out_channels", out_channels),
            ("kernel_size", kernel_size),
            ("dilation_rate", dilation_rate),
            ("stride", stride),
        ):
            if value < 1:
                problems.append(f"{label} must be positive, got {value}")
        if padding is not None and padding < 0:
            problems.append(f"padding must be non-negative, got {padding}")
        if problems:
            raise ConfigError(problems)

        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.dilation_rate = dilation_rate
        self.stride = stride
        # "same"-style padding keeps stride-1 outputs aligned with their inputs
        self.padding = self.extent // 2 if padding is None else padding

        fan_in = in_channels * kernel_size * kernel_size
        self.weight = self.parameter(
            "weight",
            init_weight(rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in, init_std),
        )
        self.bias = self.parameter("bias", np.zeros(out_channels))

    @property
    def extent(self) -> int:
        return effective_kernel_extent(self.kernel_size, self.dilation_rate)

    def output_size(self, size: int) -> int:
        return conv_output_size(size, self.kernel_size, self.dilation_rate, self.stride, self.padding)

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d_dilated(x, self)

    def __repr__(self) -> str:
        return (
            f"Conv2dLayer({self.in_channels}->{self.out_channels}, k={self.kernel_size}, "
            f"d_r={self.dilation_rate}, s={self.stride}, p={self.padding})"
        )


def conv2d_dilated(x: Tensor, layer: Conv2dLayer) -> Tensor:
    if x.ndim != 4 or x.shape[1] != layer.in_channels:
        raise ShapeError(
            f"{layer!r} expects {layer.in_channels} input channels, got input of shape {x.shape}"
        )
    return conv2d(
        x,
        layer.weight,
        layer.bias,
        stride=layer.stride,
        padding=layer.padding,
        dilation=layer.dilation_rate,
    )


class Linear(Module):
    def __init__(
        self,
        in_features: int,
        out_features: int,
        rng: np.random.Generator,
        init_std: Optional[float] = None,
    ):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.weight = self.parameter(
            "weight", init_weight(rng, (in_features, out_features), in_features, init_std)
        )
        self.bias = self.parameter("bias", np.zeros((1, out_features)))

    def __call__(self, x: Tensor) -> Tensor:
        flat = reshape(x, (x.shape[0], -1))
        if flat.shape[1] != self.in_features:
            raise ShapeError(
                f"Linear expects {self.in_features} features, got input of shape {x.shape}"
            )
        return matmul(flat, self.weight) + self.bias
