"""
Wasserstein critic D(x): strided convolutions and a linear scalar head.
"""

import logging
from typing import List

import numpy as np

from swgan_inpaint.core.tensor import Tensor, leaky_relu, reshape
from swgan_inpaint.errors import ConfigError, ShapeError
from swgan_inpaint.nn.layers import Conv2dLayer, LayerParamSet, Linear, Module
from swgan_inpaint.utils.config import CriticConfig

logger = logging.getLogger(__name__)


class Critic(Module):
    def __init__(self, config: CriticConfig, input_size: int, seed: int = 0):
        super().__init__()
        self.config = config
        self.input_size = input_size
        rng = np.random.default_rng(seed)
        self.convs: List[Conv2dLayer] = []
        in_ch, size = config.in_channels, input_size
        for b, out_ch in enumerate(config.channels, start=1):
            layer = Conv2dLayer(
                in_ch, out_ch, config.kernel_size, rng, stride=config.stride, init_std=config.init_std
            )
            size = layer.output_size(size)
            if size < 1:
                raise ConfigError(
                    [f"critic block {b} output size {size} < 1 for input size {input_size}"]
                )
            self.convs.append(self.register(f"conv{b}", layer))
            in_ch = out_ch
        self.feature_size = size
        self.head = self.register("head", Linear(in_ch * size * size, 1, rng, init_std=config.init_std))

    def __call__(self, image: Tensor) -> Tensor:
        return critic_forward(self, image)


def critic_forward(model: Critic, image: Tensor) -> Tensor:
    """One unconstrained real score per image, shape (batch,)."""
    expected = (model.config.in_channels, model.input_size, model.input_size)
    if image.ndim != 4 or image.shape[1:] != expected:
        raise ShapeError(f"critic expects images of shape (batch, {expected}), got {image.shape}")
    x = image
    for layer in model.convs:
        x = leaky_relu(layer(x), model.config.leaky_slope)
    scores = model.head(x)
    return reshape(scores, (image.shape[0],))


def clip_critic_weights(params: LayerParamSet, c: float) -> None:
    """Clamp every critic parameter element into [-c, c]."""
    if not c > 0:
        raise ValueError(f"clipping constant must be positive, got {c}")
    for p in params:
        p.data = np.clip(p.data, -c, c)
