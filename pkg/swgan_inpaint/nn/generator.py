"""
Dilated-convolution encoder-decoder generator with element-wise-sum skips.
"""

import logging
from typing import Collection, Dict, List, Optional

import numpy as np

from swgan_inpaint.core.tensor import Tensor, leaky_relu, tanh
from swgan_inpaint.errors import ConfigError, ShapeError
from swgan_inpaint.nn.functional import dropout, max_pool2d, upsample_nn
from swgan_inpaint.nn.layers import Conv2dLayer, Module
from swgan_inpaint.utils.config import GeneratorConfig

logger = logging.getLogger(__name__)

MODES = ("train", "eval")


def block_seed(seed: int, block: int) -> int:
    return int(np.random.SeedSequence([seed, block]).generate_state(1)[0])


class Generator(Module):
    """G(z): masked image in, same-shape prediction in (-1, 1) out.

    Encoder block b (1..depth): dilated conv -> leaky ReLU -> [skip b] -> 2x2 max-pool.
    Final encoder layer (depth+1): dilated conv, no activation, no pooling.
    Decoder stage b (depth..1): nearest x2 -> dilated conv -> (+ skip b) -> leaky ReLU.
    Output: conv to image channels -> tanh.
    """

    def __init__(self, config: GeneratorConfig, seed: int = 0):
        super().__init__()
        self.config = config
        rng = np.random.default_rng(seed)
        k, d, std = config.kernel_size, config.dilation_rate, config.init_std

        self.encoder: List[Conv2dLayer] = []
        in_ch = config.in_channels
        for b, out_ch in enumerate(config.channels, start=1):
            layer = Conv2dLayer(in_ch, out_ch, k, rng, dilation_rate=d, init_std=std)
            self.encoder.append(self.register(f"encoder{b}", layer))
            in_ch = out_ch
        self.bottleneck = self.register(
            "bottleneck", Conv2dLayer(in_ch, in_ch, k, rng, dilation_rate=d, init_std=std)
        )

        # decoder stage b restores encoder block b's resolution and width
        self.decoder: Dict[int, Conv2dLayer] = {}
        for b in range(config.depth, 0, -1):
            src = config.channels[-1] if b == config.depth else config.channels[b]
            layer = Conv2dLayer(src, config.channels[b - 1], k, rng, dilation_rate=d, init_std=std)
            self.decoder[b] = self.register(f"decoder{b}", layer)
        self.head = self.register(
            "head", Conv2dLayer(config.channels[0], config.in_channels, k, rng, init_std=std)
        )
        self.skip_shapes = self._check_skip_alignment()

    def _check_skip_alignment(self) -> Dict[int, tuple]:
        """Walk the shape arithmetic once; every skip must match its decoder stage."""
        size = self.config.input_size
        encoder_shapes = {}
        for b, layer in enumerate(self.encoder, start=1):
            size = layer.output_size(size)
            encoder_shapes[b] = (layer.out_channels, size, size)
            size //= 2
        size = self.bottleneck.output_size(size)
        problems = []
        for b in range(self.config.depth, 0, -1):
            size = self.decoder[b].output_size(size * 2)
            decoder_shape = (self.decoder[b].out_channels, size, size)
            if decoder_shape != encoder_shapes[b]:
                problems.append(
                    f"skip {b}: encoder map {encoder_shapes[b]} vs decoder map {decoder_shape}"
                )
        if self.head.output_size(size) != self.config.input_size:
            problems.append(f"output size {self.head.output_size(size)} != input size")
        if problems:
            raise ConfigError(problems)
        return encoder_shapes

    def __call__(
        self,
        masked_input: Tensor,
        mode: str = "eval",
        seed: int = 0,
        drop_skips: Collection[int] = (),
    ) -> Tensor:
        return generator_forward(self, masked_input, mode, seed, drop_skips)


def generator_forward(
    model: Generator,
    masked_input: Tensor,
    mode: str = "eval",
    seed: int = 0,
    drop_skips: Collection[int] = (),
) -> Tensor:
    """Run G on M_I. ``drop_skips`` zeroes the listed encoder skip tensors."""
    config = model.config
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    expected = (config.in_channels, config.input_size, config.input_size)
    if masked_input.ndim != 4 or masked_input.shape[1:] != expected:
        raise ShapeError(
            f"generator expects input of shape (batch, {expected[0]}, {expected[1]}, {expected[2]}), "
            f"got {masked_input.shape}"
        )
    training = mode == "train"
    slope = config.leaky_slope
    dropped = set(config.dropout_blocks or [])

    skips: Dict[int, Tensor] = {}
    x = masked_input
    for b, layer in enumerate(model.encoder, start=1):
        x = leaky_relu(layer(x), slope)
        skips[b] = x
        x = max_pool2d(x, 2)
        if b in dropped:
            x = dropout(x, config.dropout_rate, training, block_seed(seed, b))
    final = config.depth + 1
    x = model.bottleneck(x)
    if final in dropped:
        x = dropout(x, config.dropout_rate, training, block_seed(seed, final))

    for b in range(config.depth, 0, -1):
        x = model.decoder[b](upsample_nn(x, 2))
        if config.use_skips and b not in drop_skips:
            x = x + skips[b]
        x = leaky_relu(x, slope)
    return tanh(model.head(x))


def build_generator(config: GeneratorConfig, seed: int = 0, name: Optional[str] = None) -> Generator:
    model = Generator(config, seed=seed)
    logger.info(
        "Built generator",
        extra={
            "model": name or "generator",
            "parameters": sum(p.size for p in model.parameters()),
            "skips": config.use_skips,
            "dilation_rate": config.dilation_rate,
        },
    )
    return model
