"""
Frozen VGG-style feature extractor used by the perceptual loss.

Three blocks of 3x3 convolutions with ReLU (2, 2 and 3 convolutions), 2x2
max-pooling after the first two blocks. The tap is block3_conv3 after its
ReLU, so features come out at a quarter of the input resolution.
"""

import logging
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from swgan_inpaint.core.tensor import Tensor, leaky_relu
from swgan_inpaint.errors import ContainerError, ShapeError
from swgan_inpaint.nn.checkpoint import FEATURE_WEIGHTS_MAGIC, read_container, write_container
from swgan_inpaint.nn.functional import max_pool2d
from swgan_inpaint.nn.layers import Conv2dLayer, Module
from swgan_inpaint.utils.config import FeatureExtractorConfig

logger = logging.getLogger(__name__)

# (block, convolutions, width divisor of feature_channels)
BLOCKS: Tuple[Tuple[int, int, int], ...] = ((1, 2, 4), (2, 2, 2), (3, 3, 1))


class FeatureExtractor(Module):
    def __init__(self, config: FeatureExtractorConfig, in_channels: int = 3):
        super().__init__()
        self.config = config
        self.in_channels = in_channels
        rng = np.random.default_rng(config.seed)
        self.blocks: List[List[Conv2dLayer]] = []
        in_ch = in_channels
        for block, count, divisor in BLOCKS:
            width = config.feature_channels // divisor
            layers = []
            for i in range(1, count + 1):
                layer = Conv2dLayer(in_ch, width, 3, rng, padding=1)
                layers.append(self.register(f"block{block}_conv{i}", layer))
                in_ch = width
            self.blocks.append(layers)

        if config.source == "weights-file":
            self.load_weights(config.weights_path)
        for p in self.parameters():
            p.requires_grad = False

    def load_weights(self, path: Union[str, Path]) -> None:
        metadata, arrays = read_container(path, FEATURE_WEIGHTS_MAGIC)
        channels = metadata.get("feature_channels")
        if channels is not None and channels != self.config.feature_channels:
            raise ContainerError(
                f"{path}: weights are for feature_channels={channels}, "
                f"config asks for {self.config.feature_channels}"
            )
        self.load_arrays(arrays)
        logger.info(f"Loaded feature-extractor weights from {path}", extra={"arrays": len(arrays)})

    def save_weights(self, path: Union[str, Path]) -> None:
        write_container(
            path,
            FEATURE_WEIGHTS_MAGIC,
            self.parameters().snapshot(),
            {"feature_channels": self.config.feature_channels, "in_channels": self.in_channels},
        )

    def __call__(self, image: Tensor) -> Tensor:
        return extract_features(image, self)


def extract_features(image: Tensor, extractor: FeatureExtractor) -> Tensor:
    """phi(image): (N, feature_channels, H/4, W/4)."""
    factor = extractor.config.downsample_factor
    if image.ndim != 4 or image.shape[1] != extractor.in_channels:
        raise ShapeError(
            f"feature extractor expects (batch, {extractor.in_channels}, H, W), got {image.shape}"
        )
    if image.shape[2] % factor or image.shape[3] % factor:
        raise ShapeError(
            f"feature extractor needs spatial dims divisible by {factor}, got {image.shape}"
        )
    x = image
    last = len(extractor.blocks) - 1
    for index, layers in enumerate(extractor.blocks):
        for layer in layers:
            x = leaky_relu(layer(x), 0.0)
        if index < last:
            x = max_pool2d(x, 2)
    return x
