"""
Inpainting with a trained generator.
"""

import logging
import time
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from swgan_inpaint.core.tensor import Tensor, default_dtype, no_grad
from swgan_inpaint.errors import ShapeError
from swgan_inpaint.ml.trainer import GENERATOR_PREFIX, load_checkpoint
from swgan_inpaint.nn.generator import Generator
from swgan_inpaint.utils.config import RunConfig
from swgan_inpaint.utils.masks import apply_mask, composite_reconstruction

logger = logging.getLogger(__name__)


def load_generator(checkpoint: Union[str, Path]) -> Tuple[Generator, RunConfig]:
    """Rebuild the generator recorded in a checkpoint and load its parameters."""
    state = load_checkpoint(checkpoint)
    config = state.config
    with default_dtype(config.train.dtype):
        generator = Generator(config.generator)
    generator.load_arrays(state.arrays, GENERATOR_PREFIX)
    logger.info(f"Loaded generator from {checkpoint}", extra={"step": state.step})
    return generator, config


def inpaint(generator: Generator, image: np.ndarray, mask: np.ndarray) -> Tuple[np.ndarray, float]:
    """Composite I_R for one (3, H, W) image and (1, H, W) mask.

    Returns the reconstruction and the prediction wall-clock time in seconds.
    """
    expected = (generator.config.in_channels, generator.config.input_size, generator.config.input_size)
    if image.shape != expected:
        raise ShapeError(f"checkpoint expects images of shape {expected}, got {image.shape}")
    if mask.shape != (1,) + expected[1:]:
        raise ShapeError(f"mask shape {mask.shape} does not match image shape {image.shape}")
    dtype = generator.head.weight.dtype
    started = time.perf_counter()
    with default_dtype(dtype), no_grad():
        images = Tensor(image[None])
        masks = Tensor(mask[None])
        prediction = generator(apply_mask(images, masks), mode="eval")
        reconstruction = composite_reconstruction(
            Tensor(image[None], dtype=np.float64),
            Tensor(mask[None], dtype=np.float64),
            Tensor(prediction.data, dtype=np.float64),
        )
    elapsed = time.perf_counter() - started
    logger.info("Inpainted image", extra={"prediction_s": round(elapsed, 6)})
    return reconstruction.data[0], elapsed
