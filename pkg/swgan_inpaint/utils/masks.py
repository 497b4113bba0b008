"""
Irregular stroke masks and the two mask compositions used in training.

Mask convention: 1 marks a known pixel, 0 a missing one. Masks are
single-channel and broadcast over the image channels.
"""

import dataclasses
import logging
from typing import Sequence, Tuple, Union

import cv2
import numpy as np

from swgan_inpaint.core.tensor import Tensor, as_tensor
from swgan_inpaint.errors import ConfigError, ShapeError
from swgan_inpaint.utils.config import StrokeMaskSpec

logger = logging.getLogger(__name__)

MIN_MASK_SIZE = 16

Stroke = Tuple[np.ndarray, int]


def stroke_seed(seed: int, index: int) -> int:
    """Seed of the ``index``-th mask in a seeded series."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def draw_strokes(size: int, strokes: Sequence[Stroke]) -> np.ndarray:
    """Rasterize open polylines; returns a (1, size, size) mask with strokes at 0."""
    canvas = np.zeros((size, size), dtype=np.uint8)
    for points, thickness in strokes:
        pts = np.asarray(points, dtype=np.int32).reshape(-1, 1, 2)
        cv2.polylines(canvas, [pts], isClosed=False, color=255, thickness=int(thickness))
    return (canvas == 0).astype(np.float64)[None, :, :]


def coverage(mask: np.ndarray) -> float:
    """Fraction of missing pixels."""
    return float(1.0 - np.mean(mask))


def _random_strokes(spec: StrokeMaskSpec, size: int, rng: np.random.Generator) -> list:
    strokes = []
    max_step = max(1.0, spec.max_step_fraction * size)
    for _ in range(int(rng.integers(spec.num_strokes[0], spec.num_strokes[1] + 1))):
        count = int(rng.integers(spec.vertices_per_stroke[0], spec.vertices_per_stroke[1] + 1))
        thickness = int(rng.integers(spec.thickness[0], spec.thickness[1] + 1))
        point = rng.uniform(0, size - 1, size=2)
        points = [point]
        for _ in range(count - 1):
            angle = rng.uniform(0, 2 * np.pi)
            length = rng.uniform(1.0, max_step)
            point = np.clip(point + length * np.array([np.cos(angle), np.sin(angle)]), 0, size - 1)
            points.append(point)
        strokes.append((np.rint(points).astype(np.int32), thickness))
    return strokes


def synthesize_stroke_mask(spec: StrokeMaskSpec, size: int) -> np.ndarray:
    """Random polyline mask, deterministic in ``spec.seed``.

    Draws are retried until coverage falls inside the configured bounds. A draw
    with no strokes has coverage 0 and is accepted only when the lower bound is 0.
    """
    if size < MIN_MASK_SIZE:
        raise ConfigError([f"mask size must be >= {MIN_MASK_SIZE}, got {size}"])
    low, high = spec.coverage_bounds()
    rng = np.random.default_rng(spec.seed)
    for attempt in range(1, spec.max_attempts + 1):
        strokes = _random_strokes(spec, size, rng)
        mask = draw_strokes(size, strokes)
        value = coverage(mask)
        if low <= value <= high:
            logger.debug(
                "Synthesized stroke mask",
                extra={"seed": spec.seed, "attempt": attempt, "coverage": value},
            )
            return mask
    raise ConfigError(
        [
            f"no mask with coverage in [{low}, {high}] after {spec.max_attempts} attempts "
            f"(seed {spec.seed}, size {size})"
        ]
    )


def synthesize_series(spec: StrokeMaskSpec, size: int, count: int) -> list:
    return [
        synthesize_stroke_mask(dataclasses.replace(spec, seed=stroke_seed(spec.seed, i)), size)
        for i in range(count)
    ]


MaskLike = Union[Tensor, np.ndarray]


def _check_mask(image: Tensor, mask: Tensor, op: str) -> None:
    if image.ndim < 3 or image.ndim != mask.ndim or image.shape[-2:] != mask.shape[-2:]:
        raise ShapeError(f"{op}: image shape {image.shape} and mask shape {mask.shape} disagree")
    if image.ndim == 4 and mask.shape[0] not in (1, image.shape[0]):
        raise ShapeError(f"{op}: image shape {image.shape} and mask shape {mask.shape} disagree")
    if mask.shape[-3] not in (1, image.shape[-3]):
        raise ShapeError(f"{op}: mask shape {mask.shape} does not broadcast over image {image.shape}")


def apply_mask(image: MaskLike, mask: MaskLike) -> Tensor:
    """M_I = I * M; missing pixels become 0."""
    image = as_tensor(image)
    mask = as_tensor(mask, like=image)
    _check_mask(image, mask, "apply_mask")
    return image * mask


def composite_reconstruction(image: MaskLike, mask: MaskLike, prediction: MaskLike) -> Tensor:
    """I_R = I * M + (1 - M) * G(z): known pixels from I, missing pixels from the prediction."""
    prediction = as_tensor(prediction)
    image = as_tensor(image, like=prediction)
    mask = as_tensor(mask, like=prediction)
    if image.shape != prediction.shape:
        raise ShapeError(
            f"composite_reconstruction: image shape {image.shape} and prediction shape {prediction.shape} differ"
        )
    _check_mask(image, mask, "composite_reconstruction")
    return image * mask + (1.0 - mask) * prediction
