"""
Image and mask file I/O.

Images live in [-1, 1] as (C, H, W) arrays inside the package and as 8-bit
(H, W, C) arrays on disk.
"""

import logging
from pathlib import Path
from typing import Optional, Union

import cv2
import numpy as np
from PIL import Image, UnidentifiedImageError

from swgan_inpaint.errors import ImageIOError, ShapeError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

MASK_THRESHOLD = 127.5


def _open(path: PathLike) -> Image.Image:
    try:
        with Image.open(path) as img:
            img.load()
            return img.copy()
    except FileNotFoundError as e:
        raise ImageIOError(f"image file not found: {path}") from e
    except (UnidentifiedImageError, OSError) as e:
        raise ImageIOError(f"cannot read image {path}: {e}") from e


def read_rgb8(path: PathLike) -> np.ndarray:
    """8-bit RGB file -> uint8 (H, W, 3)."""
    img = _open(path)
    if img.mode != "RGB":
        raise ImageIOError(f"{path}: expected an 8-bit RGB image, got mode {img.mode}")
    return np.asarray(img, dtype=np.uint8)


def normalize(pixels: np.ndarray) -> np.ndarray:
    return pixels.astype(np.float64) / 127.5 - 1.0


def denormalize(image: np.ndarray) -> np.ndarray:
    """[-1, 1] (C, H, W) -> uint8 (H, W, C), clamped before quantization."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3:
        raise ShapeError(f"denormalize expects (C, H, W), got {image.shape}")
    pixels = np.clip(np.rint((image + 1.0) * 127.5), 0, 255).astype(np.uint8)
    return np.ascontiguousarray(pixels.transpose(1, 2, 0))


def resize(array: np.ndarray, size: int) -> np.ndarray:
    if array.shape[0] == size and array.shape[1] == size:
        return array
    return cv2.resize(array, (size, size), interpolation=cv2.INTER_LINEAR)


def load_and_normalize(path: PathLike, size: Optional[int] = None) -> np.ndarray:
    """Read an 8-bit RGB file as (3, H, W) in [-1, 1], bilinearly resized when ``size`` is set."""
    image = normalize(read_rgb8(path))
    if size is not None and image.shape[:2] != (size, size):
        image = resize(image.astype(np.float32), size).astype(np.float64)
        image = np.clip(image, -1.0, 1.0)
    return image.transpose(2, 0, 1).copy()


def save_png(path: PathLike, pixels: np.ndarray) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    try:
        Image.fromarray(np.asarray(pixels, dtype=np.uint8)).save(target, format="PNG")
    except OSError as e:
        raise ImageIOError(f"cannot write {target}: {e}") from e


def load_mask_file(path: PathLike, size: Optional[int] = None, invert: bool = False) -> np.ndarray:
    """Threshold a grayscale or RGB mask image into a (1, H, W) array of {0, 1}.

    Luma at or above 127.5 marks a known pixel; ``invert`` flips the polarity.
    """
    img = _open(path)
    if img.mode not in ("L", "RGB"):
        raise ImageIOError(f"{path}: expected an 8-bit grayscale or RGB mask, got mode {img.mode}")
    luma = np.asarray(img.convert("L"), dtype=np.float32)
    if size is not None:
        luma = resize(luma, size)
    mask = (luma >= MASK_THRESHOLD).astype(np.float64)
    if invert:
        mask = 1.0 - mask
    return mask[None, :, :]


def mask_to_png(mask: np.ndarray) -> np.ndarray:
    """(1, H, W) {0, 1} -> uint8 (H, W) with 255 for known pixels."""
    return (np.asarray(mask)[0] * 255).astype(np.uint8)
