"""
Shared fixtures: tiny run configs, image folders, the smoke-run dataset and a brute-force SSIM.
"""

import json

import numpy as np
import pytest

from swgan_inpaint.utils.config import RunConfig, StrokeMaskSpec
from swgan_inpaint.utils.images import mask_to_png, save_png
from swgan_inpaint.utils.masks import synthesize_stroke_mask

TINY = {
    "generator": {"input_size": 16, "depth": 2, "channels": [4, 8], "kernel_size": 3},
    "critic": {"depth": 2, "channels": [4, 8], "kernel_size": 3},
    "features": {"feature_channels": 8},
    "train": {"batch_size": 2, "epochs": 2, "checkpoint_every": 2, "seed": 3},
    "masks": {"num_strokes": [1, 3], "thickness": [2, 4]},
}


def write_images(directory, count, size=16, seed=0):
    """Random 8-bit RGB PNGs named img_{i}.png; returns the pixel arrays."""
    rng = np.random.default_rng(seed)
    directory.mkdir(parents=True, exist_ok=True)
    images = []
    for i in range(count):
        pixels = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
        save_png(directory / f"img_{i}.png", pixels)
        images.append(pixels)
    return images


def tiny_document(tmp_path, **overrides):
    doc = json.loads(json.dumps(TINY))
    doc["data"] = {"image_dir": str(tmp_path / "images"), "num_workers": 1}
    doc["output_dir"] = str(tmp_path / "run")
    for section, values in overrides.items():
        if isinstance(values, dict):
            doc.setdefault(section, {}).update(values)
        else:
            doc[section] = values
    return doc


# near-mid-gray RGB colour shared by the smoke-run faces, in 8-bit levels
FLAT_FACE_COLOUR = (138, 117, 137)


def write_flat_faces(directory, count, size=32, seed=0):
    """One shared colour plus +-1 level of per-pixel noise, so every face has the same hole content."""
    rng = np.random.default_rng(seed)
    directory.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        noise = rng.integers(-1, 2, size=(size, size, 3))
        save_png(directory / f"img_{i}.png", np.asarray(FLAT_FACE_COLOUR) + noise)
    return directory


def write_shared_mask(directory, size=32, seed=5):
    """A single stroke mask PNG, paired with every image through data.mask_dir."""
    spec = StrokeMaskSpec(seed=seed, target_coverage=[0.15, 0.4])
    mask = synthesize_stroke_mask(spec, size)
    save_png(directory / "mask_0.png", mask_to_png(mask))
    return mask


def smoke_document(tmp_path, **overrides):
    """8 faces at 32x32 with one fixed mask under the desk optimiser settings."""
    write_flat_faces(tmp_path / "images", 8, seed=9)
    write_shared_mask(tmp_path / "masks")
    doc = {
        "generator": {"input_size": 32, "depth": 3, "channels": [8, 16, 32], "kernel_size": 3, "dropout_rate": 0.0},
        "critic": {"depth": 3, "channels": [8, 16, 32], "kernel_size": 3},
        "features": {"feature_channels": 16},
        "train": {"batch_size": 4, "epochs": 150, "max_steps": 300, "checkpoint_every": 100},
        "data": {
            "image_dir": str(tmp_path / "images"),
            "mask_dir": str(tmp_path / "masks"),
            "split_ratio": 1.0,
            "num_workers": 1,
        },
        "output_dir": str(tmp_path / "run"),
    }
    for section, values in overrides.items():
        doc.setdefault(section, {}).update(values)
    return doc


@pytest.fixture
def image_dir(tmp_path):
    directory = tmp_path / "images"
    write_images(directory, 5)
    return directory


@pytest.fixture
def tiny_config(tmp_path, image_dir):
    return RunConfig.from_dict(tiny_document(tmp_path))


@pytest.fixture
def config_file(tmp_path, image_dir):
    def write(**overrides):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(tiny_document(tmp_path, **overrides)))
        return path

    return write


def brute_force_ssim(a, b, sigma=1.5, radius=5, data_range=255.0):
    """Direct sliding-window SSIM over window-valid positions, averaged over channels."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    taps = np.arange(-radius, radius + 1)
    g = np.exp(-(taps ** 2) / (2 * sigma ** 2))
    g /= g.sum()
    window = np.outer(g, g)
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    h, w, channels = a.shape
    values = []
    for c in range(channels):
        for i in range(radius, h - radius):
            for j in range(radius, w - radius):
                x = a[i - radius:i + radius + 1, j - radius:j + radius + 1, c]
                y = b[i - radius:i + radius + 1, j - radius:j + radius + 1, c]
                mx, my = np.sum(window * x), np.sum(window * y)
                vx = np.sum(window * x * x) - mx * mx
                vy = np.sum(window * y * y) - my * my
                cxy = np.sum(window * x * y) - mx * my
                values.append(
                    ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
                )
    return float(np.mean(values))


@pytest.fixture
def ssim_oracle():
    return brute_force_ssim
