"""
Image-quality metrics on 8-bit intensities: MSE, MAE, PSNR and SSIM.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from skimage.metrics import structural_similarity
from sklearn.metrics import mean_absolute_error, mean_squared_error

from swgan_inpaint.errors import ConfigError, ShapeError
from swgan_inpaint.utils.images import load_mask_file, read_rgb8

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

PSNR_CAP_DB = 99.0
PEAK = 255.0
SSIM_SIGMA = 1.5
SSIM_WINDOW = 11
REGIONS = ("full", "masked")
COLUMNS = ("mse", "mae", "psnr_db", "ssim")


def _pair(a: np.ndarray, b: np.ndarray, op: str) -> Tuple[np.ndarray, np.ndarray]:
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")
    if a.size == 0:
        raise ShapeError(f"{op}: empty images")
    return a.astype(np.float64).reshape(-1), b.astype(np.float64).reshape(-1)


def mse(a: np.ndarray, b: np.ndarray) -> float:
    x, y = _pair(a, b, "mse")
    return float(mean_squared_error(x, y))


def mae(a: np.ndarray, b: np.ndarray) -> float:
    x, y = _pair(a, b, "mae")
    return float(mean_absolute_error(x, y))


def psnr_from_mse(value: float, cap: float = PSNR_CAP_DB) -> float:
    if value == 0:
        return cap
    return float(10.0 * np.log10(PEAK * PEAK / value))


def psnr(a: np.ndarray, b: np.ndarray, cap: float = PSNR_CAP_DB) -> float:
    """10 log10(255^2 / mse) in dB; ``cap`` for identical images."""
    return psnr_from_mse(mse(a, b), cap)


def ssim_map(a: np.ndarray, b: np.ndarray) -> Tuple[float, np.ndarray]:
    """Gaussian-window SSIM (11x11, sigma 1.5, K1 0.01, K2 0.03, L 255).

    Returns the mean over the window-valid interior and the full local map.
    Multi-channel (H, W, C) inputs are scored per channel and averaged.
    """
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"ssim: shapes {a.shape} and {b.shape} differ")
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise ShapeError(f"ssim: images of shape {a.shape} are smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    channel_axis = -1 if a.ndim == 3 else None
    score, local = structural_similarity(
        a.astype(np.float64),
        b.astype(np.float64),
        data_range=PEAK,
        gaussian_weights=True,
        sigma=SSIM_SIGMA,
        use_sample_covariance=False,
        channel_axis=channel_axis,
        full=True,
    )
    return float(score), local


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    return ssim_map(a, b)[0]


@dataclass
class ImageMetrics:
    name: str
    mse: float
    mae: float
    psnr_db: float
    ssim: float


def score_pair(
    ground_truth: np.ndarray,
    prediction: np.ndarray,
    name: str = "",
    missing: Optional[np.ndarray] = None,
    cap: float = PSNR_CAP_DB,
) -> ImageMetrics:
    """All four metrics; ``missing`` (H, W) bool restricts them to the masked region."""
    if missing is None:
        m = mse(ground_truth, prediction)
        return ImageMetrics(name, m, mae(ground_truth, prediction), psnr_from_mse(m, cap), ssim(ground_truth, prediction))

    if missing.shape != ground_truth.shape[:2]:
        raise ShapeError(f"mask shape {missing.shape} does not match image shape {ground_truth.shape}")
    if not missing.any():
        logger.warning(f"{name}: mask has no missing pixels; region metrics undefined")
        return ImageMetrics(name, float("nan"), float("nan"), float("nan"), float("nan"))
    m = mse(ground_truth[missing], prediction[missing])
    _, local = ssim_map(ground_truth, prediction)
    pad = (SSIM_WINDOW - 1) // 2
    interior = np.zeros_like(missing)
    interior[pad:-pad, pad:-pad] = True
    region = missing & interior
    values = local[region] if region.any() else local[missing]
    return ImageMetrics(
        name, m, mae(ground_truth[missing], prediction[missing]), psnr_from_mse(m, cap), float(np.mean(values))
    )


@dataclass
class MetricsReport:
    per_image: List[ImageMetrics] = field(default_factory=list)
    region: str = "full"

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([asdict(m) for m in self.per_image], columns=["name", *COLUMNS])
        return frame.set_index("name")

    def aggregate(self) -> Dict[str, float]:
        means = self.to_frame()[list(COLUMNS)].mean()
        return {k: float(means[k]) for k in COLUMNS}

    def to_dict(self) -> Dict[str, object]:
        return {
            "region": self.region,
            "per_image": [asdict(m) for m in self.per_image],
            "aggregate": self.aggregate(),
        }

    def to_text(self) -> str:
        frame = self.to_frame().rename(columns={"mse": "MSE", "mae": "MAE", "psnr_db": "PSNR", "ssim": "SSIM"})
        frame.loc["mean"] = frame.mean()
        return frame.to_string(float_format=lambda v: f"{v:.4f}")

    def write(self, out_dir: PathLike) -> Tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        json_path, text_path = out / "metrics.json", out / "metrics.txt"
        with open(json_path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
        text_path.write_text(self.to_text() + "\n")
        return json_path, text_path


@dataclass
class EvalPair:
    ground_truth: str
    prediction: str
    mask: Optional[str] = None


def pairs_from_dirs(gt_dir: PathLike, pred_dir: PathLike) -> List[EvalPair]:
    """Pair PNGs by file name; both directories must hold the same names."""
    gt = {p.name: p for p in sorted(Path(gt_dir).glob("*.png"))}
    pred = {p.name: p for p in sorted(Path(pred_dir).glob("*.png"))}
    if len(gt) != len(pred) or set(gt) != set(pred):
        raise ConfigError(
            [f"image sets differ: {len(gt)} ground-truth vs {len(pred)} predictions",
             *(f"unmatched file '{n}'" for n in sorted(set(gt) ^ set(pred)))]
        )
    return [EvalPair(str(gt[n]), str(pred[n])) for n in sorted(gt)]


def pairs_from_manifest(path: PathLike) -> List[EvalPair]:
    """JSON list of {ground_truth, prediction[, mask]}; relative paths resolve against the manifest."""
    manifest = Path(path)
    try:
        raw = json.loads(manifest.read_text())
    except FileNotFoundError as e:
        raise ConfigError([f"pairs manifest not found: {manifest}"]) from e
    except json.JSONDecodeError as e:
        raise ConfigError([f"pairs manifest {manifest} is not valid JSON: {e}"]) from e
    if not isinstance(raw, list):
        raise ConfigError([f"pairs manifest {manifest} must be a JSON list"])
    pairs, problems = [], []
    for i, item in enumerate(raw):
        if not isinstance(item, dict) or not {"ground_truth", "prediction"} <= set(item):
            problems.append(f"entry {i}: needs 'ground_truth' and 'prediction'")
            continue
        mask = item.get("mask")
        pairs.append(
            EvalPair(
                str(manifest.parent / item["ground_truth"]),
                str(manifest.parent / item["prediction"]),
                str(manifest.parent / mask) if mask else None,
            )
        )
    if problems:
        raise ConfigError(problems)
    return pairs


def evaluate_pairs(
    pairs: Sequence[EvalPair],
    region: str = "full",
    invert_masks: bool = False,
    cap: float = PSNR_CAP_DB,
    num_workers: int = 2,
) -> MetricsReport:
    """Score every pair; per-image work runs on a pool and is reduced in index order."""
    if region not in REGIONS:
        raise ConfigError([f"region must be one of {REGIONS}, got {region!r}"])
    if not pairs:
        raise ConfigError(["no image pairs to evaluate"])
    if region == "masked":
        unmasked = [p.ground_truth for p in pairs if not p.mask]
        if unmasked:
            raise ConfigError([f"--region masked needs a mask for every pair; missing for {unmasked}"])

    def score(pair: EvalPair) -> ImageMetrics:
        gt = read_rgb8(pair.ground_truth)
        pred = read_rgb8(pair.prediction)
        missing = None
        if region == "masked":
            missing = load_mask_file(pair.mask, invert=invert_masks)[0] == 0
        return score_pair(gt, pred, Path(pair.ground_truth).name, missing, cap)

    with ThreadPoolExecutor(max_workers=num_workers) as executor:
        per_image = list(executor.map(score, pairs))
    report = MetricsReport(per_image=per_image, region=region)
    logger.info(f"Evaluated {len(per_image)} image pairs", extra={"region": region, **report.aggregate()})
    return report
