"""
Dataset preparation: image discovery, the train/test split, batch manifests
and the prefetching batch loader.
"""

import dataclasses
import functools
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.model_selection import train_test_split

from swgan_inpaint.errors import ConfigError, ImageIOError
from swgan_inpaint.utils.config import DataConfig, StrokeMaskSpec
from swgan_inpaint.utils.images import load_and_normalize, load_mask_file
from swgan_inpaint.utils.masks import stroke_seed, synthesize_stroke_mask

logger = logging.getLogger(__name__)

DEFAULT_CACHE_SIZE = DataConfig.cache_size

PathLike = Union[str, Path]


@dataclass
class DatasetSplit:
    train_paths: List[str] = field(default_factory=list)
    test_paths: List[str] = field(default_factory=list)


@dataclass
class ManifestEntry:
    """One training sample: an image plus either a mask file or a mask seed."""

    image_path: str
    mask_path: Optional[str] = None
    seed: Optional[int] = None

    def to_dict(self) -> Dict[str, object]:
        out: Dict[str, object] = {"image_path": self.image_path}
        if self.mask_path is not None:
            out["mask_path"] = self.mask_path
        else:
            out["seed"] = self.seed
        return out


@dataclass
class ManifestSplit:
    train: List[ManifestEntry] = field(default_factory=list)
    test: List[ManifestEntry] = field(default_factory=list)


class DatasetPreparer:
    """Prepares image folders for training."""

    def __init__(self, image_dir: PathLike = "data/images"):
        self.image_dir = Path(image_dir)

    def find_images(self) -> List[Path]:
        """All PNG files in the image directory, sorted by name."""
        if not self.image_dir.is_dir():
            raise ImageIOError(f"image directory not found: {self.image_dir}")
        images = sorted(p for p in self.image_dir.glob("*.png") if p.is_file())
        logger.info(f"Found {len(images)} images in {self.image_dir}")
        return images

    def create_split(self, split_ratio: float = 0.9, random_state: int = 0) -> DatasetSplit:
        return split_dataset([str(p) for p in self.find_images()], split_ratio, random_state)

    def build_manifest(
        self,
        paths: Sequence[str],
        mask_dir: Optional[PathLike] = None,
        seed: int = 0,
    ) -> List[ManifestEntry]:
        """Pair images with mask files (cycled in name order) or with per-image mask seeds."""
        if mask_dir is None:
            return [ManifestEntry(image_path=p, seed=stroke_seed(seed, i)) for i, p in enumerate(paths)]
        masks = sorted(Path(mask_dir).glob("*.png"))
        if not masks:
            raise ImageIOError(f"no PNG masks found in {mask_dir}")
        return [
            ManifestEntry(image_path=p, mask_path=str(masks[i % len(masks)]))
            for i, p in enumerate(paths)
        ]


def split_dataset(paths: Sequence[str], split_ratio: float = 0.9, random_state: int = 0) -> DatasetSplit:
    """Disjoint train/test partition, deterministic in ``random_state``."""
    paths = list(paths)
    if not 0 < split_ratio <= 1:
        raise ConfigError([f"split ratio must be in (0, 1], got {split_ratio}"])
    if len(set(paths)) != len(paths):
        raise ConfigError(["dataset contains duplicate paths"])
    if split_ratio == 1 or len(paths) < 2:
        return DatasetSplit(train_paths=paths, test_paths=[])
    n_test = max(1, int(round(len(paths) * (1 - split_ratio))))
    if n_test >= len(paths):
        n_test = len(paths) - 1
    train, test = train_test_split(paths, test_size=n_test, random_state=random_state, shuffle=True)
    logger.info(
        f"Created dataset split: {len(train)} train / {len(test)} test",
        extra={"split_ratio": split_ratio},
    )
    return DatasetSplit(train_paths=list(train), test_paths=list(test))


def write_manifest(entries: Sequence[ManifestEntry], path: PathLike) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w") as f:
        json.dump([e.to_dict() for e in entries], f, indent=2)
    logger.info(f"Wrote manifest with {len(entries)} entries to {target}")
    return target


def read_manifest(path: PathLike) -> List[ManifestEntry]:
    """Parse a manifest; relative paths resolve against the manifest's directory."""
    manifest_path = Path(path)
    try:
        with open(manifest_path, "r") as f:
            raw = json.load(f)
    except FileNotFoundError as e:
        raise ImageIOError(f"manifest not found: {manifest_path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError([f"manifest {manifest_path} is not valid JSON: {e}"]) from e
    if not isinstance(raw, list):
        raise ConfigError([f"manifest {manifest_path} must be a JSON list"])

    base = manifest_path.parent
    entries, problems = [], []
    for i, item in enumerate(raw):
        if not isinstance(item, dict) or "image_path" not in item:
            problems.append(f"entry {i}: needs an 'image_path'")
            continue
        unknown = set(item) - {"image_path", "mask_path", "seed"}
        if unknown:
            problems.append(f"entry {i}: unknown keys {sorted(unknown)}")
        has_mask, has_seed = item.get("mask_path") is not None, item.get("seed") is not None
        if has_mask == has_seed:
            problems.append(f"entry {i}: give exactly one of 'mask_path' or 'seed'")
            continue
        entries.append(
            ManifestEntry(
                image_path=str(base / item["image_path"]),
                mask_path=str(base / item["mask_path"]) if has_mask else None,
                seed=int(item["seed"]) if has_seed else None,
            )
        )
    if problems:
        raise ConfigError(problems)
    return entries


def validate_manifest(entries: Sequence[ManifestEntry]) -> None:
    """Every referenced file must exist; all missing paths are reported together."""
    missing = []
    for entry in entries:
        for path in (entry.image_path, entry.mask_path):
            if path is not None and not Path(path).is_file():
                missing.append(path)
    if missing:
        raise ImageIOError(f"missing dataset files: {', '.join(missing)}")


def resolve_entries(data: DataConfig, seed: int) -> ManifestSplit:
    """Resolve a DataConfig to validated train/test manifest entries."""
    if data.manifest:
        entries = read_manifest(data.manifest)
        validate_manifest(entries)
        split = split_dataset([e.image_path for e in entries], data.split_ratio, seed)
        by_path = {e.image_path: e for e in entries}
        return ManifestSplit(
            train=[by_path[p] for p in split.train_paths],
            test=[by_path[p] for p in split.test_paths],
        )
    preparer = DatasetPreparer(data.image_dir)
    split = preparer.create_split(data.split_ratio, seed)
    if not split.train_paths:
        raise ImageIOError(f"no training images found in {data.image_dir}")
    return ManifestSplit(
        train=preparer.build_manifest(split.train_paths, data.mask_dir, seed),
        test=preparer.build_manifest(split.test_paths, data.mask_dir, seed + 1),
    )


class BatchLoader:
    """Loads (image, mask) samples for manifest entries.

    Batches are decoded on a bounded thread pool; ``map`` keeps index order,
    so batches are identical however many workers run. Decoded samples are
    kept in a least-recently-used cache of ``cache_size`` entries (0 disables it).
    """

    def __init__(
        self,
        entries: Sequence[ManifestEntry],
        image_size: int,
        mask_spec: Optional[StrokeMaskSpec] = None,
        invert_masks: bool = False,
        num_workers: int = 2,
        cache_size: int = DEFAULT_CACHE_SIZE,
    ):
        if not entries:
            raise ConfigError(["batch loader needs at least one manifest entry"])
        if cache_size < 0:
            raise ConfigError([f"batch loader cache_size must be non-negative, got {cache_size}"])
        self.entries = list(entries)
        self.image_size = image_size
        self.mask_spec = mask_spec or StrokeMaskSpec()
        self.invert_masks = invert_masks
        self.num_workers = num_workers
        self.load_sample = functools.lru_cache(maxsize=cache_size)(self._read_sample)

    def __len__(self) -> int:
        return len(self.entries)

    def cache_info(self):
        return self.load_sample.cache_info()

    def _read_sample(self, index: int) -> Tuple[np.ndarray, np.ndarray]:
        entry = self.entries[index]
        image = load_and_normalize(entry.image_path, self.image_size)
        if entry.mask_path is not None:
            mask = load_mask_file(entry.mask_path, self.image_size, self.invert_masks)
        else:
            spec = dataclasses.replace(self.mask_spec, seed=entry.seed)
            mask = synthesize_stroke_mask(spec, self.image_size)
        return image, mask

    def load_batch(self, indices: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
        with ThreadPoolExecutor(max_workers=self.num_workers) as executor:
            samples = list(executor.map(self.load_sample, (int(i) for i in indices)))
        images = np.stack([s[0] for s in samples])
        masks = np.stack([s[1] for s in samples])
        return images, masks
