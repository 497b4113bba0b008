"""
Configuration management with validation and defaults.

Every section is a dataclass that validates itself on construction and
reports all of its problems at once. ``RunConfig`` aggregates the sections,
rejects unknown keys, and round-trips through the JSON run document.
"""

import copy
import dataclasses
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

from swgan_inpaint.errors import ConfigError

logger = logging.getLogger(__name__)

PERCEPTUAL_TARGETS = ("masked_input", "ground_truth")
FEATURE_SOURCES = ("builtin", "weights-file")
DTYPES = ("float32", "float64")

PAPER_CRITIC_LR = 1e-12


def _range_problems(name: str, value: Any, low: float, high: float) -> List[str]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        return [f"{name} must be a [min, max] pair, got {value!r}"]
    if not (low <= value[0] <= value[1] <= high):
        return [f"{name} must satisfy {low} <= min <= max <= {high}, got {list(value)}"]
    return []


def env_seed() -> Optional[int]:
    """Non-negative integer from ``SWGAN_SEED``, or None when unset."""
    load_dotenv()
    seed = os.getenv("SWGAN_SEED")
    if seed is None or seed == "":
        return None
    try:
        value = int(seed)
    except ValueError:
        raise ConfigError([f"SWGAN_SEED must be an integer, got {seed!r}"]) from None
    if value < 0:
        raise ConfigError([f"SWGAN_SEED must be non-negative, got {value}"])
    return value


class _Section:
    """Shared validation hook: subclasses implement ``problems``."""

    def __post_init__(self):
        self._resolve()
        problems = self.problems()
        if problems:
            raise ConfigError(problems)

    def _resolve(self) -> None:
        pass

    def problems(self) -> List[str]:
        raise NotImplementedError


@dataclass
class GeneratorConfig(_Section):
    """Encoder-decoder topology.

    Encoder layers are numbered 1..depth for the pooled blocks and depth+1
    for the final (bottleneck) layer; ``dropout_blocks`` uses that numbering.
    """

    input_size: int = 64
    in_channels: int = 3
    depth: int = 4
    channels: List[int] = field(default_factory=lambda: [32, 64, 128, 256])
    kernel_size: int = 5
    dilation_rate: int = 2
    leaky_slope: float = 0.2
    dropout_rate: float = 0.25
    dropout_blocks: Optional[List[int]] = None
    use_skips: bool = True
    init_std: float = 0.02

    def _resolve(self) -> None:
        if self.dropout_blocks is None and isinstance(self.depth, int) and self.depth >= 1:
            self.dropout_blocks = sorted({b for b in (4, self.depth + 1) if b <= self.depth + 1})
        self.channels = list(self.channels)

    def problems(self) -> List[str]:
        problems = []
        if self.depth < 1:
            problems.append(f"generator.depth must be >= 1, got {self.depth}")
        if self.input_size < 2 or self.input_size % 2:
            problems.append(f"generator.input_size must be an even positive integer, got {self.input_size}")
        elif self.depth >= 1 and self.input_size % (2 ** self.depth):
            problems.append(
                f"generator.input_size {self.input_size} is not divisible by 2^depth = {2 ** self.depth}"
            )
        if len(self.channels) != self.depth:
            problems.append(
                f"generator.channels has {len(self.channels)} entries, depth is {self.depth}"
            )
        if any(c < 1 for c in self.channels):
            problems.append(f"generator.channels must be positive, got {self.channels}")
        if self.in_channels < 1:
            problems.append(f"generator.in_channels must be positive, got {self.in_channels}")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            problems.append(f"generator.kernel_size must be a positive odd integer, got {self.kernel_size}")
        if self.dilation_rate < 1:
            problems.append(f"generator.dilation_rate must be >= 1, got {self.dilation_rate}")
        if not 0.0 <= self.dropout_rate < 1.0:
            problems.append(f"generator.dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.leaky_slope < 0:
            problems.append(f"generator.leaky_slope must be non-negative, got {self.leaky_slope}")
        if self.init_std <= 0:
            problems.append(f"generator.init_std must be positive, got {self.init_std}")
        for block in self.dropout_blocks or []:
            if not 1 <= block <= self.depth + 1:
                problems.append(
                    f"generator.dropout_blocks entry {block} outside 1..{self.depth + 1}"
                )
        return problems


@dataclass
class CriticConfig(_Section):
    in_channels: int = 3
    depth: int = 4
    channels: List[int] = field(default_factory=lambda: [16, 32, 64, 128])
    kernel_size: int = 5
    stride: int = 2
    leaky_slope: float = 0.2
    init_std: float = 0.02

    def _resolve(self) -> None:
        self.channels = list(self.channels)

    def problems(self) -> List[str]:
        problems = []
        if self.depth < 1:
            problems.append(f"critic.depth must be >= 1, got {self.depth}")
        if len(self.channels) != self.depth:
            problems.append(f"critic.channels has {len(self.channels)} entries, depth is {self.depth}")
        if any(c < 1 for c in self.channels):
            problems.append(f"critic.channels must be positive, got {self.channels}")
        if self.kernel_size < 1:
            problems.append(f"critic.kernel_size must be positive, got {self.kernel_size}")
        if self.stride < 1:
            problems.append(f"critic.stride must be positive, got {self.stride}")
        if self.init_std <= 0:
            problems.append(f"critic.init_std must be positive, got {self.init_std}")
        return problems


@dataclass
class FeatureExtractorConfig(_Section):
    source: str = "builtin"
    weights_path: Optional[str] = None
    tap_point: str = "block3_conv3"
    downsample_factor: int = 4
    feature_channels: int = 64
    seed: int = 1234

    def problems(self) -> List[str]:
        problems = []
        if self.source not in FEATURE_SOURCES:
            problems.append(f"features.source must be one of {FEATURE_SOURCES}, got {self.source!r}")
        if self.source == "weights-file" and not self.weights_path:
            problems.append("features.weights_path is required when source is 'weights-file'")
        if self.tap_point != "block3_conv3":
            problems.append(f"features.tap_point only supports 'block3_conv3', got {self.tap_point!r}")
        if self.downsample_factor != 4:
            problems.append(f"features.downsample_factor is fixed at 4, got {self.downsample_factor}")
        if self.feature_channels < 4 or self.feature_channels % 4:
            problems.append(
                f"features.feature_channels must be a positive multiple of 4, got {self.feature_channels}"
            )
        return problems


@dataclass
class LossConfig(_Section):
    lambda_w: float = 1.0
    lambda_sp: float = 1.0
    perceptual_target: str = "masked_input"

    def problems(self) -> List[str]:
        problems = []
        if self.perceptual_target not in PERCEPTUAL_TARGETS:
            problems.append(
                f"loss.perceptual_target must be one of {PERCEPTUAL_TARGETS}, got {self.perceptual_target!r}"
            )
        if self.lambda_w < 0 or self.lambda_sp < 0:
            problems.append(f"loss weights must be non-negative, got {self.lambda_w}, {self.lambda_sp}")
        return problems


@dataclass
class TrainConfig(_Section):
    lr_generator: float = 1e-4
    lr_critic: float = 1e-4
    batch_size: int = 4
    critic_steps_per_gen_step: int = 1
    clip_c: float = 0.01
    epochs: int = 1
    max_steps: Optional[int] = None
    seed: int = 0
    checkpoint_every: int = 100
    dtype: str = "float32"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def problems(self) -> List[str]:
        problems = []
        if self.lr_generator <= 0 or self.lr_critic <= 0:
            problems.append(
                f"train learning rates must be positive, got {self.lr_generator}, {self.lr_critic}"
            )
        if self.batch_size < 1:
            problems.append(f"train.batch_size must be >= 1, got {self.batch_size}")
        if self.critic_steps_per_gen_step < 1:
            problems.append(
                f"train.critic_steps_per_gen_step must be >= 1, got {self.critic_steps_per_gen_step}"
            )
        if self.clip_c <= 0:
            problems.append(f"train.clip_c must be positive, got {self.clip_c}")
        if self.epochs < 1:
            problems.append(f"train.epochs must be >= 1, got {self.epochs}")
        if self.max_steps is not None and self.max_steps < 1:
            problems.append(f"train.max_steps must be >= 1 when set, got {self.max_steps}")
        if self.seed < 0:
            problems.append(f"train.seed must be non-negative, got {self.seed}")
        if self.checkpoint_every < 1:
            problems.append(f"train.checkpoint_every must be >= 1, got {self.checkpoint_every}")
        if self.dtype not in DTYPES:
            problems.append(f"train.dtype must be one of {DTYPES}, got {self.dtype!r}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1) or self.eps <= 0:
            problems.append("train Adam constants need 0 <= beta < 1 and eps > 0")
        return problems


@dataclass
class StrokeMaskSpec(_Section):
    """Random polyline strokes standing in for a hand-drawn mask dataset."""

    num_strokes: List[int] = field(default_factory=lambda: [1, 6])
    vertices_per_stroke: List[int] = field(default_factory=lambda: [2, 6])
    thickness: List[int] = field(default_factory=lambda: [3, 9])
    seed: int = 0
    target_coverage: Optional[List[float]] = None
    max_step_fraction: float = 0.25
    max_attempts: int = 50

    def problems(self) -> List[str]:
        problems = []
        problems += _range_problems("masks.num_strokes", self.num_strokes, 0, 10_000)
        problems += _range_problems("masks.vertices_per_stroke", self.vertices_per_stroke, 2, 10_000)
        problems += _range_problems("masks.thickness", self.thickness, 1, 10_000)
        if self.target_coverage is not None:
            problems += _range_problems("masks.target_coverage", self.target_coverage, 0.0, 1.0)
        if not 0 < self.max_step_fraction <= 1:
            problems.append(f"masks.max_step_fraction must be in (0, 1], got {self.max_step_fraction}")
        if self.max_attempts < 1:
            problems.append(f"masks.max_attempts must be >= 1, got {self.max_attempts}")
        return problems

    def coverage_bounds(self):
        """Accepted coverage range; a spec that draws no strokes can only give 0."""
        if self.target_coverage is not None:
            return tuple(self.target_coverage)
        if self.num_strokes[1] == 0:
            return (0.0, 0.0)
        return (0.01, 0.6)


@dataclass
class DataConfig(_Section):
    image_dir: Optional[str] = None
    manifest: Optional[str] = None
    mask_dir: Optional[str] = None
    invert_masks: bool = False
    split_ratio: float = 0.9
    num_workers: int = 2
    cache_size: int = 64

    def problems(self) -> List[str]:
        problems = []
        if not self.image_dir and not self.manifest:
            problems.append("data needs either image_dir or manifest")
        if not 0 < self.split_ratio <= 1:
            problems.append(f"data.split_ratio must be in (0, 1], got {self.split_ratio}")
        if self.num_workers < 1:
            problems.append(f"data.num_workers must be >= 1, got {self.num_workers}")
        if self.cache_size < 0:
            problems.append(f"data.cache_size must be non-negative, got {self.cache_size}")
        return problems


SECTIONS = {
    "generator": GeneratorConfig,
    "critic": CriticConfig,
    "features": FeatureExtractorConfig,
    "loss": LossConfig,
    "train": TrainConfig,
    "masks": StrokeMaskSpec,
    "data": DataConfig,
}

# Desk-scale presets score the perceptual loss against the ground truth; the
# masked input is zero over the whole missing region.
PRESETS: Dict[str, Dict[str, Dict[str, Any]]] = {
    "desk": {"loss": {"perceptual_target": "ground_truth"}},
    "paper": {
        "generator": {"input_size": 512},
        "train": {"batch_size": 5, "lr_generator": 1e-4, "lr_critic": PAPER_CRITIC_LR},
        "features": {"feature_channels": 256},
        "loss": {"perceptual_target": "masked_input"},
    },
    "baseline": {
        "generator": {"dilation_rate": 1, "use_skips": False},
        "loss": {"perceptual_target": "ground_truth"},
    },
}


# Values used for a section the run document leaves out.
SECTION_DEFAULTS: Dict[str, Dict[str, Any]] = {"data": {"image_dir": "data/images"}}


def _cross_section_problems(sections: Dict[str, Any]) -> List[str]:
    generator, features = sections["generator"], sections["features"]
    if generator.input_size % features.downsample_factor:
        return [
            f"generator.input_size {generator.input_size} is not divisible by the feature "
            f"extractor's downsample factor {features.downsample_factor}"
        ]
    return []


@dataclass
class RunConfig:
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    critic: CriticConfig = field(default_factory=CriticConfig)
    features: FeatureExtractorConfig = field(default_factory=FeatureExtractorConfig)
    loss: LossConfig = field(default_factory=lambda: LossConfig(**PRESETS["desk"]["loss"]))
    train: TrainConfig = field(default_factory=TrainConfig)
    masks: StrokeMaskSpec = field(default_factory=StrokeMaskSpec)
    data: DataConfig = field(default_factory=lambda: DataConfig(**SECTION_DEFAULTS["data"]))
    output_dir: str = "runs/default"
    preset: str = "desk"

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "RunConfig":
        """Build from a JSON document, listing every problem before failing."""
        if not isinstance(raw, dict):
            raise ConfigError([f"run config must be a JSON object, got {type(raw).__name__}"])
        problems: List[str] = []
        allowed = set(SECTIONS) | {"output_dir", "preset"}
        for key in sorted(set(raw) - allowed):
            problems.append(f"unknown top-level key '{key}'")

        preset = raw.get("preset", "desk")
        if preset not in PRESETS:
            problems.append(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
            preset = "desk"

        sections: Dict[str, Any] = {}
        for name, section_cls in SECTIONS.items():
            given = raw.get(name)
            values = copy.deepcopy(PRESETS[preset].get(name, {}))
            if given is None:
                given = SECTION_DEFAULTS.get(name, {})
            if not isinstance(given, dict):
                problems.append(f"section '{name}' must be an object")
                continue
            known = {f.name for f in dataclasses.fields(section_cls)}
            for key in sorted(set(given) - known):
                problems.append(f"unknown key '{name}.{key}'")
            values.update({k: v for k, v in given.items() if k in known})
            try:
                sections[name] = section_cls(**values)
            except ConfigError as e:
                problems.extend(e.problems)
            except TypeError as e:
                problems.append(f"section '{name}': {e}")

        if not problems:
            problems.extend(_cross_section_problems(sections))
        if problems:
            raise ConfigError(problems)
        return cls(output_dir=str(raw.get("output_dir", "runs/default")), preset=preset, **sections)

    @classmethod
    def from_file(cls, path: str, preset: Optional[str] = None) -> "RunConfig":
        """Load a JSON run document; ``preset`` replaces the document's own preset."""
        config_path = Path(path)
        if not config_path.exists():
            raise ConfigError([f"config file {config_path} not found"])
        try:
            with open(config_path, "r") as f:
                raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError([f"config file {config_path} is not valid JSON: {e}"]) from e
        if preset is not None and isinstance(raw, dict):
            raw["preset"] = preset
        config = cls.from_dict(raw)
        config.apply_env_overrides()
        logger.info(f"Loaded run config from {config_path}", extra={"preset": config.preset})
        return config

    def apply_env_overrides(self) -> None:
        """``SWGAN_SEED`` (environment or .env) replaces the configured seed."""
        value = env_seed()
        if value is None:
            return
        self.train.seed = value
        logger.info(f"Seed overridden from SWGAN_SEED: {self.train.seed}")

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def save_resolved(self, directory: Optional[str] = None) -> Path:
        out_dir = Path(directory or self.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "resolved_config.json"
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
        return path


@dataclass
class LogSettings:
    log_level: str = "INFO"
    log_file: Optional[str] = None

    def __post_init__(self):
        if self.log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ConfigError([f"LOG_LEVEL must be a standard logging level, got {self.log_level!r}"])
        self.log_level = self.log_level.upper()

    @classmethod
    def from_env(cls) -> "LogSettings":
        load_dotenv()
        return cls(
            log_level=os.getenv("LOG_LEVEL", "INFO"),
            log_file=os.getenv("LOG_FILE") or None,
        )
