"""
Alternating S-WGAN training: critic updates with weight clipping, then one
generator update on the Wasserstein-perceptual objective.

A run is a pure function of (config, manifest, seed): batch order depends on
(seed, epoch) and dropout masks on (seed, step, pass), so a run resumed from
a checkpoint replays the uninterrupted trajectory bit for bit.
"""

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from swgan_inpaint.core.tensor import Tensor, backward, default_dtype, no_grad
from swgan_inpaint.errors import ConfigError, NonFiniteLossError, ShapeError
from swgan_inpaint.ml.losses import (
    LOG_KEYS,
    LossReport,
    combined_loss,
    perceptual_loss,
    wasserstein_critic_loss,
    wasserstein_generator_loss,
)
from swgan_inpaint.ml.optim import AdamState, adam_step
from swgan_inpaint.nn.checkpoint import CHECKPOINT_MAGIC, read_container, write_container
from swgan_inpaint.nn.critic import Critic, clip_critic_weights
from swgan_inpaint.nn.features import FeatureExtractor
from swgan_inpaint.nn.generator import Generator, build_generator
from swgan_inpaint.utils.config import RunConfig
from swgan_inpaint.utils.data_preparer import BatchLoader
from swgan_inpaint.utils.masks import apply_mask, composite_reconstruction

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

LOG_NAME = "train_log.jsonl"
GENERATOR_PREFIX = "generator/"
CRITIC_PREFIX = "critic/"
OPTIM_PREFIX = "optim/"


def derive_seed(*words: int) -> int:
    """Independent stream per (seed, purpose, ...): 1 model init, 2 batch order, 3 dropout."""
    return int(np.random.SeedSequence(list(words)).generate_state(1)[0])


@dataclass
class CheckpointState:
    step: int
    metadata: Dict[str, Any]
    arrays: Dict[str, np.ndarray]

    @property
    def config(self) -> RunConfig:
        return RunConfig.from_dict(self.metadata["config"])


def save_checkpoint(
    path: PathLike,
    generator: Generator,
    critic: Critic,
    g_state: AdamState,
    d_state: AdamState,
    step: int,
    config: RunConfig,
) -> Path:
    """Parameters first, then the optimizer section; the container appends the checksum."""
    arrays: Dict[str, np.ndarray] = {}
    arrays.update(generator.parameters(GENERATOR_PREFIX).snapshot())
    arrays.update(critic.parameters(CRITIC_PREFIX).snapshot())
    arrays.update(g_state.arrays(f"{OPTIM_PREFIX}{GENERATOR_PREFIX}"))
    arrays.update(d_state.arrays(f"{OPTIM_PREFIX}{CRITIC_PREFIX}"))
    metadata = {
        "step": step,
        "optimizers": {"generator": g_state.metadata(), "critic": d_state.metadata()},
        "config": config.to_dict(),
    }
    write_container(path, CHECKPOINT_MAGIC, arrays, metadata)
    logger.info(f"Saved checkpoint {path}", extra={"step": step, "arrays": len(arrays)})
    return Path(path)


RESUME_SECTIONS = ("generator", "critic", "features")


def resume_problems(stored: RunConfig, current: RunConfig) -> List[str]:
    """Differences that make a checkpoint unusable for the current run."""
    problems = []
    stored_doc, current_doc = stored.to_dict(), current.to_dict()
    for section in RESUME_SECTIONS:
        for key, value in current_doc[section].items():
            if stored_doc[section].get(key) != value:
                problems.append(
                    f"checkpoint has {section}.{key} = {stored_doc[section].get(key)!r}, run has {value!r}"
                )
    if stored.train.seed != current.train.seed:
        problems.append(f"checkpoint has train.seed = {stored.train.seed}, run has {current.train.seed}")
    return problems


def load_checkpoint(path: PathLike) -> CheckpointState:
    """Read and verify a checkpoint; models are untouched until ``Trainer.restore``."""
    metadata, arrays = read_container(path, CHECKPOINT_MAGIC)
    for key in ("step", "optimizers", "config"):
        if key not in metadata:
            raise ConfigError([f"checkpoint {path} has no '{key}' metadata"])
    return CheckpointState(step=int(metadata["step"]), metadata=metadata, arrays=dict(arrays))


class Trainer:
    def __init__(self, config: RunConfig, loader: Optional[BatchLoader] = None):
        self.config = config
        self.loader = loader
        self.step = 0
        train = config.train
        with self.precision():
            self.generator = build_generator(config.generator, seed=derive_seed(train.seed, 1, 1))
            self.critic = Critic(
                config.critic, config.generator.input_size, seed=derive_seed(train.seed, 1, 2)
            )
            self.extractor = FeatureExtractor(config.features, config.generator.in_channels)
        self.g_params = self.generator.parameters()
        self.d_params = self.critic.parameters()
        constants = {"beta1": train.beta1, "beta2": train.beta2, "eps": train.eps}
        self.g_state = AdamState.for_params(self.g_params, train.lr_generator, **constants)
        self.d_state = AdamState.for_params(self.d_params, train.lr_critic, **constants)
        logger.info(
            "Trainer ready",
            extra={
                "perceptual_target": config.loss.perceptual_target,
                "lr_generator": train.lr_generator,
                "lr_critic": train.lr_critic,
                "dtype": train.dtype,
            },
        )

    def precision(self):
        return default_dtype(self.config.train.dtype)

    # -- one optimisation step --------------------------------------------

    def critic_step(self, images: Tensor, masks: Tensor, masked: Tensor, dropout_seed: int) -> float:
        with no_grad():
            prediction = self.generator(masked, mode="train", seed=dropout_seed)
            fake = composite_reconstruction(images, masks, prediction)
        loss = wasserstein_critic_loss(self.critic(images), self.critic(fake))
        value = loss.item()
        if not np.isfinite(value):
            raise NonFiniteLossError("l_w_critic", value, self.step)
        self.d_params.zero_grad()
        backward(loss)
        adam_step(self.d_params, self.d_state)
        clip_critic_weights(self.d_params, self.config.train.clip_c)
        return value

    def generator_step(self, images: Tensor, masks: Tensor, masked: Tensor, dropout_seed: int):
        loss_cfg = self.config.loss
        self.g_params.zero_grad()
        with self.critic.frozen():
            prediction = self.generator(masked, mode="train", seed=dropout_seed)
            reconstruction = composite_reconstruction(images, masks, prediction)
            l_w = wasserstein_generator_loss(self.critic(reconstruction))
            target = masked if loss_cfg.perceptual_target == "masked_input" else images
            l_sp, terms = perceptual_loss(target, reconstruction, self.extractor)
            for term, tensor in (("l_w_generator", l_w), ("l_sp", l_sp), *terms.items()):
                if not np.isfinite(tensor.item()):
                    raise NonFiniteLossError(term, tensor.item(), self.step)
            l_wp = combined_loss(l_w, l_sp, loss_cfg.lambda_w, loss_cfg.lambda_sp)
            backward(l_wp)
        adam_step(self.g_params, self.g_state)
        return l_w, l_sp, terms, l_wp

    def train_step(self, images: np.ndarray, masks: np.ndarray) -> LossReport:
        """Critic updates, then one generator update; returns the step's LossReport."""
        if images.ndim != 4 or masks.ndim != 4 or images.shape[0] != masks.shape[0]:
            raise ShapeError(f"batch shapes disagree: images {images.shape}, masks {masks.shape}")
        train = self.config.train
        with self.precision():
            image_t = Tensor(images)
            mask_t = Tensor(masks)
            masked = apply_mask(image_t, mask_t)
            l_w_critic = float("nan")
            for k in range(train.critic_steps_per_gen_step):
                l_w_critic = self.critic_step(image_t, mask_t, masked, derive_seed(train.seed, 3, self.step, k))
            seed = derive_seed(train.seed, 3, self.step, train.critic_steps_per_gen_step)
            l_w, l_sp, terms, l_wp = self.generator_step(image_t, mask_t, masked, seed)

        report = LossReport(
            l1_term=terms["l1_term"].item(),
            perceptual_mse_term=terms["perceptual_mse_term"].item(),
            l_sp=l_sp.item(),
            l_w_generator=l_w.item(),
            l_w_critic=l_w_critic,
            l_wp=l_wp.item(),
        )
        report.check_finite(self.step)
        self.step += 1
        return report

    # -- checkpoints ------------------------------------------------------

    def save_checkpoint(self, path: PathLike) -> Path:
        return save_checkpoint(
            path, self.generator, self.critic, self.g_state, self.d_state, self.step, self.config
        )

    def restore(self, state: CheckpointState) -> None:
        """Apply a verified checkpoint; every shape is checked before anything changes."""
        problems = resume_problems(state.config, self.config)
        if problems:
            raise ConfigError(problems)
        optimizers = state.metadata["optimizers"]
        g_state = AdamState.restore(
            optimizers["generator"], state.arrays, f"{OPTIM_PREFIX}{GENERATOR_PREFIX}", self.g_params
        )
        d_state = AdamState.restore(
            optimizers["critic"], state.arrays, f"{OPTIM_PREFIX}{CRITIC_PREFIX}", self.d_params
        )
        # validate both models before loading either
        for model, prefix in ((self.generator, GENERATOR_PREFIX), (self.critic, CRITIC_PREFIX)):
            for name, p in model.parameters(prefix).items():
                if name not in state.arrays or state.arrays[name].shape != p.shape:
                    raise ShapeError(f"checkpoint parameter '{name}' is missing or has the wrong shape")
        self.generator.load_arrays(state.arrays, GENERATOR_PREFIX)
        self.critic.load_arrays(state.arrays, CRITIC_PREFIX)
        self.g_state, self.d_state = g_state, d_state
        self.step = state.step
        logger.info(f"Resumed from step {self.step}")

    def load_checkpoint(self, path: PathLike) -> None:
        self.restore(load_checkpoint(path))

    # -- full run ---------------------------------------------------------

    def epoch_order(self, epoch: int) -> np.ndarray:
        return np.random.default_rng(derive_seed(self.config.train.seed, 2, epoch)).permutation(
            len(self.loader)
        )

    def total_steps(self) -> int:
        train = self.config.train
        per_epoch = -(-len(self.loader) // train.batch_size)
        total = per_epoch * train.epochs
        return min(total, train.max_steps) if train.max_steps else total

    def run(self, output_dir: Optional[PathLike] = None) -> List[LossReport]:
        """Train to ``total_steps`` from the current step, logging and checkpointing."""
        if self.loader is None:
            raise ConfigError(["trainer has no data loader"])
        train = self.config.train
        out_dir = Path(output_dir or self.config.output_dir)
        ckpt_dir = out_dir / "checkpoints"
        ckpt_dir.mkdir(parents=True, exist_ok=True)
        log_path = out_dir / LOG_NAME
        total = self.total_steps()
        reports: List[LossReport] = []
        started = time.perf_counter()

        logger.info(f"Training from step {self.step} to {total}", extra={"output_dir": str(out_dir)})
        # a resumed run extends its log; a fresh run starts a new one
        with open(log_path, "a" if self.step else "w") as log:
            global_step = 0
            for epoch in range(train.epochs):
                order = self.epoch_order(epoch)
                for start in range(0, len(order), train.batch_size):
                    if global_step >= total:
                        break
                    if global_step < self.step:
                        global_step += 1
                        continue
                    images, masks = self.loader.load_batch(order[start:start + train.batch_size])
                    report = self.train_step(images, masks)
                    global_step += 1
                    record = report.to_record(self.step)
                    record["wall_clock_s"] = round(time.perf_counter() - started, 6)
                    log.write(json.dumps(record) + "\n")
                    log.flush()
                    reports.append(report)
                    if self.step % train.checkpoint_every == 0:
                        self.save_checkpoint(ckpt_dir / f"step_{self.step:06d}.swgn")
                    if self.step % 10 == 0:
                        logger.info(
                            f"step {self.step}/{total}",
                            extra={"l_wp": report.l_wp, "l_sp": report.l_sp, "l_w_critic": report.l_w_critic},
                        )
        self.save_checkpoint(ckpt_dir / "final.swgn")
        return reports


def summarize_training_log(path: PathLike) -> pd.DataFrame:
    """First, last and minimum value of every loss term in a JSON-lines training log."""
    log = pd.read_json(path, lines=True)
    missing = [k for k in LOG_KEYS if k not in log.columns]
    if missing:
        raise ConfigError([f"training log {path} lacks columns {missing}"])
    log = log.sort_values("step")
    terms = [k for k in LOG_KEYS if k != "step"]
    return pd.DataFrame(
        {
            "first": log[terms].iloc[0],
            "last": log[terms].iloc[-1],
            "min": log[terms].min(),
        }
    )


def train_models(config: RunConfig, loader: BatchLoader, resume: Optional[PathLike] = None) -> Tuple[Trainer, List[LossReport]]:
    trainer = Trainer(config, loader)
    if resume:
        trainer.load_checkpoint(resume)
    config.save_resolved(config.output_dir)
    return trainer, trainer.run()
