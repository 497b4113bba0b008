"""
Loss terms for the Wasserstein-perceptual objective.

    l1        mean absolute difference of two feature maps
    l_sp      l1 + mean squared difference, both on phi features
    l_w       -mean(D(fake)) for the generator; -(mean(D(real)) - mean(D(fake))) for the critic
    l_wp      lambda_w * l_w + lambda_sp * l_sp
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, Tuple

from swgan_inpaint.core.tensor import Tensor, abs_, reduce_mean, square
from swgan_inpaint.errors import NonFiniteLossError, ShapeError

logger = logging.getLogger(__name__)

Extractor = Callable[[Tensor], Tensor]

LOG_KEYS = ("step", "l1_term", "perceptual_mse_term", "l_sp", "l_w_generator", "l_w_critic", "l_wp")


@dataclass
class LossReport:
    l1_term: float
    perceptual_mse_term: float
    l_sp: float
    l_w_generator: float
    l_w_critic: float
    l_wp: float

    def to_record(self, step: int) -> Dict[str, Any]:
        return {"step": step, **asdict(self)}

    def check_finite(self, step: int = -1) -> None:
        for term, value in asdict(self).items():
            if not math.isfinite(value):
                raise NonFiniteLossError(term, value, step)


def _same_shape(x: Tensor, y: Tensor, op: str) -> None:
    if x.shape != y.shape:
        raise ShapeError(f"{op}: shapes {x.shape} and {y.shape} differ")
    if x.size == 0:
        raise ShapeError(f"{op}: empty inputs of shape {x.shape}")


def l1_feature_loss(x: Tensor, y: Tensor) -> Tensor:
    _same_shape(x, y, "l1_feature_loss")
    return reduce_mean(abs_(x - y))


def feature_mse(x: Tensor, y: Tensor) -> Tensor:
    _same_shape(x, y, "feature_mse")
    return reduce_mean(square(x - y))


def perceptual_loss(
    masked_input: Tensor, reconstruction: Tensor, extractor: Extractor
) -> Tuple[Tensor, Dict[str, Tensor]]:
    """l_sp between phi(target) and phi(I_R); returns the loss and its two terms.

    The same extractor instance scores both images.
    """
    target_features = extractor(masked_input)
    reconstruction_features = extractor(reconstruction)
    l1 = l1_feature_loss(target_features, reconstruction_features)
    mse = feature_mse(target_features, reconstruction_features)
    return l1 + mse, {"l1_term": l1, "perceptual_mse_term": mse}


def _nonempty(scores: Tensor, label: str) -> None:
    if scores.size == 0:
        raise ShapeError(f"{label} scores are empty")


def wasserstein_critic_loss(real_scores: Tensor, fake_scores: Tensor) -> Tensor:
    """Negated score gap; minimizing it maximizes E[D(real)] - E[D(fake)]."""
    _nonempty(real_scores, "real")
    _nonempty(fake_scores, "fake")
    return -(reduce_mean(real_scores) - reduce_mean(fake_scores))


def wasserstein_generator_loss(fake_scores: Tensor) -> Tensor:
    _nonempty(fake_scores, "fake")
    return -reduce_mean(fake_scores)


def combined_loss(
    l_w: Tensor, l_sp: Tensor, lambda_w: float = 1.0, lambda_sp: float = 1.0
) -> Tensor:
    for term, value in (("l_w_generator", l_w), ("l_sp", l_sp)):
        if not math.isfinite(value.item()):
            raise NonFiniteLossError(term, value.item())
    return l_w * lambda_w + l_sp * lambda_sp
