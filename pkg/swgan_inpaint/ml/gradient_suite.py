"""
Finite-difference suite over every differentiable operation and the full
Wasserstein-perceptual objective.

Test inputs keep away from kinks (|x| >= 0.1 for abs and leaky ReLU,
distinct values inside every pooling window) so central differences with
step 1e-5 never straddle a non-differentiable point.
"""

import logging
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from swgan_inpaint.core import tensor as T
from swgan_inpaint.core.gradcheck import GradCheckResult, check_gradients
from swgan_inpaint.core.tensor import Tensor
from swgan_inpaint.errors import ConfigError
from swgan_inpaint.ml.losses import (
    combined_loss,
    l1_feature_loss,
    perceptual_loss,
    wasserstein_critic_loss,
    wasserstein_generator_loss,
)
from swgan_inpaint.nn.functional import conv2d, dropout, max_pool2d, upsample_nn
from swgan_inpaint.utils.masks import apply_mask, composite_reconstruction

logger = logging.getLogger(__name__)

Case = Tuple[Callable[..., Tensor], List[np.ndarray]]
CaseBuilder = Callable[[np.random.Generator], Case]


def away_from_zero(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    return rng.uniform(0.1, 1.0, size=shape) * rng.choice([-1.0, 1.0], size=shape)


def distinct_values(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    return (rng.permutation(int(np.prod(shape))) * 0.1).reshape(shape)


class StubExtractor:
    """Two smooth 3x3 convolutions with fixed weights, standing in for phi."""

    def __init__(self, in_channels: int = 3, width: int = 4, seed: int = 7):
        rng = np.random.default_rng(seed)
        self.w1 = rng.normal(0, 0.3, size=(width, in_channels, 3, 3))
        self.w2 = rng.normal(0, 0.3, size=(width, width, 3, 3))

    def __call__(self, image: Tensor) -> Tensor:
        hidden = T.tanh(conv2d(image, Tensor(self.w1), padding=1))
        return conv2d(hidden, Tensor(self.w2), padding=1)


def _stub_critic_scores(image: Tensor, weight: np.ndarray) -> Tensor:
    return T.reduce_mean(conv2d(image, Tensor(weight), stride=2, padding=1), axes=(1, 2, 3))


def _composite_objective(rng: np.random.Generator) -> Case:
    mask = np.ones((1, 1, 8, 8))
    mask[..., 2:6, 3:7] = 0.0
    critic_w = rng.normal(0, 0.3, size=(2, 3, 3, 3))
    extractor = StubExtractor()

    def objective(image: Tensor, weight: Tensor) -> Tensor:
        masks = Tensor(mask)
        masked = apply_mask(image, masks)
        prediction = T.tanh(conv2d(masked, weight, padding=2, dilation=2))
        reconstruction = composite_reconstruction(image, masks, prediction)
        l_sp, _ = perceptual_loss(masked, reconstruction, extractor)
        l_w = wasserstein_generator_loss(_stub_critic_scores(reconstruction, critic_w))
        return combined_loss(l_w, l_sp)

    return objective, [rng.uniform(-1, 1, size=(1, 3, 8, 8)), rng.normal(0, 0.3, size=(3, 3, 3, 3))]


CASES: Dict[str, CaseBuilder] = {
    "add": lambda rng: (T.add, [rng.normal(size=(10, 12)), rng.normal(size=(1, 12))]),
    "sub": lambda rng: (T.sub, [rng.normal(size=(10, 12)), rng.normal(size=(10, 1))]),
    "mul": lambda rng: (T.mul, [rng.normal(size=(4, 5, 6)), rng.normal(size=(6,))]),
    "div": lambda rng: (T.div, [rng.normal(size=(4, 5, 6)), rng.uniform(0.5, 1.5, size=(6,))]),
    "matmul": lambda rng: (T.matmul, [rng.normal(size=(8, 10)), rng.normal(size=(10, 6))]),
    "reduce_sum": lambda rng: (lambda a: T.reduce_sum(a, axes=(0, 2)), [rng.normal(size=(4, 5, 6))]),
    "reduce_mean": lambda rng: (lambda a: T.reduce_mean(a, axes=1), [rng.normal(size=(4, 5, 6))]),
    "leaky_relu": lambda rng: (lambda a: T.leaky_relu(a, 0.2), [away_from_zero(rng, (4, 5, 6))]),
    "tanh": lambda rng: (T.tanh, [rng.normal(size=(4, 5, 6))]),
    "abs": lambda rng: (T.abs_, [away_from_zero(rng, (4, 5, 6))]),
    "square": lambda rng: (T.square, [rng.normal(size=(4, 5, 6))]),
    "conv2d_dilated": lambda rng: (
        lambda x, w, b: conv2d(x, w, b, stride=1, padding=2, dilation=2),
        [rng.normal(size=(2, 3, 9, 9)), rng.normal(size=(4, 3, 3, 3)), rng.normal(size=(4,))],
    ),
    "conv2d_strided": lambda rng: (
        lambda x, w, b: conv2d(x, w, b, stride=2, padding=2),
        [rng.normal(size=(2, 2, 11, 11)), rng.normal(size=(3, 2, 5, 5)), rng.normal(size=(3,))],
    ),
    "max_pool2d": lambda rng: (lambda x: max_pool2d(x, 2), [distinct_values(rng, (2, 2, 6, 6))]),
    "upsample_nn": lambda rng: (lambda x: upsample_nn(x, 2), [rng.normal(size=(2, 3, 5, 5))]),
    "dropout": lambda rng: (
        lambda x: dropout(x, 0.25, training=True, seed=3),
        [rng.normal(size=(2, 3, 5, 5))],
    ),
    "linear": lambda rng: (
        lambda x, w, b: T.matmul(T.reshape(x, (x.shape[0], -1)), w) + b,
        [rng.normal(size=(2, 3, 4, 4)), rng.normal(size=(48, 5)), rng.normal(size=(1, 5))],
    ),
    "l1_feature_loss": lambda rng: (
        l1_feature_loss,
        (lambda x: [x, x + away_from_zero(rng, x.shape)])(rng.normal(size=(4, 5, 6))),
    ),
    "perceptual_loss": lambda rng: (
        lambda a, b: perceptual_loss(a, b, StubExtractor())[0],
        [rng.uniform(-1, 1, size=(1, 3, 8, 8)), rng.uniform(-1, 1, size=(1, 3, 8, 8))],
    ),
    "wasserstein_critic_loss": lambda rng: (
        wasserstein_critic_loss,
        [rng.normal(size=(60,)), rng.normal(size=(60,))],
    ),
    "wasserstein_generator_loss": lambda rng: (wasserstein_generator_loss, [rng.normal(size=(120,))]),
    "combined_loss": _composite_objective,
}


def resolve_ops(ops: Optional[Iterable[str]]) -> List[str]:
    """``None`` or ``["all"]`` selects every op; unknown names are rejected with the list."""
    names = list(ops or ["all"])
    if names == ["all"]:
        return list(CASES)
    unknown = [n for n in names if n not in CASES]
    if unknown:
        raise ConfigError([f"unknown op {n!r}" for n in unknown] + [f"available ops: {', '.join(CASES)}"])
    return names


def run_gradient_suite(
    ops: Optional[Sequence[str]] = None,
    points: int = 100,
    step: float = 1e-5,
    tolerance: float = 1e-4,
    seed: int = 0,
) -> List[GradCheckResult]:
    results = []
    for name in resolve_ops(ops):
        rng = np.random.default_rng([seed, list(CASES).index(name)])
        fn, inputs = CASES[name](rng)
        results.append(check_gradients(name, fn, inputs, points=points, step=step, tolerance=tolerance, seed=seed))
    failed = [r.op for r in results if not r.passed]
    logger.info(f"Gradient suite: {len(results) - len(failed)}/{len(results)} passed", extra={"failed": failed})
    return results
