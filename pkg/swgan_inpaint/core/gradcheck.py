"""
Central finite-difference checks of reverse-mode gradients.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np

from swgan_inpaint.core.tensor import Tensor, backward, default_dtype, no_grad

logger = logging.getLogger(__name__)

# Absolute floor for the relative-error denominator; keeps exactly-zero
# gradients (pool losers, dropped units) from dividing roundoff by ~0.
DENOMINATOR_FLOOR = 1e-3


@dataclass
class GradCheckResult:
    op: str
    max_rel_err: float
    points: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_rel_err)) and self.max_rel_err <= self.tolerance


def relative_error(analytic: float, numeric: float) -> float:
    denom = max(abs(analytic), abs(numeric), DENOMINATOR_FLOOR)
    return abs(analytic - numeric) / denom


def check_gradients(
    name: str,
    fn: Callable[..., Tensor],
    inputs: Sequence[np.ndarray],
    points: int = 100,
    step: float = 1e-5,
    tolerance: float = 1e-4,
    seed: int = 0,
) -> GradCheckResult:
    """Compare ``backward`` against central differences in 64-bit.

    A non-scalar output is projected onto fixed random weights so every
    output element contributes to the checked objective.
    """
    rng = np.random.default_rng(seed)
    with default_dtype(np.float64):
        arrays: List[np.ndarray] = [np.array(x, dtype=np.float64) for x in inputs]
        leaves = [Tensor(a, requires_grad=True) for a in arrays]
        out = fn(*leaves)
        weights = rng.standard_normal(out.shape)
        backward((out * weights).sum())
        analytic = [
            leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
            for leaf in leaves
        ]

        def objective() -> float:
            with no_grad():
                value = fn(*[Tensor(a) for a in arrays])
            return float(np.sum(value.data * weights))

        sizes = [a.size for a in arrays]
        offsets = np.cumsum([0] + sizes)
        total = int(offsets[-1])
        chosen = rng.choice(total, size=min(points, total), replace=False)

        worst = 0.0
        for flat in np.sort(chosen):
            k = int(np.searchsorted(offsets, flat, side="right") - 1)
            i = int(flat - offsets[k])
            view = arrays[k].reshape(-1)
            original = view[i]
            view[i] = original + step
            plus = objective()
            view[i] = original - step
            minus = objective()
            view[i] = original
            numeric = (plus - minus) / (2.0 * step)
            worst = max(worst, relative_error(float(analytic[k].reshape(-1)[i]), numeric))

    result = GradCheckResult(op=name, max_rel_err=worst, points=len(chosen), tolerance=tolerance)
    logger.debug(
        "Gradient check finished",
        extra={"op": name, "max_rel_err": worst, "points": result.points},
    )
    return result
