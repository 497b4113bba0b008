"""
Adam with bias correction over a LayerParamSet.

The generator and the critic each own an ``AdamState``. Moments are keyed by
the dotted parameter path, so a checkpoint can store them next to the
parameters and a resumed run continues with the same step count.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional

import numpy as np

from swgan_inpaint.errors import GradientError, ShapeError
from swgan_inpaint.nn.layers import LayerParamSet

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """First and second moments plus the update counter ``t``."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: LayerParamSet, lr: float, **constants) -> "AdamState":
        state = cls(lr=lr, **constants)
        for name, p in params.items():
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        return state

    def metadata(self) -> Dict[str, Any]:
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps, "t": self.t}

    def arrays(self, prefix: str) -> Dict[str, np.ndarray]:
        out = {}
        for name in self.m:
            out[f"{prefix}m/{name}"] = self.m[name]
            out[f"{prefix}v/{name}"] = self.v[name]
        return out

    @classmethod
    def restore(
        cls, metadata: Mapping[str, Any], arrays: Mapping[str, np.ndarray], prefix: str, params: LayerParamSet
    ) -> "AdamState":
        """Rebuild from checkpoint metadata and arrays; every moment must match its parameter's shape."""
        state = cls(
            lr=metadata["lr"],
            beta1=metadata["beta1"],
            beta2=metadata["beta2"],
            eps=metadata["eps"],
            t=int(metadata["t"]),
        )
        problems = []
        for name, p in params.items():
            for moment, store in (("m", state.m), ("v", state.v)):
                key = f"{prefix}{moment}/{name}"
                if key not in arrays:
                    problems.append(f"missing optimizer array '{key}'")
                elif arrays[key].shape != p.shape:
                    problems.append(f"optimizer array '{key}' has shape {arrays[key].shape}, expected {p.shape}")
                else:
                    store[name] = arrays[key]
        if problems:
            raise ShapeError("; ".join(problems))
        return state


def adam_step(
    params: LayerParamSet,
    state: AdamState,
    grads: Optional[Mapping[str, np.ndarray]] = None,
) -> None:
    """Apply one bias-corrected Adam update in place, then clear gradients.

    ``grads`` defaults to each parameter's ``.grad``.
    """
    resolved = {}
    missing = []
    for name, p in params.items():
        g = grads.get(name) if grads is not None else p.grad
        if g is None:
            missing.append(name)
        else:
            resolved[name] = g
    if missing:
        raise GradientError(f"no gradient for parameters: {', '.join(missing)}")

    state.t += 1
    correction1 = 1.0 - state.beta1 ** state.t
    correction2 = 1.0 - state.beta2 ** state.t
    for name, p in params.items():
        g = np.asarray(resolved[name], dtype=p.dtype)
        m = state.m.get(name, np.zeros_like(p.data))
        v = state.v.get(name, np.zeros_like(p.data))
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        state.m[name], state.v[name] = m, v
        m_hat = m / correction1
        v_hat = v / correction2
        p.data = p.data - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        p.zero_grad()
