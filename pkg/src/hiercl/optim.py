"""AdamW with decoupled weight decay.

Update rule::

    m <- b1 m + (1 - b1) g
    v <- b2 v + (1 - b2) g^2
    m_hat = m / (1 - b1^t),  v_hat = v / (1 - b2^t)
    theta <- theta - lr (m_hat / (sqrt(v_hat) + eps) + wd theta)
"""

from __future__ import annotations

from typing import Any, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from hiercl.constants import (
    ADAMW_BETA1,
    ADAMW_BETA2,
    ADAMW_EPS,
    DEFAULT_LR,
    DEFAULT_WEIGHT_DECAY,
)
from hiercl.encoder import EncoderGradients, EncoderParams
from hiercl.exceptions import DimensionMismatchError, NonFiniteError


class AdamWState(BaseModel):
    """Moment accumulators (one per parameter array) and hyperparameters."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    m: tuple[np.ndarray, ...]
    v: tuple[np.ndarray, ...]
    step: int = Field(default=0, ge=0)
    lr: float = Field(default=DEFAULT_LR, ge=0.0)
    weight_decay: float = Field(default=DEFAULT_WEIGHT_DECAY, ge=0.0)
    beta1: float = Field(default=ADAMW_BETA1, ge=0.0, lt=1.0)
    beta2: float = Field(default=ADAMW_BETA2, ge=0.0, lt=1.0)
    eps: float = Field(default=ADAMW_EPS, gt=0.0)

    @classmethod
    def zeros_like(cls, params: EncoderParams, **hyper: Any) -> AdamWState:
        arrays = params.arrays()
        return cls(
            m=tuple(np.zeros_like(a) for a in arrays),
            v=tuple(np.zeros_like(a) for a in arrays),
            **hyper,
        )


def adamw_step(
    state: AdamWState,
    params: EncoderParams,
    grads: Union[EncoderGradients, list[np.ndarray]],
) -> tuple[EncoderParams, AdamWState]:
    """Apply one AdamW update; returns new parameters and state.

    Raises:
        DimensionMismatchError: If gradient shapes differ from parameters.
        NonFiniteError: If any gradient entry is NaN or infinite.
    """
    theta = params.arrays()
    g_list = grads.arrays() if isinstance(grads, EncoderGradients) else list(grads)
    if len(g_list) != len(theta) or len(state.m) != len(theta):
        raise DimensionMismatchError(
            message=f"{len(g_list)} gradients for {len(theta)} parameter arrays."
        )
    for i, (p, g) in enumerate(zip(theta, g_list)):
        if p.shape != g.shape:
            raise DimensionMismatchError(
                message=f"Gradient {i} has shape {g.shape}, parameter has {p.shape}."
            )
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(message=f"Gradient {i} contains NaN or Inf.")

    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1**t
    correction2 = 1.0 - b2**t
    new_theta, new_m, new_v = [], [], []
    for p, g, m, v in zip(theta, g_list, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        update = m_hat / (np.sqrt(v_hat) + state.eps) + state.weight_decay * p
        new_theta.append(p - state.lr * update)
        new_m.append(m)
        new_v.append(v)
    new_state = state.model_copy(update={"m": tuple(new_m), "v": tuple(new_v), "step": t})
    return EncoderParams.from_arrays(new_theta), new_state
