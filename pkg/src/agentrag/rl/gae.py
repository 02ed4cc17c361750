"""Generalised advantage estimation over a flattened step sequence."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ConfigurationError, LengthMismatch


@dataclass(frozen=True)
class AdvantageConfig:
    gamma: float = 1.0
    lam: float = 0.95

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigurationError("rl.gamma must be in (0, 1]")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigurationError("rl.lambda must be in [0, 1]")


def compute_gae(
    rewards: Sequence[float],
    values: Sequence[float],
    cfg: AdvantageConfig = AdvantageConfig(),
) -> tuple[np.ndarray, np.ndarray]:
    """Backward recursion A_i = delta_i + gamma*lambda*A_{i+1}.

    ``values`` carries one extra trailing bootstrap entry (0 for a terminal state).
    Returns (advantages, returns) with returns = advantages + values[:-1].
    """
    r = np.asarray(rewards, dtype=float)
    v = np.asarray(values, dtype=float)
    if v.shape != (r.shape[0] + 1,):
        raise LengthMismatch(f"need {r.shape[0] + 1} values for {r.shape[0]} rewards, got {v.shape[0]}")
    deltas = r + cfg.gamma * v[1:] - v[:-1]
    adv = np.zeros_like(r)
    running = 0.0
    decay = cfg.gamma * cfg.lam
    for i in range(len(r) - 1, -1, -1):
        running = deltas[i] + decay * running
        adv[i] = running
    return adv, adv + v[:-1]
