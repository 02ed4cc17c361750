"""Trainable toy planner: a linear softmax over the eight legal workflow plans."""

from __future__ import annotations

import re
import zlib
from typing import Optional

import numpy as np

from ..errors import IndexOutOfRange
from ..workflow import N_ACTIONS, SOLVE_ACTIONS

FEATURE_DIM = 256
_WORD_RE = re.compile(r"[a-z0-9']+")

SOLVE_MASK = np.zeros(N_ACTIONS, dtype=bool)
SOLVE_MASK[list(SOLVE_ACTIONS)] = True
FULL_MASK = np.ones(N_ACTIONS, dtype=bool)


def featurize(query: str, dim: int = FEATURE_DIM) -> np.ndarray:
    """Hashed bag of lowercase words, L2-normalised. Empty text maps to zeros."""
    x = np.zeros(dim)
    for token in _WORD_RE.findall((query or "").lower()):
        x[zlib.crc32(token.encode("utf-8")) % dim] += 1.0
    norm = np.linalg.norm(x)
    return x / norm if norm > 0 else x


def masked_log_softmax(logits: np.ndarray, mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Row-wise log-softmax; disallowed actions get -inf."""
    logits = np.asarray(logits, dtype=float)
    if mask is not None:
        logits = np.where(mask, logits, -np.inf)
    top = np.max(logits, axis=-1, keepdims=True)
    shifted = logits - top
    with np.errstate(divide="ignore"):
        return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


class ToyPlannerPolicy:
    def __init__(self, feature_dim: int = FEATURE_DIM, temperature: float = 1.0, theta: Optional[np.ndarray] = None):
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        self.feature_dim = feature_dim
        self.temperature = float(temperature)
        self.theta = np.zeros((feature_dim, N_ACTIONS)) if theta is None else np.array(theta, dtype=float)
        if self.theta.shape != (feature_dim, N_ACTIONS):
            raise ValueError(f"theta must be {(feature_dim, N_ACTIONS)}, got {self.theta.shape}")

    def logits(self, features: np.ndarray) -> np.ndarray:
        return features @ self.theta / self.temperature

    def log_distribution(self, features: np.ndarray, mask: Optional[np.ndarray] = None) -> np.ndarray:
        return masked_log_softmax(self.logits(features), mask)

    def distribution(self, features: np.ndarray, mask: Optional[np.ndarray] = None) -> np.ndarray:
        return np.exp(self.log_distribution(features, mask))

    def sample(
        self,
        features: np.ndarray,
        rng: np.random.Generator,
        mask: Optional[np.ndarray] = None,
        greedy: bool = False,
    ) -> tuple[int, float]:
        logp = self.log_distribution(features, mask)
        if greedy:
            index = int(np.argmax(logp))
        else:
            # inverse-CDF draw keeps the rng stream at one uniform per decision
            cdf = np.cumsum(np.exp(logp))
            index = int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), N_ACTIONS - 1))
            while not np.isfinite(logp[index]):
                index -= 1
        return index, float(logp[index])

    def apply_gradient(self, update: np.ndarray) -> None:
        """Add a parameter delta (already scaled by the optimiser)."""
        self.theta += update

    def copy(self) -> "ToyPlannerPolicy":
        return ToyPlannerPolicy(self.feature_dim, self.temperature, self.theta.copy())


def log_prob_of(
    policy: ToyPlannerPolicy,
    features: np.ndarray,
    action_index: int,
    mask: Optional[np.ndarray] = None,
) -> float:
    if not 0 <= action_index < N_ACTIONS:
        raise IndexOutOfRange(f"action index {action_index} outside [0, {N_ACTIONS})")
    return float(policy.log_distribution(features, mask)[action_index])


class ValueEstimator:
    """Linear state-value baseline on query features."""

    def __init__(self, feature_dim: int = FEATURE_DIM, phi: Optional[np.ndarray] = None):
        self.feature_dim = feature_dim
        self.phi = np.zeros(feature_dim) if phi is None else np.array(phi, dtype=float)

    def __call__(self, features: np.ndarray) -> np.ndarray:
        return features @ self.phi

    def apply_gradient(self, update: np.ndarray) -> None:
        self.phi += update

    def copy(self) -> "ValueEstimator":
        return ValueEstimator(self.feature_dim, self.phi.copy())
