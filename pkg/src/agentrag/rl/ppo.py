"""Clipped-surrogate policy update and value regression for the toy planner."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import ConfigurationError, EmptyBatch
from ..policy.toy import ToyPlannerPolicy, ValueEstimator, masked_log_softmax
from ..workflow import N_ACTIONS
from .buffer import Transition


@dataclass(frozen=True)
class PpoConfig:
    clip_eps: float = 0.2
    epochs: int = 4
    minibatch: int = 64
    lr: float = 0.05
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    adv_norm: bool = True

    def __post_init__(self) -> None:
        if self.clip_eps <= 0:
            raise ConfigurationError("rl.clip_eps must be > 0")
        if self.epochs < 1 or self.minibatch < 1:
            raise ConfigurationError("rl.epochs and rl.minibatch must be >= 1")
        if self.lr < 0 or self.entropy_coef < 0 or self.value_coef < 0:
            raise ConfigurationError("rl.lr, rl.entropy_coef and rl.value_coef must be >= 0")


@dataclass
class PolicyBatch:
    features: np.ndarray      # (B, D)
    actions: np.ndarray       # (B,)
    masks: np.ndarray         # (B, A) bool
    old_log_probs: np.ndarray  # (B,)
    advantages: np.ndarray    # (B,)
    returns: np.ndarray       # (B,)

    def __len__(self) -> int:
        return len(self.actions)

    def subset(self, idx: np.ndarray) -> "PolicyBatch":
        return PolicyBatch(*(a[idx] for a in (self.features, self.actions, self.masks, self.old_log_probs, self.advantages, self.returns)))

    @classmethod
    def from_transitions(cls, transitions: Sequence[Transition]) -> "PolicyBatch":
        full = np.ones(N_ACTIONS, dtype=bool)
        return cls(
            np.stack([t.features for t in transitions]),
            np.array([t.action_index for t in transitions], dtype=int),
            np.stack([full if t.mask is None else t.mask for t in transitions]),
            np.array([t.log_prob_old for t in transitions], dtype=float),
            np.array([t.advantage for t in transitions], dtype=float),
            np.array([t.ret for t in transitions], dtype=float),
        )


def clipped_objective(ratio: np.ndarray, advantages: np.ndarray, clip_eps: float) -> np.ndarray:
    """Per-sample pessimistic surrogate min(r*A, clip(r, 1-eps, 1+eps)*A)."""
    return np.minimum(ratio * advantages, np.clip(ratio, 1 - clip_eps, 1 + clip_eps) * advantages)


def surrogate(
    theta: np.ndarray,
    batch: PolicyBatch,
    clip_eps: float,
    entropy_coef: float,
    temperature: float = 1.0,
) -> tuple[float, np.ndarray, dict]:
    """Mean clipped surrogate plus entropy bonus, and its analytic gradient in theta."""
    B = len(batch)
    logits = batch.features @ theta / temperature
    logp_all = masked_log_softmax(logits, batch.masks)
    probs = np.where(batch.masks, np.exp(logp_all), 0.0)
    rows = np.arange(B)
    logp = logp_all[rows, batch.actions]
    ratio = np.exp(logp - batch.old_log_probs)
    adv = batch.advantages
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1 - clip_eps, 1 + clip_eps) * adv
    per_sample = np.minimum(unclipped, clipped)
    plogp = np.where(batch.masks, probs * np.where(batch.masks, logp_all, 0.0), 0.0)
    entropy = -plogp.sum(axis=1)
    objective = float(np.mean(per_sample + entropy_coef * entropy))

    # d(per_sample)/d(logp): r*A where the unclipped branch is the active minimum, else 0
    active = unclipped <= clipped
    g_logp = np.where(active, ratio * adv, 0.0)
    onehot = np.zeros_like(probs)
    onehot[rows, batch.actions] = 1.0
    d_logits = g_logp[:, None] * (onehot - probs)
    safe_logp = np.where(batch.masks, logp_all, 0.0)
    d_logits += entropy_coef * (-probs * (safe_logp + entropy[:, None]))
    grad = batch.features.T @ d_logits / (B * temperature)
    stats = {
        "ratio": float(np.mean(ratio)),
        "clip_frac": float(np.mean(np.abs(ratio - 1) > clip_eps)),
        "entropy": float(np.mean(entropy)),
    }
    return objective, grad, stats


def value_loss(phi: np.ndarray, batch: PolicyBatch, value_coef: float) -> tuple[float, np.ndarray]:
    err = batch.features @ phi - batch.returns
    loss = value_coef * float(np.mean(err**2))
    grad = 2 * value_coef * batch.features.T @ err / len(batch)
    return loss, grad


class Adam:
    def __init__(self, shape, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def delta(self, grad: np.ndarray) -> np.ndarray:
        """Parameter change that descends ``grad``."""
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return -self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class Optimizers:
    policy: Adam
    value: Adam

    @classmethod
    def for_models(cls, policy: ToyPlannerPolicy, value: ValueEstimator, lr: float) -> "Optimizers":
        return cls(Adam(policy.theta.shape, lr), Adam(value.phi.shape, lr))


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    if len(adv) < 2:
        return adv - adv.mean() if len(adv) else adv
    return (adv - adv.mean()) / (adv.std() + 1e-8)


def ppo_update(
    policy: ToyPlannerPolicy,
    value: ValueEstimator,
    batch: Sequence[Transition],
    cfg: PpoConfig,
    optimizers: Optional[Optimizers] = None,
    rng: Optional[np.random.Generator] = None,
) -> tuple[ToyPlannerPolicy, ValueEstimator, dict]:
    """Run ``cfg.epochs`` passes of shuffled mini-batch steps over the trainable transitions.

    Non-trainable transitions (retrieval bookkeeping, scripted executors) are
    dropped before any gradient is formed.
    """
    if len(batch) == 0:
        raise EmptyBatch("no transitions to learn from")
    trainable = [t for t in batch if t.trainable]
    stats = {"updates": 0, "ratio": 1.0, "clip_frac": 0.0, "entropy": 0.0, "value_loss": 0.0, "objective": 0.0, "n": len(trainable)}
    if not trainable:
        return policy, value, stats
    if optimizers is None:
        optimizers = Optimizers.for_models(policy, value, cfg.lr)
    if rng is None:
        rng = np.random.default_rng(0)
    data = PolicyBatch.from_transitions(trainable)
    if cfg.adv_norm:
        data.advantages = normalize_advantages(data.advantages)
    records = []
    for _ in range(cfg.epochs):
        order = rng.permutation(len(data))
        for start in range(0, len(data), cfg.minibatch):
            mb = data.subset(order[start:start + cfg.minibatch])
            objective, grad, mb_stats = surrogate(policy.theta, mb, cfg.clip_eps, cfg.entropy_coef, policy.temperature)
            v_loss, v_grad = value_loss(value.phi, mb, cfg.value_coef)
            # ascent on the surrogate, descent on the value loss
            policy.apply_gradient(optimizers.policy.delta(-grad))
            value.apply_gradient(optimizers.value.delta(v_grad))
            records.append((objective, v_loss, mb_stats))
            stats["updates"] += 1
    stats["objective"] = float(np.mean([r[0] for r in records]))
    stats["value_loss"] = float(np.mean([r[1] for r in records]))
    for key in ("ratio", "clip_frac", "entropy"):
        stats[key] = float(np.mean([r[2][key] for r in records]))
    return policy, value, stats
