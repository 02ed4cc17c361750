"""Terminal global reward (F1 minus normalised cost) plus local format penalties."""

from __future__ import annotations

import re
import string
from collections import Counter
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

from .errors import ConfigurationError, EmptyTrajectory

if TYPE_CHECKING:
    from .engine import StepRecord, TrajectoryResult

FORMAT_PENALTY = -1.0

_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT = set(string.punctuation)


@dataclass(frozen=True)
class RewardConfig:
    alpha: float = 0.0
    beta: float = 0.0
    max_rounds_norm: int = 3
    max_retrievals_norm: int = 3

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.beta < 0:
            raise ConfigurationError("reward.alpha and reward.beta must be >= 0")
        if self.max_rounds_norm < 1 or self.max_retrievals_norm < 1:
            raise ConfigurationError("reward normalisers must be >= 1")


@dataclass
class RewardBreakdown:
    r_perf: float
    r_cost: float
    r_global: float
    per_step: list[float] = field(default_factory=list)
    # (t, k) of each per_step entry, used to detect misaligned reward lists
    step_keys: Optional[list[tuple[int, int]]] = None


def normalize_answer(text: str) -> str:
    """Lowercase, drop punctuation and articles, collapse whitespace."""
    text = (text or "").lower()
    text = "".join(ch for ch in text if ch not in _PUNCT)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def token_f1(prediction: str, gold: str) -> float:
    pred = normalize_answer(prediction).split()
    ref = normalize_answer(gold).split()
    if not pred and not ref:
        return 1.0
    if not pred or not ref:
        return 0.0
    common = sum((Counter(pred) & Counter(ref)).values())
    if common == 0:
        return 0.0
    precision = common / len(pred)
    recall = common / len(ref)
    return 2 * precision * recall / (precision + recall)


def cost_penalty(rounds: int, retrievals: int, cfg: RewardConfig) -> float:
    rounds_term = min(rounds, cfg.max_rounds_norm) / cfg.max_rounds_norm
    retrieval_term = min(retrievals, cfg.max_retrievals_norm) / cfg.max_retrievals_norm
    return cfg.alpha * rounds_term + cfg.beta * retrieval_term


def format_penalty(step: "StepRecord") -> float:
    return FORMAT_PENALTY if step.format_violation else 0.0


def assign_step_rewards(trajectory: "TrajectoryResult", gold: str, cfg: RewardConfig) -> RewardBreakdown:
    if not trajectory.steps:
        raise EmptyTrajectory("trajectory has no steps")
    r_perf = token_f1(trajectory.final_answer, gold)
    r_cost = cost_penalty(trajectory.rounds_used, trajectory.retrievals_used, cfg)
    r_global = r_perf - r_cost
    per_step = [format_penalty(s) for s in trajectory.steps]
    per_step[-1] += r_global
    keys = [(s.t, s.k) for s in trajectory.steps]
    return RewardBreakdown(r_perf, r_cost, r_global, per_step, keys)
