"""Flattening of hierarchical (round, step) trajectories into one transition stream."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

import numpy as np

from ..engine import TrajectoryResult
from ..errors import Misalignment
from ..policy.toy import FEATURE_DIM, SOLVE_MASK, featurize
from ..reward import RewardBreakdown
from ..trace import Role


@dataclass
class Transition:
    features: np.ndarray
    role: Role
    t: int
    k: int
    action_text: str
    reward: float
    action_index: Optional[int] = None
    log_prob_old: Optional[float] = None
    mask: Optional[np.ndarray] = None
    value: float = 0.0
    advantage: Optional[float] = None
    ret: Optional[float] = None
    query_id: str = ""

    @property
    def trainable(self) -> bool:
        """Only sampled actions with a recorded behaviour log-prob can enter the policy loss."""
        return self.role.trainable and self.action_index is not None and self.log_prob_old is not None


def flatten(
    trajectory: TrajectoryResult,
    rewards: RewardBreakdown,
    feature_dim: int = FEATURE_DIM,
) -> list[Transition]:
    steps = trajectory.steps
    if len(rewards.per_step) != len(steps):
        raise Misalignment(f"{len(rewards.per_step)} rewards for {len(steps)} steps")
    keys = [(s.t, s.k) for s in steps]
    if rewards.step_keys is not None and list(rewards.step_keys) != keys:
        raise Misalignment("reward order does not match step order")
    if keys != sorted(keys) or len(set(keys)) != len(keys):
        raise Misalignment("steps are not in strict (t, k) order")
    out = []
    for step, r in zip(steps, rewards.per_step):
        out.append(
            Transition(
                features=featurize(step.query, feature_dim),
                role=step.role,
                t=step.t,
                k=step.k,
                action_text=step.action,
                reward=float(r),
                action_index=step.action_index,
                log_prob_old=step.log_prob,
                mask=SOLVE_MASK if step.solve_only else None,
                query_id=trajectory.query_id,
            )
        )
    return out


class ExperienceBuffer:
    """Pool of transitions from many trajectories and roles."""

    def __init__(self, transitions: Iterable[Transition] = ()):
        self.transitions: list[Transition] = list(transitions)

    def push(self, transition: Transition) -> None:
        if transition.advantage is None or transition.ret is None:
            raise ValueError("transition needs advantage and return before it enters the buffer")
        self.transitions.append(transition)

    def extend(self, transitions: Iterable[Transition]) -> None:
        for tr in transitions:
            self.push(tr)

    def __len__(self) -> int:
        return len(self.transitions)

    def __iter__(self) -> Iterator[Transition]:
        return iter(self.transitions)

    def roles(self) -> set[Role]:
        return {t.role for t in self.transitions}

    def trainable(self) -> list[Transition]:
        return [t for t in self.transitions if t.trainable]
