"""Agentic retrieval-augmented QA orchestration with a cooperative PPO trainer for the planner."""

__version__ = "0.1.0"

from .engine import Engine, EngineLimits, StepRecord, TrajectoryResult, run_inference
from .reward import RewardConfig, assign_step_rewards, token_f1
from .trace import DecomposeMode, GlobalState, Observation, Role, new_state
from .workflow import MENU, Decompose, Solve, parse_workflow, validate

__all__ = [
    "Decompose",
    "DecomposeMode",
    "Engine",
    "EngineLimits",
    "GlobalState",
    "MENU",
    "Observation",
    "RewardConfig",
    "Role",
    "Solve",
    "StepRecord",
    "TrajectoryResult",
    "__version__",
    "assign_step_rewards",
    "new_state",
    "parse_workflow",
    "run_inference",
    "token_f1",
    "validate",
]
