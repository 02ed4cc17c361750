from .buffer import ExperienceBuffer, Transition, flatten
from .gae import AdvantageConfig, compute_gae
from .metrics import BehaviorMetrics, behavior_metrics, metrics_csv
from .ppo import Adam, PpoConfig, clipped_objective, ppo_update, surrogate
from .trainer import Setup, TrainConfig, TrainReport, evaluate, train

__all__ = [
    "Adam",
    "AdvantageConfig",
    "BehaviorMetrics",
    "ExperienceBuffer",
    "PpoConfig",
    "Setup",
    "TrainConfig",
    "TrainReport",
    "Transition",
    "behavior_metrics",
    "clipped_objective",
    "compute_gae",
    "evaluate",
    "flatten",
    "metrics_csv",
    "ppo_update",
    "surrogate",
    "train",
]
