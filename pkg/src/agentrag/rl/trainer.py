"""Synchronous collect-then-update training loop for the toy planner.

Each batch: roll out trajectories against a frozen policy snapshot (scripted
executors fill every other role), score them, flatten, attach GAE advantages,
then run the clipped update. Rollouts may run on a thread pool; results are
merged in task order and every trajectory draws from its own seeded stream,
so the metrics do not depend on ``jobs``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..engine import Engine, EngineLimits, TrajectoryResult
from ..env.corpus import Corpus
from ..env.oracle import OracleConfig
from ..env.world import SyntheticTask, World
from ..errors import ConfigurationError
from ..policy.backends import OracleBackend, ToyPlannerBackend
from ..policy.toy import FEATURE_DIM, ToyPlannerPolicy, ValueEstimator
from ..reward import RewardConfig, assign_step_rewards
from ..trace import Role
from .buffer import ExperienceBuffer, Transition, flatten
from .gae import AdvantageConfig, compute_gae
from .metrics import BehaviorMetrics, behavior_metrics
from .ppo import Optimizers, PpoConfig, ppo_update

log = logging.getLogger(__name__)

# fixed offsets deriving component streams from the single run seed
ROLLOUT_STREAM = 1
BATCH_STREAM = 2
UPDATE_STREAM = 3
EVAL_STREAM = 4


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 7
    iterations: int = 500
    batch_size: int = 32
    eval_interval: int = 50
    jobs: int = 1
    temperature: float = 1.0
    oracle_noise: float = 0.0
    oracle_error: float = 0.35

    def __post_init__(self) -> None:
        if self.iterations < 0:
            raise ConfigurationError("train.iterations must be >= 0")
        if self.batch_size < 1 or self.eval_interval < 1 or self.jobs < 1:
            raise ConfigurationError("train.batch_size, train.eval_interval and train.jobs must be >= 1")
        if self.temperature <= 0:
            raise ConfigurationError("train.temperature must be > 0")


@dataclass
class Setup:
    """Everything a training run needs besides hyperparameters."""

    corpus: Corpus
    train_tasks: Sequence[SyntheticTask]
    eval_tasks: Sequence[SyntheticTask]
    limits: EngineLimits = EngineLimits()
    reward: RewardConfig = RewardConfig()
    advantage: AdvantageConfig = AdvantageConfig()
    ppo: PpoConfig = PpoConfig()


@dataclass
class TrainReport:
    rows: list[dict]
    policy: ToyPlannerPolicy
    value: ValueEstimator
    initial_theta: np.ndarray
    updates: int
    final: BehaviorMetrics
    update_stats: list[dict] = field(default_factory=list)


@dataclass
class Rollout:
    task: SyntheticTask
    result: TrajectoryResult
    f1: float
    r_global: float
    transitions: list[Transition]


def _engine(policy: ToyPlannerPolicy, world: World, oracle: OracleConfig, corpus: Corpus, limits: EngineLimits, greedy: bool) -> Engine:
    executors = OracleBackend(world, oracle)
    backends = {role: executors for role in (Role.QR, Role.QDS, Role.QDP, Role.DS, Role.AG, Role.AS)}
    backends[Role.PLANNER] = ToyPlannerBackend(policy, greedy=greedy)
    return Engine(backends, corpus, limits, tolerate_backend_errors=True)


def rollout(engine: Engine, task: SyntheticTask, rng: np.random.Generator, reward_cfg: RewardConfig) -> Rollout:
    result = engine.run(task.question, rng, query_id=task.task_id)
    breakdown = assign_step_rewards(result, task.gold_answer, reward_cfg)
    return Rollout(task, result, breakdown.r_perf, breakdown.r_global, flatten(result, breakdown))


def attach_advantages(transitions: list[Transition], value: ValueEstimator, cfg: AdvantageConfig) -> None:
    """Fill value, advantage and return on one trajectory's transitions (terminal bootstrap 0)."""
    values = [float(value(t.features)) for t in transitions] + [0.0]
    adv, ret = compute_gae([t.reward for t in transitions], values, cfg)
    for t, v, a, r in zip(transitions, values, adv, ret):
        t.value, t.advantage, t.ret = v, float(a), float(r)


def _map(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def evaluate(
    policy: ToyPlannerPolicy,
    corpus: Corpus,
    tasks: Sequence[SyntheticTask],
    limits: EngineLimits,
    reward_cfg: RewardConfig,
    oracle: OracleConfig,
    seed: int,
    jobs: int = 1,
    world: Optional[World] = None,
) -> tuple[BehaviorMetrics, list[Rollout]]:
    """Greedy planner on ``tasks``; executor noise is drawn from a fixed per-task stream."""
    world = world or World.from_corpus(corpus)
    engine = _engine(policy, world, oracle, corpus, limits, greedy=True)

    def one(item):
        i, task = item
        return rollout(engine, task, np.random.default_rng([seed, EVAL_STREAM, i]), reward_cfg)

    rollouts = _map(one, list(enumerate(tasks)), jobs)
    metrics = behavior_metrics(
        [r.result for r in rollouts],
        [r.f1 for r in rollouts],
        [r.task.gold_plan_class.value for r in rollouts],
    )
    return metrics, rollouts


def train(
    setup: Setup,
    cfg: TrainConfig = TrainConfig(),
    policy: Optional[ToyPlannerPolicy] = None,
    value: Optional[ValueEstimator] = None,
    on_eval: Optional[Callable[[dict], None]] = None,
) -> TrainReport:
    if not setup.train_tasks:
        raise ConfigurationError("training needs at least one task")
    policy = policy or ToyPlannerPolicy(FEATURE_DIM, cfg.temperature)
    value = value or ValueEstimator(policy.feature_dim)
    initial_theta = policy.theta.copy()
    world = World.from_corpus(setup.corpus)
    oracle = OracleConfig(noise_rate=cfg.oracle_noise, seed=cfg.seed, error_rate=cfg.oracle_error)
    optimizers = Optimizers.for_models(policy, value, setup.ppo.lr)
    update_rng = np.random.default_rng([cfg.seed, UPDATE_STREAM])
    eval_tasks = setup.eval_tasks or setup.train_tasks
    rows: list[dict] = []
    update_stats: list[dict] = []
    updates = 0

    def record() -> BehaviorMetrics:
        metrics, _ = evaluate(policy, setup.corpus, eval_tasks, setup.limits, setup.reward, oracle, cfg.seed, cfg.jobs, world)
        row = metrics.row(updates)
        rows.append(row)
        if on_eval:
            on_eval(row)
        log.info("step=%d f1=%.3f rounds=%.2f gold=%.3f", updates, metrics.f1, metrics.mean_rounds, metrics.gold_rate or 0.0)
        return metrics

    final = record()
    batch_size = min(cfg.batch_size, len(setup.train_tasks))
    for it in range(cfg.iterations):
        picks = np.random.default_rng([cfg.seed, BATCH_STREAM, it]).choice(len(setup.train_tasks), batch_size, replace=False)
        snapshot = policy.copy()
        engine = _engine(snapshot, world, oracle, setup.corpus, setup.limits, greedy=False)

        def one(item):
            j, idx = item
            rng = np.random.default_rng([cfg.seed, ROLLOUT_STREAM, it, j])
            return rollout(engine, setup.train_tasks[idx], rng, setup.reward)

        rollouts = _map(one, list(enumerate(picks.tolist())), cfg.jobs)
        buffer = ExperienceBuffer()
        for ro in rollouts:
            attach_advantages(ro.transitions, value, setup.advantage)
            buffer.extend(ro.transitions)
        policy, value, stats = ppo_update(policy, value, buffer.transitions, setup.ppo, optimizers, update_rng)
        updates += stats["updates"]
        update_stats.append(stats)
        if (it + 1) % cfg.eval_interval == 0 and it + 1 < cfg.iterations:
            record()
    if cfg.iterations:
        final = record()
    return TrainReport(rows, policy, value, initial_theta, updates, final, update_stats)

