"""Nested run configuration: YAML file, ``--set key=value`` overrides, fail-fast on unknown keys."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Union

import yaml

from .engine import EngineLimits
from .env.oracle import OracleConfig
from .env.world import CorpusParams
from .errors import AgentRagError, ConfigurationError
from .reward import RewardConfig
from .rl.gae import AdvantageConfig
from .rl.ppo import PpoConfig
from .rl.trainer import TrainConfig


@dataclass
class RewardSection:
    alpha: float = 0.0
    beta: float = 0.0
    max_rounds_norm: int = 3
    max_retrievals_norm: int = 3


@dataclass
class RlSection:
    gamma: float = 1.0
    lam: float = 0.95
    clip_eps: float = 0.2
    epochs: int = 4
    minibatch: int = 64
    lr: float = 0.05
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    adv_norm: bool = True


@dataclass
class EngineSection:
    max_rounds: int = 3
    max_depth: int = 1
    max_retrievals: int = 3
    top_k: int = 5


@dataclass
class EnvSection:
    corpus: Optional[str] = None
    tasks: Optional[str] = None
    entities: int = 150
    distractors: int = 600
    train_per_class: int = 100
    noise_rate: float = 0.0
    error_rate: float = 0.35


@dataclass
class BackendSection:
    kind: str = "oracle"
    endpoint_url: Optional[str] = None
    model: str = "default"
    temperature: float = 0.0
    max_tokens: int = 256
    timeout: float = 30.0
    script: Optional[str] = None
    weights: Optional[str] = None


@dataclass
class TrainSection:
    iterations: int = 500
    batch_size: int = 32
    eval_interval: int = 50
    jobs: int = 1
    temperature: float = 1.0


@dataclass
class RunConfig:
    seed: int = 7
    reward: RewardSection = field(default_factory=RewardSection)
    rl: RlSection = field(default_factory=RlSection)
    engine: EngineSection = field(default_factory=EngineSection)
    env: EnvSection = field(default_factory=EnvSection)
    backend: BackendSection = field(default_factory=BackendSection)
    train: TrainSection = field(default_factory=TrainSection)

    # -- component views --------------------------------------------------
    def reward_config(self) -> RewardConfig:
        return RewardConfig(**dataclasses.asdict(self.reward))

    def advantage_config(self) -> AdvantageConfig:
        return AdvantageConfig(self.rl.gamma, self.rl.lam)

    def ppo_config(self) -> PpoConfig:
        rl = self.rl
        return PpoConfig(rl.clip_eps, rl.epochs, rl.minibatch, rl.lr, rl.entropy_coef, rl.value_coef, rl.adv_norm)

    def engine_limits(self) -> EngineLimits:
        return EngineLimits(**dataclasses.asdict(self.engine))

    def oracle_config(self) -> OracleConfig:
        return OracleConfig(self.env.noise_rate, self.seed, self.env.error_rate)

    def corpus_params(self) -> CorpusParams:
        return CorpusParams(self.env.entities, self.env.distractors)

    def train_config(self) -> TrainConfig:
        t = self.train
        return TrainConfig(
            seed=self.seed,
            iterations=t.iterations,
            batch_size=t.batch_size,
            eval_interval=t.eval_interval,
            jobs=t.jobs,
            temperature=t.temperature,
            oracle_noise=self.env.noise_rate,
            oracle_error=self.env.error_rate,
        )

    def validate(self) -> "RunConfig":
        """Build every component config once so range errors surface early."""
        try:
            self.reward_config()
            self.advantage_config()
            self.ppo_config()
            self.engine_limits()
            self.oracle_config()
            self.corpus_params()
            self.train_config()
        except AgentRagError as exc:
            raise ConfigurationError(str(exc)) from None
        if self.backend.kind not in BACKEND_KINDS:
            raise ConfigurationError(f"backend.kind must be one of {', '.join(BACKEND_KINDS)}")
        return self


BACKEND_KINDS = ("oracle", "replay", "remote", "toy")
# user-facing spelling of keys whose attribute name differs
_ALIASES = {"lambda": "lam"}
_REVERSE_ALIASES = {v: k for k, v in _ALIASES.items()}


def _coerce(value: Any, current: Any, dotted: str) -> Any:
    if current is None or value is None:
        return value
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigurationError(f"{dotted} must be true or false")
        return value
    if isinstance(current, (int, float)) and not isinstance(value, bool) and isinstance(value, (int, float)):
        if isinstance(current, int) and not float(value).is_integer():
            raise ConfigurationError(f"{dotted} must be an integer")
        return type(current)(value)
    if isinstance(current, str) and isinstance(value, str):
        return value
    raise ConfigurationError(f"{dotted} has the wrong type ({type(value).__name__})")


def _apply(target: Any, data: Mapping, prefix: str = "") -> None:
    if not isinstance(data, Mapping):
        raise ConfigurationError(f"{prefix or 'config'} must be a mapping")
    names = {f.name for f in dataclasses.fields(target)}
    for key, value in data.items():
        attr = _ALIASES.get(key, key)
        dotted = f"{prefix}{key}"
        if attr not in names:
            raise ConfigurationError(f"unknown config key: {dotted}")
        current = getattr(target, attr)
        if dataclasses.is_dataclass(current):
            _apply(current, value, dotted + ".")
        else:
            setattr(target, attr, _coerce(value, current, dotted))


def parse_override(text: str) -> dict:
    """``a.b=c`` -> ``{"a": {"b": c}}`` with the value parsed as YAML."""
    if "=" not in text:
        raise ConfigurationError(f"--set expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigurationError(f"--set expects key=value, got {text!r}")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse value for {key}: {exc}") from None
    out: dict = {}
    node = out
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value
    return out


def load_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Sequence[str] = (),
    data: Optional[Mapping] = None,
) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
        try:
            loaded = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"{path}: {exc}") from None
        _apply(cfg, loaded)
    if data:
        _apply(cfg, data)
    for item in overrides:
        _apply(cfg, parse_override(item))
    return cfg


def apply(cfg: RunConfig, data: Mapping) -> RunConfig:
    _apply(cfg, data)
    return cfg


def to_dict(cfg: RunConfig) -> dict:
    def convert(obj):
        out = {}
        for f in dataclasses.fields(obj):
            value = getattr(obj, f.name)
            out[_REVERSE_ALIASES.get(f.name, f.name)] = convert(value) if dataclasses.is_dataclass(value) else value
        return out

    return convert(cfg)


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)
