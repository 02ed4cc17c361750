import numpy as np
import pytest

from agentrag.config import RunConfig, dump_config, load_config, parse_override, to_dict
from agentrag.errors import ConfigurationError, WeightsFormatError
from agentrag.policy.toy import ToyPlannerPolicy, ValueEstimator
from agentrag.weights import MAGIC, dumps, load_weights, loads, save_weights


def test_defaults():
    cfg = RunConfig()
    assert cfg.seed == 7
    assert cfg.advantage_config().gamma == 1.0 and cfg.advantage_config().lam == 0.95
    assert cfg.ppo_config().clip_eps == 0.2
    assert cfg.reward_config().alpha == 0.0


def test_yaml_file_and_overrides(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("seed: 3\nreward:\n  alpha: 0.2\nrl:\n  lambda: 0.9\n", encoding="utf-8")
    cfg = load_config(path, ["reward.beta=0.2", "train.jobs=4"])
    assert cfg.seed == 3
    assert (cfg.reward.alpha, cfg.reward.beta) == (0.2, 0.2)
    assert cfg.rl.lam == 0.9 and cfg.train.jobs == 4


@pytest.mark.parametrize(
    "data",
    [
        {"reward": {"gama": 1}},
        {"nope": 1},
        {"rl": {"epochs": 2.5}},
        {"rl": {"adv_norm": "yes"}},
        {"engine": "flat"},
    ],
)
def test_bad_keys_and_types_fail_fast(data):
    with pytest.raises(ConfigurationError):
        load_config(data=data)


def test_unknown_key_is_named():
    with pytest.raises(ConfigurationError, match="unknown config key: reward.gama"):
        load_config(overrides=["reward.gama=1"])


def test_validate_range_errors():
    with pytest.raises(ConfigurationError):
        load_config(data={"rl": {"lambda": 2.0}}).validate()
    with pytest.raises(ConfigurationError):
        load_config(data={"backend": {"kind": "gpt"}}).validate()


def test_parse_override():
    assert parse_override("a.b=0.5") == {"a": {"b": 0.5}}
    assert parse_override("backend.endpoint_url=http://x:1/v1") == {"backend": {"endpoint_url": "http://x:1/v1"}}
    with pytest.raises(ConfigurationError):
        parse_override("novalue")


def test_dump_round_trip(tmp_path):
    cfg = load_config(overrides=["seed=11", "reward.alpha=0.1", "rl.lambda=0.8"])
    path = tmp_path / "dump.yaml"
    path.write_text(dump_config(cfg), encoding="utf-8")
    again = load_config(path)
    assert to_dict(again) == to_dict(cfg)
    assert "lambda" in to_dict(cfg)["rl"]


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "absent.yaml")


# -- weights ---------------------------------------------------------------

def models(seed=0):
    rng = np.random.default_rng(seed)
    policy = ToyPlannerPolicy(temperature=0.7, theta=rng.normal(size=(256, 8)))
    value = ValueEstimator(phi=rng.normal(size=256))
    return policy, value


def test_weights_round_trip(tmp_path):
    policy, value = models()
    save_weights(tmp_path / "w.bin", policy, value)
    p2, v2 = load_weights(tmp_path / "w.bin")
    assert p2.theta.tobytes() == policy.theta.tobytes()
    assert v2.phi.tobytes() == value.phi.tobytes()
    assert p2.temperature == 0.7


def test_weights_rejects_bad_files():
    blob = dumps(*models())
    assert blob.startswith(MAGIC)
    with pytest.raises(WeightsFormatError):
        loads(b"XXXX" + blob[4:])
    with pytest.raises(WeightsFormatError):
        loads(blob[:-8])
    with pytest.raises(WeightsFormatError):
        loads(blob[:4])
