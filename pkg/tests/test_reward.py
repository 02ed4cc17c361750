import math

import pytest
from hypothesis import given, strategies as st

from agentrag.engine import StepRecord, TrajectoryResult
from agentrag.errors import ConfigurationError, EmptyTrajectory
from agentrag.reward import RewardConfig, assign_step_rewards, cost_penalty, format_penalty, normalize_answer, token_f1
from agentrag.trace import Role, new_state


def step(role=Role.AG, violation=False, t=1, k=0):
    return StepRecord(t, k, role, "d", "", "", violation)


def trajectory(steps, answer="", rounds=1, retrievals=0):
    return TrajectoryResult(answer, steps, rounds, retrievals, new_state("q"))


@pytest.mark.parametrize(
    "pred, gold, expected",
    [
        ("1982", "1982", 1.0),
        ("Barack Obama", "Obama", 2 / 3),
        ("", "x", 0.0),
        ("x", "", 0.0),
        ("", "", 1.0),
        ("The Beatles!", "beatles", 1.0),
        ("a an the", "", 1.0),
    ],
)
def test_token_f1_examples(pred, gold, expected):
    assert token_f1(pred, gold) == pytest.approx(expected, abs=1e-4)


def test_normalize_answer():
    assert normalize_answer("  The  Quick, brown FOX.  ") == "quick brown fox"


@pytest.mark.parametrize(
    "alpha, beta, rounds, retrievals, expected",
    [
        (0.1, 0.1, 3, 3, 0.2),
        (0.0, 0.0, 7, 9, 0.0),
        (0.1, 0.0, 1, 0, 0.1 / 3),
        # counts above the normalisers saturate
        (0.2, 0.2, 5, 8, 0.4),
    ],
)
def test_cost_penalty_examples(alpha, beta, rounds, retrievals, expected):
    assert cost_penalty(rounds, retrievals, RewardConfig(alpha, beta)) == pytest.approx(expected, abs=1e-12)


def test_reward_config_rejects_negative_weights():
    with pytest.raises(ConfigurationError):
        RewardConfig(alpha=-0.1)


@pytest.mark.parametrize("role", [Role.PLANNER, Role.DS])
def test_format_penalty_is_role_agnostic(role):
    assert format_penalty(step(role, True)) == -1.0
    assert format_penalty(step(role, False)) == 0.0


def test_single_clean_step():
    br = assign_step_rewards(trajectory([step()], "w x y z"), "v w x y z", RewardConfig())
    assert br.r_perf == pytest.approx(8 / 9)
    assert br.per_step == [pytest.approx(8 / 9)]


def test_single_clean_step_f1_point_eight():
    # P = 1, R = 2/3 gives F1 = 0.8
    br = assign_step_rewards(trajectory([step()], "x y"), "x y z", RewardConfig())
    assert br.per_step == [pytest.approx(0.8)]


def test_violation_in_the_middle():
    steps = [step(k=0), step(Role.DS, True, k=1), step(k=2)]
    # F1 0.5 with zero cost
    br = assign_step_rewards(trajectory(steps, "x"), "x y y", RewardConfig())
    assert br.r_global == pytest.approx(0.5)
    assert br.per_step == [0.0, -1.0, pytest.approx(0.5)]


def test_violation_at_terminal_step():
    steps = [step(k=0), step(Role.AG, True, k=1)]
    br = assign_step_rewards(trajectory(steps, "x"), "x y y", RewardConfig())
    assert br.per_step[-1] == pytest.approx(-0.5)


def test_global_reward_includes_cost():
    br = assign_step_rewards(trajectory([step()], "1982", rounds=3, retrievals=3), "1982", RewardConfig(0.1, 0.1))
    assert br.r_global == pytest.approx(0.8)
    assert br.step_keys == [(1, 0)]


def test_empty_trajectory():
    with pytest.raises(EmptyTrajectory):
        assign_step_rewards(trajectory([]), "x", RewardConfig())


@given(
    st.lists(st.booleans(), min_size=1, max_size=12),
    st.floats(0, 1),
    st.floats(0, 1),
    st.integers(0, 6),
    st.integers(0, 6),
)
def test_sum_identity(violations, alpha, beta, rounds, retrievals):
    steps = [step(violation=v, k=i) for i, v in enumerate(violations)]
    cfg = RewardConfig(alpha, beta)
    br = assign_step_rewards(trajectory(steps, "a b", rounds, retrievals), "a c", cfg)
    assert math.isclose(sum(br.per_step), br.r_global - sum(violations), abs_tol=1e-12)
    assert 0.0 <= br.r_perf <= 1.0
