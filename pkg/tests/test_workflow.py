import itertools
import time

import pytest

from agentrag.errors import FormatViolation
from agentrag.trace import DecomposeMode
from agentrag.workflow import (
    MENU,
    SOLVE_ACTIONS,
    Decompose,
    ExecutorKind as K,
    Rule,
    Solve,
    ValidationError,
    check,
    encode,
    parse_workflow,
    validate,
)

# alphabet for the exhaustive oracle: the six real tokens plus one unknown
ALPHABET = ("QR", "R", "DS", "AG", "QDS", "QDP", "X")


def oracle(tokens):
    """Rule table written out independently of the implementation, in precedence order."""
    decomposers = [t for t in tokens if t in ("QDS", "QDP")]
    if decomposers and len(tokens) > 1:
        return "DecomposeNotAlone"
    if any(t not in ("QR", "R", "DS", "AG", "QDS", "QDP") for t in tokens):
        return "UnknownToken"
    if len(tokens) != len(set(tokens)):
        return "Duplicate"
    if len(tokens) == 0:
        return "Empty"
    if tokens in (("QDS",), ("QDP",)):
        return None
    if "DS" in tokens:
        r_before = any(t == "R" for t in tokens[: tokens.index("DS")])
        if not r_before:
            return "DsWithoutPriorR"
    if tokens[-1] != "AG":
        return "LastNotAG"
    return None


def all_sequences(max_len=4):
    for n in range(max_len + 1):
        yield from itertools.product(ALPHABET, repeat=n)


def test_sequence_count():
    assert sum(1 for _ in all_sequences()) == 1 + 7 + 49 + 343 + 2401


def test_validate_agrees_with_oracle_everywhere():
    start = time.perf_counter()
    disagreements = []
    for seq in all_sequences():
        expected = oracle(seq)
        got = check(seq)
        if (got.value if got else None) != expected:
            disagreements.append((seq, got, expected))
    assert disagreements == []
    assert time.perf_counter() - start < 1.0


def test_menu_is_the_legal_plans_with_rewrite_first():
    ok = {seq for seq in all_sequences() if check(seq) is None}
    # QR may legally follow R; the menu keeps the rewrite-first ordering only
    assert len(ok) == 11
    canonical = {s for s in ok if "QR" not in s[1:]}
    assert {validate(list(s)) for s in canonical} == set(MENU)
    assert len(MENU) == 8 and len(SOLVE_ACTIONS) == 6


@pytest.mark.parametrize(
    "tokens, rule",
    [
        (["QDS", "AG"], Rule.DECOMPOSE_NOT_ALONE),
        (["DS", "AG"], Rule.DS_WITHOUT_PRIOR_R),
        (["R", "DS"], Rule.LAST_NOT_AG),
        (["R", "R", "AG"], Rule.DUPLICATE),
        ([], Rule.EMPTY),
        (["R", "ag"], Rule.UNKNOWN_TOKEN),
    ],
)
def test_validate_rejections(tokens, rule):
    with pytest.raises(ValidationError) as info:
        validate(tokens)
    assert info.value.rule is rule
    assert isinstance(info.value, FormatViolation)


def test_validate_accepts_qr_r_ag():
    assert validate(["QR", "R", "AG"]) == Solve((K.QR, K.R, K.AG))


@pytest.mark.parametrize(
    "text, plan",
    [
        ("<workflow>QDS</workflow>", Decompose(DecomposeMode.SERIAL)),
        ("<workflow>R,DS,AG</workflow>", Solve((K.R, K.DS, K.AG))),
        ("<workflow>R,AG</workflow>", Solve((K.R, K.AG))),
        ("Plan: <workflow> R , AG </workflow>", Solve((K.R, K.AG))),
    ],
)
def test_parse_workflow(text, plan):
    assert parse_workflow(text) == plan


@pytest.mark.parametrize(
    "text, reason",
    [
        ("I think QDS", "MissingTag"),
        ("<workflow>R,AG</workflow><workflow>AG</workflow>", "MultipleTags"),
        ("<workflow>r,ag</workflow>", "UnknownToken"),
        ("<workflow></workflow>", "Empty"),
    ],
)
def test_parse_workflow_violations(text, reason):
    with pytest.raises(FormatViolation) as info:
        parse_workflow(text)
    assert info.value.reason == reason


def test_encode_examples():
    assert encode(Solve((K.R, K.AG))) == "<workflow>R,AG</workflow>"
    assert encode(Decompose(DecomposeMode.PARALLEL)) == "<workflow>QDP</workflow>"
    assert encode(Solve((K.QR, K.R, K.DS, K.AG))) == "<workflow>QR,R,DS,AG</workflow>"


@pytest.mark.parametrize("plan", MENU)
def test_encode_round_trip(plan):
    assert parse_workflow(encode(plan)) == plan
