"""Planner action space: workflow grammar, validation and the tag wire format.

A plan is either a decomposition directive (``QDS`` or ``QDP`` alone) or a
solving chain over ``QR, R, DS, AG``. The planner emits it as
``<workflow>R,DS,AG</workflow>``.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .errors import FormatViolation
from .trace import DecomposeMode


class ExecutorKind(str, enum.Enum):
    QR = "QR"
    R = "R"
    DS = "DS"
    AG = "AG"
    QDS = "QDS"
    QDP = "QDP"

    def __str__(self) -> str:
        return self.value


class Rule(str, enum.Enum):
    DECOMPOSE_NOT_ALONE = "DecomposeNotAlone"
    UNKNOWN_TOKEN = "UnknownToken"
    DUPLICATE = "Duplicate"
    EMPTY = "Empty"
    DS_WITHOUT_PRIOR_R = "DsWithoutPriorR"
    LAST_NOT_AG = "LastNotAG"

    def __str__(self) -> str:
        return self.value


class ValidationError(FormatViolation):
    def __init__(self, rule: Rule, detail: str = ""):
        self.rule = Rule(rule)
        super().__init__(self.rule.value, detail)


DECOMPOSERS = {ExecutorKind.QDS: DecomposeMode.SERIAL, ExecutorKind.QDP: DecomposeMode.PARALLEL}
_TOKENS = {k.value: k for k in ExecutorKind}


@dataclass(frozen=True)
class Decompose:
    mode: DecomposeMode

    @property
    def kind(self) -> ExecutorKind:
        return ExecutorKind.QDS if self.mode is DecomposeMode.SERIAL else ExecutorKind.QDP


@dataclass(frozen=True)
class Solve:
    chain: tuple[ExecutorKind, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "chain", tuple(ExecutorKind(k) for k in self.chain))


WorkflowPlan = Union[Decompose, Solve]


def check(tokens: Sequence[str]) -> Optional[Rule]:
    """First violated rule for a raw token sequence, or None when it is a legal plan."""
    tokens = [t.value if isinstance(t, ExecutorKind) else t for t in tokens]
    if any(t in ("QDS", "QDP") for t in tokens) and len(tokens) > 1:
        return Rule.DECOMPOSE_NOT_ALONE
    if any(t not in _TOKENS for t in tokens):
        return Rule.UNKNOWN_TOKEN
    if len(set(tokens)) != len(tokens):
        return Rule.DUPLICATE
    if not tokens:
        return Rule.EMPTY
    if tokens[0] in ("QDS", "QDP"):
        return None
    if "DS" in tokens and ("R" not in tokens or tokens.index("R") > tokens.index("DS")):
        return Rule.DS_WITHOUT_PRIOR_R
    if tokens[-1] != "AG":
        return Rule.LAST_NOT_AG
    return None


def validate(tokens: Sequence[str]) -> WorkflowPlan:
    """Build the plan for ``tokens`` or raise ``ValidationError`` naming the first broken rule."""
    rule = check(tokens)
    if rule is not None:
        raise ValidationError(rule, ",".join(str(t) for t in tokens))
    kinds = [_TOKENS[str(t)] for t in tokens]
    if kinds[0] in DECOMPOSERS:
        return Decompose(DECOMPOSERS[kinds[0]])
    return Solve(tuple(kinds))


_WORKFLOW_RE = re.compile(r"<workflow>(.*?)</workflow>", re.DOTALL)


def parse_workflow(text: str) -> WorkflowPlan:
    spans = _WORKFLOW_RE.findall(text or "")
    if not spans:
        raise FormatViolation("MissingTag", "no <workflow> span")
    if len(spans) > 1:
        raise FormatViolation("MultipleTags", f"{len(spans)} <workflow> spans")
    inner = spans[0].strip()
    tokens = [t.strip() for t in inner.split(",")] if inner else []
    return validate(tokens)


def encode(plan: WorkflowPlan) -> str:
    if isinstance(plan, Decompose):
        body = plan.kind.value
    else:
        body = ",".join(k.value for k in plan.chain)
    return f"<workflow>{body}</workflow>"


def plan_label(plan: WorkflowPlan) -> str:
    """Compact identifier used in metric column names, e.g. ``R_DS_AG``."""
    if isinstance(plan, Decompose):
        return plan.kind.value
    return "_".join(k.value for k in plan.chain)


_K = ExecutorKind
# the toy planner's discrete action set: every legal plan, in a fixed order
MENU: tuple[WorkflowPlan, ...] = (
    Solve((_K.AG,)),
    Solve((_K.QR, _K.AG)),
    Solve((_K.R, _K.AG)),
    Solve((_K.QR, _K.R, _K.AG)),
    Solve((_K.R, _K.DS, _K.AG)),
    Solve((_K.QR, _K.R, _K.DS, _K.AG)),
    Decompose(DecomposeMode.SERIAL),
    Decompose(DecomposeMode.PARALLEL),
)
N_ACTIONS = len(MENU)
SOLVE_ACTIONS = tuple(i for i, p in enumerate(MENU) if isinstance(p, Solve))
FALLBACK_PLAN = Solve((_K.R, _K.AG))


def menu_index(plan: WorkflowPlan) -> int:
    return MENU.index(plan)


def plan_class(plan: WorkflowPlan) -> str:
    """Coarse class used for gold-plan comparisons: SolveDirect, QDS or QDP."""
    if isinstance(plan, Decompose):
        return plan.kind.value
    return "SolveDirect"
