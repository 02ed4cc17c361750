"""Round loop: plan a workflow for the first unsolved node, execute it, update the trace.

Every agent invocation (including fallbacks after a format violation) yields
exactly one ``StepRecord``; those records are what the trainer turns into
transitions.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .env.corpus import DEFAULT_TOP_K, Corpus
from .errors import BackendUnavailable, ConfigurationError, FormatViolation, LengthMismatch
from .policy.backends import PolicyBackend, act
from .policy.parsing import parse_output
from .trace import (
    GlobalState,
    Observation,
    Role,
    RoundContext,
    TraceNode,
    build_observation,
    new_state,
)
from .workflow import FALLBACK_PLAN, Decompose, ExecutorKind, Solve

REQUIRED_ROLES = (Role.PLANNER, Role.QR, Role.QDS, Role.QDP, Role.DS, Role.AG, Role.AS)
NESTED_DECOMPOSITION = "NestedDecomposition"
BACKEND_FAILURE = "BackendFailure"


@dataclass(frozen=True)
class EngineLimits:
    max_rounds: int = 3
    max_depth: int = 1
    max_retrievals: int = 3
    top_k: int = DEFAULT_TOP_K

    def __post_init__(self) -> None:
        for name in ("max_rounds", "max_depth", "max_retrievals", "top_k"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"engine.{name} must be >= 1")


@dataclass
class StepRecord:
    t: int
    k: int
    role: Role
    obs_digest: str
    action: str
    outcome: str
    format_violation: bool
    query: str = ""
    log_prob: Optional[float] = None
    action_index: Optional[int] = None
    solve_only: bool = False

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["role"] = self.role.value
        return rec

    @classmethod
    def from_record(cls, rec: Mapping) -> "StepRecord":
        names = cls.__dataclass_fields__
        data = {k: v for k, v in rec.items() if k in names}
        data["role"] = Role(data["role"])
        return cls(**data)


@dataclass
class TrajectoryResult:
    final_answer: str
    steps: list[StepRecord]
    rounds_used: int
    retrievals_used: int
    final_state: GlobalState
    truncated: bool = False
    query_id: str = ""

    def count(self, role: Role) -> int:
        return sum(1 for s in self.steps if s.role is role)


@dataclass
class _Run:
    state: GlobalState
    rng: Optional[np.random.Generator]
    steps: list[StepRecord] = field(default_factory=list)
    retrievals: int = 0


class Engine:
    def __init__(
        self,
        backends: Mapping[Role, PolicyBackend],
        corpus: Corpus,
        limits: EngineLimits = EngineLimits(),
        tolerate_backend_errors: bool = False,
        required_roles: Sequence[Role] = REQUIRED_ROLES,
    ):
        missing = [r.value for r in required_roles if r not in backends]
        if missing:
            raise ConfigurationError(f"no backend for roles: {', '.join(missing)}")
        for role in required_roles:
            if not backends[role].supports(role):
                raise ConfigurationError(f"{type(backends[role]).__name__} cannot act as {role}")
        self.backends = dict(backends)
        self.corpus = corpus
        self.limits = limits
        self.tolerate_backend_errors = tolerate_backend_errors

    # -- single agent invocation ------------------------------------------
    def _invoke(self, run: _Run, t: int, k: int, role: Role, obs: Observation, **parse_kw):
        """Run one agent step; returns (parsed action or None on violation)."""
        try:
            sample = act(self.backends[role], role, obs, run.rng)
        except BackendUnavailable:
            if not self.tolerate_backend_errors:
                raise
            run.steps.append(
                StepRecord(t, k, role, obs.digest(), "", BACKEND_FAILURE, True, obs.target_query, solve_only=obs.solve_only)
            )
            return None
        try:
            parsed = parse_output(role, sample.text, **parse_kw)
            outcome, violation = _describe(parsed), False
        except FormatViolation as exc:
            parsed, outcome, violation = None, exc.reason, True
        if violation is False and role is Role.PLANNER and obs.solve_only and isinstance(parsed, Decompose):
            parsed, outcome, violation = None, NESTED_DECOMPOSITION, True
        run.steps.append(
            StepRecord(
                t, k, role, obs.digest(), sample.text, outcome, violation, obs.target_query,
                sample.log_prob, sample.action_index, obs.solve_only,
            )
        )
        return parsed

    # -- workflow execution ----------------------------------------------
    def _solve(self, run: _Run, chain: Sequence[ExecutorKind], target: TraceNode, t: int, k: int) -> tuple[str, RoundContext, int]:
        state = run.state
        ctx = RoundContext()
        answer = ""
        for kind in chain:
            if kind is ExecutorKind.QR:
                obs = build_observation(state, ctx, target, Role.QR)
                rewritten = self._invoke(run, t, k, Role.QR, obs)
                if rewritten is not None:
                    ctx.append(Role.QR, rewritten)
            elif kind is ExecutorKind.R:
                obs = build_observation(state, ctx, target, Role.RA)
                query = obs.effective_query
                if run.retrievals >= self.limits.max_retrievals:
                    docs: tuple = ()
                    outcome = "budget exhausted"
                else:
                    docs = tuple(self.corpus.retrieve(query, self.limits.top_k))
                    run.retrievals += 1
                    outcome = "docs=" + ",".join(str(d.doc_id) for d in docs)
                run.steps.append(StepRecord(t, k, Role.RA, obs.digest(), query, outcome, False, obs.target_query))
                ctx.append(Role.RA, docs)
            elif kind is ExecutorKind.DS:
                obs = build_observation(state, ctx, target, Role.DS)
                ids = self._invoke(run, t, k, Role.DS, obs, max_id=len(obs.documents) - 1)
                if ids is not None:
                    ctx.append(Role.DS, tuple(d for i, d in enumerate(obs.documents) if i in ids))
            elif kind is ExecutorKind.AG:
                obs = build_observation(state, ctx, target, Role.AG)
                parsed = self._invoke(run, t, k, Role.AG, obs)
                answer = parsed if parsed is not None else ""
                ctx.append(Role.AG, answer)
                state.resolve_node(target.node_id, answer)
            else:
                raise ValueError(f"{kind} cannot appear in a solving chain")
            k += 1
        return answer, ctx, k

    def run(self, question: str, rng: Optional[np.random.Generator] = None, query_id: str = "") -> TrajectoryResult:
        state = new_state(question, self.limits.max_rounds)
        run = _Run(state, rng)
        k = 0
        while state.has_unsolved() and state.round < self.limits.max_rounds:
            state.round += 1
            t = state.round
            target = state.first_unsolved_node()
            ctx = RoundContext()
            obs = replace(
                build_observation(state, ctx, target, Role.PLANNER),
                solve_only=target.depth >= self.limits.max_depth,
            )
            plan = self._invoke(run, t, 0, Role.PLANNER, obs)
            if plan is None:
                plan = FALLBACK_PLAN
            k = 1
            if isinstance(plan, Decompose):
                role = Role.QDS if plan.kind is ExecutorKind.QDS else Role.QDP
                obs = build_observation(state, ctx, target, role)
                subs = self._invoke(run, t, k, role, obs)
                k += 1
                if subs is not None:
                    state.append_children(target.node_id, subs, plan.mode)
                    continue
                plan = FALLBACK_PLAN
            _, _, k = self._solve(run, plan.chain, target, t, k)

        truncated = state.has_unsolved()
        if len(state.trace) > 1:
            obs = build_observation(state, RoundContext(), state.trace.root, Role.AS)
            parsed = self._invoke(run, state.round, k, Role.AS, obs)
            final = parsed if parsed is not None else ""
            state.mark_delegated()
        else:
            final = state.trace.root.answer or ""
        return TrajectoryResult(final, run.steps, state.round, run.retrievals, state, truncated, query_id)


def _describe(parsed) -> str:
    if isinstance(parsed, Decompose):
        return f"decompose:{parsed.mode.value}"
    if isinstance(parsed, Solve):
        return "solve:" + ",".join(k.value for k in parsed.chain)
    if isinstance(parsed, frozenset):
        return "ids:" + ",".join(str(i) for i in sorted(parsed))
    if isinstance(parsed, list):
        return json.dumps(parsed)
    return str(parsed)


def run_inference(
    question: str,
    backends: Mapping[Role, PolicyBackend],
    corpus: Corpus,
    limits: EngineLimits = EngineLimits(),
    rng: Optional[np.random.Generator] = None,
    query_id: str = "",
    tolerate_backend_errors: bool = False,
) -> TrajectoryResult:
    return Engine(backends, corpus, limits, tolerate_backend_errors).run(question, rng, query_id)


_CHAIN_ROLES = {ExecutorKind.QR: Role.QR, ExecutorKind.DS: Role.DS, ExecutorKind.AG: Role.AG}


def execute_solve_chain(
    chain: Sequence[ExecutorKind],
    target: TraceNode,
    state: GlobalState,
    corpus: Corpus,
    backends: Mapping[Role, PolicyBackend],
    limits: EngineLimits = EngineLimits(),
    rng: Optional[np.random.Generator] = None,
    t: int = 1,
) -> tuple[str, RoundContext, list[StepRecord], int]:
    """Run one solving chain on ``target``; returns (answer, round context, steps, retrievals)."""
    needed = {_CHAIN_ROLES[k] for k in chain if k in _CHAIN_ROLES}
    engine = Engine(backends, corpus, limits, required_roles=[r for r in REQUIRED_ROLES if r in needed])
    run = _Run(state, rng)
    answer, ctx, _ = engine._solve(run, chain, target, t, 1)
    return answer, ctx, run.steps, run.retrievals


# -- trajectory JSONL -------------------------------------------------------

def emit_trajectory(
    result: TrajectoryResult,
    rewards: Optional[Sequence[float]] = None,
    advantages: Optional[Sequence[float]] = None,
    f1: Optional[float] = None,
    r_global: Optional[float] = None,
) -> list[str]:
    n = len(result.steps)
    for name, seq in (("rewards", rewards), ("advantages", advantages)):
        if seq is not None and len(seq) != n:
            raise LengthMismatch(f"{name} has {len(seq)} entries for {n} steps")
    lines = []
    for i, step in enumerate(result.steps):
        rec = {"type": "step", "query_id": result.query_id}
        rec.update(step.to_record())
        rec["reward"] = None if rewards is None else float(rewards[i])
        rec["advantage"] = None if advantages is None else float(advantages[i])
        lines.append(json.dumps(rec, sort_keys=True))
    summary = {
        "type": "summary",
        "query_id": result.query_id,
        "answer": result.final_answer,
        "f1": f1,
        "rounds": result.rounds_used,
        "retrievals": result.retrievals_used,
        "r_global": r_global,
        "truncated": result.truncated,
        "trace": result.final_state.snapshot(),
    }
    lines.append(json.dumps(summary, sort_keys=True))
    return lines


def load_trajectory(lines: Sequence[str]) -> tuple[list[StepRecord], dict]:
    steps, summary = [], {}
    for line in lines:
        if not line.strip():
            continue
        rec = json.loads(line)
        if rec.get("type") == "summary":
            summary = rec
        else:
            steps.append(StepRecord.from_record(rec))
    return steps, summary
