"""Global state shared by all agents: the execution trace of sub-queries.

The trace is the blackboard. The planner picks the first unsolved node each
round, decomposers append children to it, and the answer generator writes
the answer slot. Agents never see the whole state; ``build_observation``
hands each role only the slice it needs.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Iterator, Optional, Sequence

from .errors import (
    AlreadyResolved,
    EmptyQuestion,
    MissingContext,
    TooManySubQueries,
    UnknownNode,
    UnknownParent,
)

if TYPE_CHECKING:
    from .env.corpus import Document

MAX_SUB_QUERIES = 4
DEFAULT_MAX_ROUNDS = 3
# answer written into decomposed parents once the final synthesis exists
DELEGATED = "delegated"


class Role(str, enum.Enum):
    PLANNER = "Planner"
    QDS = "QDS"
    QDP = "QDP"
    QR = "QR"
    RA = "RA"
    DS = "DS"
    AG = "AG"
    AS = "AS"

    @property
    def trainable(self) -> bool:
        return self is not Role.RA

    def __str__(self) -> str:
        return self.value


class DecomposeMode(str, enum.Enum):
    SERIAL = "serial"
    PARALLEL = "parallel"

    def __str__(self) -> str:
        return self.value


@dataclass
class TraceNode:
    node_id: int
    sub_query: str
    answer: Optional[str] = None
    depth: int = 0
    parent_id: Optional[int] = None
    # set once the node has been split into children
    decomposition: Optional[DecomposeMode] = None

    @property
    def solved(self) -> bool:
        return self.answer is not None

    @property
    def pending(self) -> bool:
        """Unsolved and still waiting for its own round (not delegated to children)."""
        return self.answer is None and self.decomposition is None

    def to_record(self) -> dict:
        return {
            "node_id": self.node_id,
            "parent_id": self.parent_id,
            "depth": self.depth,
            "sub_query": self.sub_query,
            "answer": self.answer,
        }


class ExecutionTrace:
    """Insertion-ordered ledger of trace nodes with strictly increasing ids."""

    def __init__(self, nodes: Sequence[TraceNode] = ()):
        self._nodes: dict[int, TraceNode] = {}
        for node in nodes:
            self._add(node)

    def _add(self, node: TraceNode) -> None:
        if self._nodes and node.node_id <= max(self._nodes):
            raise ValueError(f"node ids must increase, got {node.node_id}")
        self._nodes[node.node_id] = node

    def __iter__(self) -> Iterator[TraceNode]:
        return iter(self._nodes.values())

    def __len__(self) -> int:
        return len(self._nodes)

    def __contains__(self, node_id: object) -> bool:
        return node_id in self._nodes

    def get(self, node_id: int) -> TraceNode:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNode(f"no node {node_id}") from None

    @property
    def root(self) -> TraceNode:
        return next(iter(self._nodes.values()))

    def next_id(self) -> int:
        return max(self._nodes) + 1 if self._nodes else 0

    def children(self, node_id: int) -> list[TraceNode]:
        return [n for n in self if n.parent_id == node_id]

    def to_records(self) -> list[dict]:
        return [n.to_record() for n in self]


@dataclass
class GlobalState:
    q_origin: str
    trace: ExecutionTrace
    round: int = 0
    max_rounds: int = DEFAULT_MAX_ROUNDS

    def first_unsolved_node(self) -> Optional[TraceNode]:
        """Pending node with the smallest id, or None when nothing is left to solve.

        Decomposed parents are skipped: they are answered through their children.
        """
        for node in self.trace:
            if node.pending:
                return node
        return None

    def has_unsolved(self) -> bool:
        return self.first_unsolved_node() is not None

    def append_children(
        self,
        parent: int,
        sub_queries: Sequence[str],
        mode: DecomposeMode = DecomposeMode.SERIAL,
    ) -> "GlobalState":
        if parent not in self.trace:
            raise UnknownParent(f"no node {parent}")
        parent_node = self.trace.get(parent)
        if parent_node.solved or parent_node.decomposition is not None:
            raise UnknownParent(f"node {parent} is not an open node")
        if not sub_queries:
            raise TooManySubQueries("at least one sub-query is required")
        if len(sub_queries) > MAX_SUB_QUERIES:
            raise TooManySubQueries(
                f"{len(sub_queries)} sub-queries, limit is {MAX_SUB_QUERIES}"
            )
        parent_node.decomposition = DecomposeMode(mode)
        for q in sub_queries:
            self.trace._add(
                TraceNode(
                    node_id=self.trace.next_id(),
                    sub_query=q,
                    depth=parent_node.depth + 1,
                    parent_id=parent,
                )
            )
        return self

    def resolve_node(self, node: int, answer: str) -> "GlobalState":
        target = self.trace.get(node)
        if target.solved:
            raise AlreadyResolved(f"node {node} already answered")
        target.answer = answer
        return self

    def mark_delegated(self) -> None:
        for node in self.trace:
            if node.decomposition is not None and node.answer is None:
                node.answer = DELEGATED

    def resolved_pairs(self, exclude_delegated: bool = True) -> list[tuple[str, str]]:
        return [
            (n.sub_query, n.answer)
            for n in self.trace
            if n.answer is not None
            and not (exclude_delegated and n.decomposition is not None)
        ]

    def snapshot(self) -> list[dict]:
        return self.trace.to_records()


def new_state(question: str, max_rounds: int = DEFAULT_MAX_ROUNDS) -> GlobalState:
    if not question or not question.strip():
        raise EmptyQuestion("question is blank")
    root = TraceNode(node_id=0, sub_query=question, depth=0)
    return GlobalState(q_origin=question, trace=ExecutionTrace([root]), max_rounds=max_rounds)


ContextEntry = tuple[Role, Any]


@dataclass
class RoundContext:
    """Intra-round working memory: outputs of the executors run so far this round."""

    entries: list[ContextEntry] = field(default_factory=list)

    def append(self, role: Role, payload: Any) -> None:
        self.entries.append((role, payload))

    def clear(self) -> None:
        self.entries.clear()

    def latest(self, role: Role) -> Optional[ContextEntry]:
        for entry in reversed(self.entries):
            if entry[0] is role:
                return entry
        return None


@dataclass(frozen=True)
class Observation:
    role: Role
    target_query: str
    local_context: tuple[ContextEntry, ...] = ()
    global_selection: tuple[tuple[str, str], ...] = ()
    depth: int = 0
    # decomposition mode of the root; only filled for AS
    mode: Optional[DecomposeMode] = None
    # set by the engine when nested decomposition is not allowed
    solve_only: bool = False

    @property
    def rewritten_query(self) -> Optional[str]:
        for role, payload in reversed(self.local_context):
            if role is Role.QR:
                return payload
        return None

    @property
    def effective_query(self) -> str:
        return self.rewritten_query or self.target_query

    @property
    def documents(self) -> tuple["Document", ...]:
        for role, payload in reversed(self.local_context):
            if role in (Role.RA, Role.DS):
                return tuple(payload)
        return ()

    def digest(self) -> str:
        def enc(payload: Any) -> Any:
            if isinstance(payload, (list, tuple)):
                return [[d.doc_id, d.text] for d in payload]
            return payload

        blob = json.dumps(
            {
                "role": self.role.value,
                "q": self.target_query,
                "ctx": [[r.value, enc(p)] for r, p in self.local_context],
                "sel": [list(p) for p in self.global_selection],
                "depth": self.depth,
                "mode": self.mode.value if self.mode else None,
                "solve_only": self.solve_only,
            },
            sort_keys=True,
        )
        return hashlib.sha1(blob.encode("utf-8")).hexdigest()[:16]


def _prior_serial_siblings(state: GlobalState, target: TraceNode) -> tuple[tuple[str, str], ...]:
    if target.parent_id is None:
        return ()
    parent = state.trace.get(target.parent_id)
    # parallel children are independent by construction and do not share answers
    if parent.decomposition is not DecomposeMode.SERIAL:
        return ()
    return tuple(
        (n.sub_query, n.answer)
        for n in state.trace.children(parent.node_id)
        if n.node_id < target.node_id and n.answer is not None
    )


def build_observation(
    state: GlobalState, ctx: RoundContext, target: TraceNode, role: Role
) -> Observation:
    """Role-scoped view of (state, round context) for one agent invocation."""
    role = Role(role)
    q = target.sub_query
    rewrites = tuple(e for e in ctx.entries if e[0] is Role.QR)

    if role in (Role.PLANNER, Role.QDS, Role.QDP):
        return Observation(role, q, depth=target.depth)
    if role is Role.QR:
        return Observation(role, q, global_selection=_prior_serial_siblings(state, target), depth=target.depth)
    if role is Role.RA:
        return Observation(role, q, local_context=rewrites[-1:], depth=target.depth)
    if role is Role.DS:
        retrieved = ctx.latest(Role.RA)
        if retrieved is None:
            raise MissingContext("DS needs retrieved documents in the round context")
        return Observation(role, q, local_context=rewrites[-1:] + (retrieved,), depth=target.depth)
    if role is Role.AG:
        docs = ctx.latest(Role.DS) or ctx.latest(Role.RA)
        local = rewrites[-1:] + ((docs,) if docs is not None else ())
        return Observation(role, q, local_context=local, depth=target.depth)
    if role is Role.AS:
        return Observation(
            role,
            state.q_origin,
            global_selection=tuple(state.resolved_pairs()),
            depth=0,
            mode=state.trace.root.decomposition,
        )
    raise ValueError(f"unhandled role {role}")  # pragma: no cover
