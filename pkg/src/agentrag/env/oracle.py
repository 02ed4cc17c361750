"""Scripted executors that answer from the synthetic world.

At zero noise each role emits the correct tagged output for its observation.
Two independent noise channels model imperfect executors:

* ``noise_rate``: the output is garbled so that it fails the role's tag
  protocol (and earns the format penalty);
* ``error_rate``: the output is well-formed but semantically wrong
  (a wrong entity substituted somewhere).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import InvalidParams, UnsupportedRole
from ..trace import DecomposeMode, Observation, Role
from .world import (
    PARALLEL_JOIN,
    PRONOUNS,
    RELATIONS,
    ConjunctionForm,
    Fact,
    SerialForm,
    World,
    parse_question,
    single_question,
)

IDK = "I don't know"
ORACLE_ROLES = frozenset({Role.QR, Role.QDS, Role.QDP, Role.DS, Role.AG, Role.AS})


@dataclass(frozen=True)
class OracleConfig:
    noise_rate: float = 0.0
    seed: int = 0
    error_rate: float = 0.0

    def __post_init__(self) -> None:
        for name in ("noise_rate", "error_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidParams(f"{name} must be in [0, 1], got {value}")


def _fact_doc(world: World, fact: Fact) -> Optional[tuple[str, int]]:
    if fact.is_pronoun:
        return None
    return world.lookup(fact.relation, fact.subject)


def relevant_doc_ids(world: World, query: str) -> set[int]:
    """Ids of the fact documents needed to answer ``query`` (as far as it is resolvable)."""
    form = parse_question(query)
    ids: set[int] = set()
    if isinstance(form, Fact):
        hit = _fact_doc(world, form)
        if hit:
            ids.add(hit[1])
    elif isinstance(form, SerialForm):
        hit = _fact_doc(world, form.first)
        if hit:
            ids.add(hit[1])
            second = world.lookup(form.second_relation, hit[0])
            if second:
                ids.add(second[1])
    elif isinstance(form, ConjunctionForm):
        for fact in form.facts:
            hit = _fact_doc(world, fact)
            if hit:
                ids.add(hit[1])
    return ids


def read_answer(world: World, query: str, doc_ids: set[int]) -> str:
    """Answer ``query`` using only facts whose documents are in ``doc_ids``.

    The reader chains across documents for serial questions and answers each
    part of a conjunction it finds support for.
    """
    form = parse_question(query)

    def read(fact: Fact) -> Optional[str]:
        hit = _fact_doc(world, fact)
        if hit and hit[1] in doc_ids:
            return hit[0]
        return None

    if isinstance(form, Fact):
        return read(form) or IDK
    if isinstance(form, SerialForm):
        mid = read(form.first)
        if mid is None:
            return IDK
        return read(Fact(form.second_relation, mid)) or IDK
    if isinstance(form, ConjunctionForm):
        found = [a for a in (read(f) for f in form.facts) if a]
        return PARALLEL_JOIN.join(found) if found else IDK
    return IDK


def decompose(query: str) -> list[str]:
    form = parse_question(query)
    if isinstance(form, SerialForm):
        first = form.first
        bridge = RELATIONS[first.relation].object_type
        return [
            single_question(first.relation, first.subject),
            single_question(form.second_relation, PRONOUNS[bridge]),
        ]
    if isinstance(form, ConjunctionForm):
        return [single_question(f.relation, f.subject) for f in form.facts]
    return [" ".join(query.split())]


def rewrite(query: str, antecedents: tuple[tuple[str, str], ...]) -> str:
    """Substitute the latest resolved antecedent for a pronoun; identity otherwise."""
    query = " ".join(query.split())
    if not antecedents:
        return query
    answer = antecedents[-1][1]
    for pronoun in PRONOUNS.values():
        if pronoun in query:
            return query.replace(pronoun, answer, 1)
    return query


def synthesize(pairs: tuple[tuple[str, str], ...], mode: Optional[DecomposeMode]) -> str:
    answers = [a for _, a in pairs if a]
    if not answers:
        return IDK
    if mode is DecomposeMode.PARALLEL:
        return PARALLEL_JOIN.join(answers)
    # a serial chain is answered by its last hop
    return answers[-1]


def _answer_type(world: World, query: str) -> str:
    form = parse_question(query)
    if isinstance(form, Fact):
        return RELATIONS[form.relation].object_type
    if isinstance(form, SerialForm):
        return RELATIONS[form.second_relation].object_type
    if isinstance(form, ConjunctionForm):
        return RELATIONS[form.facts[0].relation].object_type
    return "person"


def _random_entity(world: World, etype: str, rng: np.random.Generator, avoid: str = "") -> str:
    pool = [e for e in world.entities.get(etype) or world.entities["person"] if e.lower() != avoid.lower()]
    if not pool:
        return "Nobody"
    return pool[int(rng.integers(len(pool)))]


def _swap_subject(world: World, query: str, rng: np.random.Generator) -> str:
    form = parse_question(query)
    fact = None
    if isinstance(form, Fact):
        fact = form
    elif isinstance(form, SerialForm):
        fact = form.first
    elif isinstance(form, ConjunctionForm):
        fact = form.facts[0]
    if fact is None:
        return query
    etype = RELATIONS[fact.relation].subject_type
    replacement = _random_entity(world, etype, rng, avoid=fact.subject)
    return query.replace(fact.subject, replacement, 1)


def _correct(role: Role, obs: Observation, world: World) -> str:
    if role is Role.QR:
        return f"<query>{rewrite(obs.target_query, obs.global_selection)}</query>"
    if role in (Role.QDS, Role.QDP):
        subs = decompose(obs.target_query)
        return "\n".join(f"<q{i}>{q}</q{i}>" for i, q in enumerate(subs, start=1))
    if role is Role.DS:
        wanted = relevant_doc_ids(world, obs.effective_query)
        ids = [i for i, d in enumerate(obs.documents) if d.doc_id in wanted]
        return "<id>" + ", ".join(str(i) for i in ids) + "</id>"
    if role is Role.AG:
        docs = {d.doc_id for d in obs.documents}
        return f"<answer>{read_answer(world, obs.effective_query, docs)}</answer>"
    if role is Role.AS:
        return f"<answer>{synthesize(obs.global_selection, obs.mode)}</answer>"
    raise UnsupportedRole(f"no scripted executor for {role}")


def _wrong(role: Role, obs: Observation, world: World, rng: np.random.Generator) -> str:
    """Well-formed but semantically wrong output."""
    if role is Role.QR:
        rewritten = rewrite(obs.target_query, obs.global_selection)
        form = parse_question(rewritten)
        if isinstance(form, Fact) and form.is_pronoun:
            etype = next(t for t, p in PRONOUNS.items() if p == form.subject.lower())
            rewritten = rewritten.replace(form.subject, _random_entity(world, etype, rng), 1)
        else:
            rewritten = _swap_subject(world, rewritten, rng)
        return f"<query>{rewritten}</query>"
    if role in (Role.QDS, Role.QDP):
        subs = decompose(obs.target_query)
        subs[0] = _swap_subject(world, subs[0], rng)
        return "\n".join(f"<q{i}>{q}</q{i}>" for i, q in enumerate(subs, start=1))
    if role is Role.DS:
        wanted = relevant_doc_ids(world, obs.effective_query)
        others = [i for i, d in enumerate(obs.documents) if d.doc_id not in wanted]
        picked = [others[int(rng.integers(len(others)))]] if others else []
        return "<id>" + ", ".join(str(i) for i in picked) + "</id>"
    if role is Role.AG:
        docs = {d.doc_id for d in obs.documents}
        right = read_answer(world, obs.effective_query, docs)
        return f"<answer>{_random_entity(world, _answer_type(world, obs.effective_query), rng, avoid=right)}</answer>"
    if role is Role.AS:
        right = synthesize(obs.global_selection, obs.mode)
        return f"<answer>{_random_entity(world, _answer_type(world, obs.target_query), rng, avoid=right)}</answer>"
    raise UnsupportedRole(f"no scripted executor for {role}")  # pragma: no cover


def _garbled(role: Role, obs: Observation, world: World, rng: np.random.Generator) -> str:
    """Output that breaks the role's tag protocol."""
    if role is Role.QR:
        return f"Rewritten query: {obs.target_query}"
    if role in (Role.QDS, Role.QDP):
        subs = decompose(obs.target_query)
        if rng.random() < 0.5:
            return "\n".join(subs)
        return "\n".join(f"<q{i + 2}>{q}</q{i + 2}>" for i, q in enumerate(subs))
    if role is Role.DS:
        if rng.random() < 0.5:
            return "The helpful documents are the first ones."
        return "<id>first, second</id>"
    if role in (Role.AG, Role.AS):
        return f"Answer: {IDK}"
    raise UnsupportedRole(f"no scripted executor for {role}")  # pragma: no cover


def scripted_executor(
    role: Role,
    obs: Observation,
    world: World,
    oracle: OracleConfig = OracleConfig(),
    rng: Optional[np.random.Generator] = None,
) -> str:
    role = Role(role)
    if role not in ORACLE_ROLES:
        raise UnsupportedRole(f"no scripted executor for {role}")
    if oracle.noise_rate == 0.0 and oracle.error_rate == 0.0:
        return _correct(role, obs, world)
    if rng is None:
        rng = np.random.default_rng(oracle.seed)
    if rng.random() < oracle.noise_rate:
        return _garbled(role, obs, world, rng)
    if rng.random() < oracle.error_rate:
        return _wrong(role, obs, world, rng)
    return _correct(role, obs, world)
