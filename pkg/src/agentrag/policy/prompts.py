"""Role prompt templates and rendering."""

from __future__ import annotations

import string
from functools import lru_cache
from importlib import resources

from ..errors import UnfilledPlaceholder, UnsupportedRole
from ..trace import Observation, Role

TEMPLATE_FILES = {
    Role.PLANNER: "planner.txt",
    Role.QR: "query_rewrite.txt",
    Role.QDP: "decompose_parallel.txt",
    Role.QDS: "decompose_serial.txt",
    Role.DS: "document_selection.txt",
    Role.AG: "answer_generation.txt",
    Role.AS: "answer_summarization.txt",
}
PLACEHOLDERS = frozenset({"query", "doc_content", "max_id", "observation"})
NO_DOCUMENTS = "(no documents)"
NO_OBSERVATIONS = "(no resolved sub-questions)"


@lru_cache(maxsize=None)
def template(role: Role) -> str:
    role = Role(role)
    if role not in TEMPLATE_FILES:
        raise UnsupportedRole(f"{role} has no prompt")
    return resources.files(__package__).joinpath("templates", TEMPLATE_FILES[role]).read_text(encoding="utf-8")


def template_fields(text: str) -> set[str]:
    return {name for _, name, _, _ in string.Formatter().parse(text) if name is not None}


def format_documents(docs) -> str:
    return "\n".join(f"Document{i}: {d.text}" for i, d in enumerate(docs))


def _format_pairs(pairs) -> str:
    return "\n".join(
        f"Sub-question {i}: {q}\nAnswer {i}: {a}" for i, (q, a) in enumerate(pairs, start=1)
    )


def _values(role: Role, obs: Observation) -> dict[str, str]:
    if role is Role.QR:
        query = obs.target_query
        if obs.global_selection and query.strip():
            query += "\nResolved earlier sub-questions:\n" + _format_pairs(obs.global_selection)
        return {"query": query}
    if role in (Role.PLANNER, Role.QDS, Role.QDP):
        return {"query": obs.target_query}
    if role is Role.DS:
        docs = obs.documents
        return {
            "query": obs.effective_query,
            "doc_content": format_documents(docs),
            "max_id": str(len(docs) - 1) if docs else "",
        }
    if role is Role.AG:
        docs = obs.documents
        return {"query": obs.effective_query, "doc_content": format_documents(docs) if docs else NO_DOCUMENTS}
    if role is Role.AS:
        pairs = obs.global_selection
        return {"query": obs.target_query, "observation": _format_pairs(pairs) if pairs else NO_OBSERVATIONS}
    raise UnsupportedRole(f"{role} has no prompt")


def render_prompt(role: Role, obs: Observation) -> str:
    role = Role(role)
    if obs.role is not role:
        raise ValueError(f"observation is for {obs.role}, not {role}")
    text = template(role)
    fields = template_fields(text)
    unknown = fields - PLACEHOLDERS
    if unknown:
        raise UnfilledPlaceholder(f"unknown placeholders {sorted(unknown)}")
    values = _values(role, obs)
    for name in fields:
        if not values.get(name, "").strip():
            raise UnfilledPlaceholder(f"{role} prompt: no value for {{{name}}}")
    return text.format_map(values)
