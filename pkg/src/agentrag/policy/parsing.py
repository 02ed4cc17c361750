"""Tag-protocol parsers: raw role output -> typed action.

Every parser raises ``FormatViolation`` on structural failure. The engine flags
a step for the format penalty exactly when this raises, so the penalty and the
parser can never disagree.
"""

from __future__ import annotations

import re
from typing import Optional

from ..errors import FormatViolation
from ..trace import Role
from ..workflow import parse_workflow

MAX_SUB_QUERIES = 4

MISSING_TAG = "MissingTag"
MULTIPLE_TAGS = "MultipleTags"
EMPTY = "Empty"
BAD_NUMBERING = "BadNumbering"
TOO_MANY = "TooMany"
OUT_OF_RANGE = "OutOfRange"
NON_INTEGER = "NonInteger"

_NUMBERED_RE = re.compile(r"<q(\d+)>(.*?)</q\1>", re.DOTALL)
_DOC_ID_RE = re.compile(r"(?:document\s*)?(\d+)", re.IGNORECASE)


def _single_tag(text: str, tag: str, allow_empty: bool = False) -> str:
    spans = re.findall(rf"<{tag}>(.*?)</{tag}>", text or "", re.DOTALL)
    if not spans:
        raise FormatViolation(MISSING_TAG, f"no <{tag}> span")
    if len(spans) > 1:
        raise FormatViolation(MULTIPLE_TAGS, f"{len(spans)} <{tag}> spans")
    inner = spans[0].strip()
    if not inner and not allow_empty:
        raise FormatViolation(EMPTY, f"empty <{tag}> span")
    return inner


def parse_sub_queries(text: str) -> list[str]:
    found = _NUMBERED_RE.findall(text or "")
    if not found:
        raise FormatViolation(MISSING_TAG, "no numbered <qN> spans")
    if len(found) > MAX_SUB_QUERIES:
        raise FormatViolation(TOO_MANY, f"{len(found)} sub-questions, limit {MAX_SUB_QUERIES}")
    numbers = [int(n) for n, _ in found]
    if numbers != list(range(1, len(found) + 1)):
        raise FormatViolation(BAD_NUMBERING, f"got tags {numbers}")
    subs = [" ".join(q.split()) for _, q in found]
    if any(not q for q in subs):
        raise FormatViolation(EMPTY, "empty sub-question")
    return subs


def parse_doc_ids(text: str, max_id: int) -> frozenset[int]:
    inner = _single_tag(text, "id", allow_empty=True)
    if not inner:
        return frozenset()
    ids = set()
    for token in inner.split(","):
        m = _DOC_ID_RE.fullmatch(token.strip())
        if m is None:
            raise FormatViolation(NON_INTEGER, f"{token.strip()!r} is not a document id")
        value = int(m.group(1))
        if not 0 <= value <= max_id:
            raise FormatViolation(OUT_OF_RANGE, f"id {value} outside [0, {max_id}]")
        ids.add(value)
    return frozenset(ids)


def parse_output(role: Role, text: str, max_id: Optional[int] = None):
    """Typed action for ``role``.

    Planner -> WorkflowPlan; QR -> str; QDS/QDP -> list[str];
    DS -> frozenset[int] (needs ``max_id``); AG/AS -> str.
    """
    role = Role(role)
    if role is Role.PLANNER:
        return parse_workflow(text)
    if role is Role.QR:
        return " ".join(_single_tag(text, "query").split())
    if role in (Role.QDS, Role.QDP):
        return parse_sub_queries(text)
    if role is Role.DS:
        if max_id is None:
            raise ValueError("DS parsing needs max_id")
        return parse_doc_ids(text, max_id)
    if role in (Role.AG, Role.AS):
        return " ".join(_single_tag(text, "answer").split())
    raise ValueError(f"{role} has no output protocol")
