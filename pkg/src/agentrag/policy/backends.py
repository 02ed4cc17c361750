"""Policy backends: where each role's action text comes from."""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Protocol, Union

import httpx
import numpy as np

from ..env.oracle import ORACLE_ROLES, OracleConfig, scripted_executor
from ..env.world import World
from ..errors import BackendUnavailable, UnsupportedRole
from ..trace import Observation, Role
from ..workflow import MENU, encode
from .prompts import render_prompt
from .toy import SOLVE_MASK, ToyPlannerPolicy, featurize

log = logging.getLogger(__name__)

LLM_ROLES = frozenset(r for r in Role if r is not Role.RA)


@dataclass(frozen=True)
class ActionSample:
    text: str
    log_prob: Optional[float] = None
    action_index: Optional[int] = None

    def __post_init__(self) -> None:
        if self.log_prob is not None and self.log_prob > 0:
            raise ValueError("log_prob must be <= 0")


class PolicyBackend(Protocol):
    def supports(self, role: Role) -> bool: ...

    def act(self, role: Role, obs: Observation, rng: Optional[np.random.Generator] = None) -> ActionSample: ...


def act(backend: PolicyBackend, role: Role, obs: Observation, rng: Optional[np.random.Generator] = None) -> ActionSample:
    role = Role(role)
    if not backend.supports(role):
        raise UnsupportedRole(f"{type(backend).__name__} does not act as {role}")
    return backend.act(role, obs, rng)


class ReplayBackend:
    """Deterministic lookup of canned outputs keyed by (role, target query).

    ``script`` entries are dicts with ``role``, ``output`` and optionally
    ``query``; an entry without a query is the role's default.
    """

    def __init__(self, script: Iterable[Mapping]):
        self._table: dict[tuple[Role, Optional[str]], str] = {}
        for entry in script:
            key = (Role(entry["role"]), entry.get("query"))
            self._table[key] = entry["output"]

    def supports(self, role: Role) -> bool:
        # a script may omit roles it never reaches; a missing entry fails at act time
        return role in LLM_ROLES

    def act(self, role, obs, rng=None):
        for key in ((role, obs.target_query), (role, None)):
            if key in self._table:
                return ActionSample(self._table[key])
        raise BackendUnavailable(f"replay script has no {role} output for {obs.target_query!r}")


class OracleBackend:
    """Scripted executors computed from the synthetic world."""

    def __init__(self, world: World, oracle: OracleConfig = OracleConfig()):
        self.world = world
        self.oracle = oracle

    def supports(self, role: Role) -> bool:
        return role in ORACLE_ROLES

    def act(self, role, obs, rng=None):
        return ActionSample(scripted_executor(role, obs, self.world, self.oracle, rng))


class ToyPlannerBackend:
    def __init__(self, policy: ToyPlannerPolicy, greedy: bool = False):
        self.policy = policy
        self.greedy = greedy

    def supports(self, role: Role) -> bool:
        return role is Role.PLANNER

    def act(self, role, obs, rng=None):
        if rng is None and not self.greedy:
            raise ValueError("sampling from the toy planner needs an rng")
        x = featurize(obs.target_query, self.policy.feature_dim)
        mask = SOLVE_MASK if obs.solve_only else None
        index, logp = self.policy.sample(x, rng, mask=mask, greedy=self.greedy)
        return ActionSample(encode(MENU[index]), log_prob=logp, action_index=index)


DEFAULT_TOKEN_ENV = "AGENTRAG_API_KEY"


class RemoteBackend:
    """Chat-completion endpoint; one request per action, retried with exponential backoff."""

    def __init__(
        self,
        endpoint_url: str,
        model: str = "default",
        token: Optional[str] = None,
        token_env: str = DEFAULT_TOKEN_ENV,
        temperature: float = 0.0,
        max_tokens: int = 256,
        timeout: float = 30.0,
        retries: int = 2,
        backoff: float = 0.5,
        client: Optional[httpx.Client] = None,
        sleep=time.sleep,
    ):
        self.endpoint_url = endpoint_url
        self.model = model
        self.token = token if token is not None else os.environ.get(token_env)
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.retries = retries
        self.backoff = backoff
        self._client = client or httpx.Client(timeout=timeout)
        self._sleep = sleep

    def supports(self, role: Role) -> bool:
        return role in LLM_ROLES

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        return headers

    def request_body(self, prompt: str) -> dict:
        return {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }

    def complete(self, prompt: str) -> str:
        body = self.request_body(prompt)
        log.debug("POST %s headers=%s body=%s", self.endpoint_url, _redact(self._headers()), json.dumps(body))
        delay = self.backoff
        last_error: Union[Exception, str] = "no attempt made"
        for attempt in range(self.retries + 1):
            try:
                response = self._client.post(self.endpoint_url, json=body, headers=self._headers())
                if response.status_code == 429 or response.status_code >= 500:
                    last_error = f"HTTP {response.status_code}"
                else:
                    response.raise_for_status()
                    payload = response.json()
                    log.debug("response %s", json.dumps(payload)[:2000])
                    return payload["choices"][0]["message"]["content"]
            except (httpx.HTTPError, ValueError, KeyError, IndexError, TypeError) as exc:
                last_error = exc
            if attempt < self.retries:
                log.warning("remote call failed (%s), retrying in %.2fs", last_error, delay)
                self._sleep(delay)
                delay *= 2
        raise BackendUnavailable(f"{self.endpoint_url}: {last_error}")

    def act(self, role, obs, rng=None):
        return ActionSample(self.complete(render_prompt(role, obs)))


def _redact(headers: dict) -> dict:
    return {k: ("Bearer ***" if k.lower() == "authorization" else v) for k, v in headers.items()}
