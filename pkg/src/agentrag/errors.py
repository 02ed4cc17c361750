"""Exception hierarchy shared across the package."""

from __future__ import annotations


class AgentRagError(Exception):
    """Base class for all package errors."""


# trace
class TraceError(AgentRagError, ValueError):
    pass


class EmptyQuestion(TraceError):
    pass


class TooManySubQueries(TraceError):
    pass


class UnknownParent(TraceError):
    pass


class UnknownNode(TraceError):
    pass


class AlreadyResolved(TraceError):
    pass


class MissingContext(TraceError):
    pass


# policy / workflow
class FormatViolation(AgentRagError, ValueError):
    """Raised when a role's raw output breaks its tag protocol.

    ``reason`` is a short machine-readable label (a workflow rule name or a
    tag-protocol failure such as ``MissingTag``).
    """

    def __init__(self, reason: str, detail: str = ""):
        self.reason = str(reason)
        self.detail = detail
        super().__init__(f"{self.reason}: {detail}" if detail else self.reason)


class UnfilledPlaceholder(AgentRagError, ValueError):
    pass


class UnsupportedRole(AgentRagError, ValueError):
    pass


class BackendUnavailable(AgentRagError, RuntimeError):
    pass


class IndexOutOfRange(AgentRagError, IndexError):
    pass


# environment
class EmptyCorpus(AgentRagError, ValueError):
    pass


class CorpusParseError(AgentRagError, ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class InvalidParams(AgentRagError, ValueError):
    pass


# engine / reward / rl
class ConfigurationError(AgentRagError, ValueError):
    pass


class LengthMismatch(AgentRagError, ValueError):
    pass


class EmptyTrajectory(AgentRagError, ValueError):
    pass


class Misalignment(AgentRagError, ValueError):
    pass


class EmptyBatch(AgentRagError, ValueError):
    pass


class WeightsFormatError(AgentRagError, ValueError):
    pass
