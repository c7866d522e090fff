"""Exception hierarchy shared across the package."""

from __future__ import annotations


class SummitError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SummitError):
    """Invalid session or run configuration."""


class BackendError(SummitError):
    """Base class for completion-backend failures."""


class TransportError(BackendError):
    """HTTP/network failure after retries were exhausted."""


class AuthError(BackendError):
    """Authentication rejected (401/403); never retried."""


class ScriptExhausted(BackendError):
    """A scripted backend received more requests than it has steps."""


class ScriptMismatch(BackendError):
    """The next scripted step's matcher does not match the incoming request."""


class ReplayMiss(BackendError):
    """Replay mode was asked for a request that is not in the cache."""


class BudgetExceeded(SummitError):
    """The session's configured token budget was hit."""

    def __init__(self, message: str, partial_trace=None):
        super().__init__(message)
        self.partial_trace = partial_trace


class ParseError(SummitError):
    """Evaluator output could not be parsed (strict mode only)."""


class MissingSlot(SummitError):
    """A template references a slot the render context does not supply."""

    def __init__(self, slot: str):
        super().__init__(f"missing template slot: {slot!r}")
        self.slot = slot


class RemoteUnavailable(SummitError):
    """A remote annotation/scoring endpoint could not be reached."""


class DegenerateDistribution(SummitError):
    """A score distribution with zero total mass."""


class EmptyInput(SummitError):
    """An aggregation was asked to summarize zero values."""


class SampleTooLarge(SummitError):
    """Requested sample size exceeds the corpus size."""


class SchemaViolation(SummitError):
    """Corpus records failed validation (strict loading)."""

    def __init__(self, message: str, line_numbers: list[int] | None = None):
        super().__init__(message)
        self.line_numbers = line_numbers or []


class MissingStats(SummitError):
    """A report was requested for a run directory without stats."""
