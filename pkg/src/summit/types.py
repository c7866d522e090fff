"""Core domain types for the iterative refinement loop."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import ConfigError

DEFAULT_STOP_MARKER = "<STOP>"
DEFAULT_MAX_ITERATIONS = 5
DEFAULT_MIN_DOCUMENT_TOKENS = 10


class Setting(enum.Enum):
    QUALITY = "quality"
    CONTROL = "control"
    FAITHFULNESS = "faithfulness"


class SummaryOrigin(enum.Enum):
    INITIAL = "initial"
    REFINED = "refined"
    UNCHANGED = "unchanged"


class EditKind(enum.Enum):
    ADD = "add"
    REMOVE = "remove"
    REPHRASE = "rephrase"
    SIMPLIFY = "simplify"
    KEEP = "keep"


#: Edit kinds that carry a free-text target.
TARGETED_KINDS = frozenset({EditKind.ADD, EditKind.REMOVE, EditKind.REPHRASE})


class StopReason(enum.Enum):
    EVALUATOR_STOP = "evaluator_stop"
    MAX_ITERATIONS = "max_iterations"
    KEEP_ONLY = "keep_only"


@dataclass(frozen=True)
class EditOp:
    """One revision command parsed from evaluator feedback."""

    kind: EditKind
    target: str | None = None

    def __post_init__(self):
        if self.kind in TARGETED_KINDS:
            if not self.target or not self.target.strip():
                raise ValueError(f"{self.kind.value} requires a non-empty target")
        elif self.target is not None:
            raise ValueError(f"{self.kind.value} carries no target")


@dataclass(frozen=True)
class Document:
    """A source text to summarize, with optional references and topics."""

    id: str
    text: str
    reference_summaries: tuple[str, ...] = ()
    topics: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("document text is empty")
        if len(self.topics) > 2:
            raise ValueError("at most 2 topics per document")


@dataclass(frozen=True)
class Summary:
    """A candidate summary at one iteration of the loop."""

    text: str
    iteration: int
    origin: SummaryOrigin

    def __post_init__(self):
        if self.iteration < 0:
            raise ValueError("iteration must be non-negative")
        if (self.iteration == 0) != (self.origin is SummaryOrigin.INITIAL):
            raise ValueError("iteration 0 exactly when origin is INITIAL")


@dataclass
class Feedback:
    """Evaluator output: verbatim rationale plus its parsed structure.

    ``distribution_parsed`` is False when no score distribution could be
    recovered and the uniform fallback (0.2 each, expected 3.0) was used.
    """

    raw: str
    score_distribution: dict[int, float]
    expected_score: float
    edit_ops: list[EditOp]
    stop_requested: bool
    distribution_parsed: bool = True


@dataclass(frozen=True)
class Exemplar:
    """An in-context example; evaluator exemplars also carry an explanation."""

    document: str
    summary: str
    explanation: str | None = None


@dataclass(frozen=True)
class Decoding:
    temperature: float = 0.0
    max_output_tokens: int = 512

    def __post_init__(self):
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_output_tokens < 1:
            raise ConfigError("max_output_tokens must be positive")


@dataclass
class SessionConfig:
    """Everything a refinement session needs beyond the document itself."""

    model_id: str = "default"
    setting: Setting = Setting.QUALITY
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    topic_query: str | None = None
    exemplars: list[Exemplar] = field(default_factory=list)
    decoding: Decoding = field(default_factory=Decoding)
    stop_marker: str = DEFAULT_STOP_MARKER
    strict_parsing: bool = False
    min_document_tokens: int = DEFAULT_MIN_DOCUMENT_TOKENS
    token_budget: int | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.setting is Setting.CONTROL and not (self.topic_query or "").strip():
            raise ConfigError("control setting requires a topic_query")
        if not self.stop_marker:
            raise ConfigError("stop_marker must be non-empty")
        if self.token_budget is not None and self.token_budget < 1:
            raise ConfigError("token_budget must be positive when set")


@dataclass
class Usage:
    """Token accounting for a session (mutated while the session runs)."""

    prompt_tokens: int = 0
    completion_tokens: int = 0
    cache_hits: int = 0

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


@dataclass(frozen=True)
class TraceStep:
    summary: Summary
    feedback: Feedback


@dataclass(frozen=True)
class PromptCall:
    """One rendered prompt sent to the backend, kept for inspection/debugging."""

    role: str
    stage: str
    iteration: int
    system: str
    user: str


@dataclass
class SessionTrace:
    """The full history of one session. Treat as immutable once returned.

    ``prompt_log`` is in-memory provenance only; the serialized trace file
    carries the per-step record schema (see trace_io).
    """

    document_id: str
    config: SessionConfig
    steps: list[TraceStep]
    stopped_by: StopReason
    usage: Usage
    prompt_log: list[PromptCall] = field(default_factory=list)

    @property
    def initial_summary(self) -> Summary:
        return self.steps[0].summary

    @property
    def final_summary(self) -> Summary:
        return self.steps[-1].summary

    @property
    def final_feedback(self) -> Feedback:
        return self.steps[-1].feedback
