"""Prompt templates, exemplar injection, and rendering.

Templates are plain-text files with ``{{slot_name}}`` markers, shipped with
the package and overridable by pointing the registry at another directory
carrying the same ``manifest.json`` layout. Slot substitution is a single
pass over the template: marker syntax inside substituted values is payload,
not a slot, and passes through verbatim.
"""

from __future__ import annotations

import enum
import hashlib
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import MissingSlot
from .types import Exemplar

__all__ = [
    "PromptRole",
    "Stage",
    "PromptRegistry",
    "RenderedPrompt",
    "Exemplar",
    "format_exemplars",
    "DEFAULT_SHOTS",
    "SUMMARIZER_FORMAT_INSTRUCTIONS",
    "EVALUATOR_FORMAT_INSTRUCTIONS",
]

DEFAULT_SHOTS = 2

SUMMARIZER_FORMAT_INSTRUCTIONS = (
    "Output only the summary text, with no preamble, labels, or commentary."
)

EVALUATOR_FORMAT_INSTRUCTIONS = (
    "Begin your output with a single line of exactly this form:\n"
    "Scores: 1:p 2:p 3:p 4:p 5:p\n"
    "where each p is a probability between 0 and 1 and the five probabilities "
    "sum to 1. Then list your suggestions as numbered sentences, using only "
    "the five allowed operations."
)


class PromptRole(enum.Enum):
    SUMMARIZER = "summarizer"
    EVALUATOR = "evaluator"


class Stage(enum.Enum):
    SUMMARIZE = "summarize"
    REFINE = "refine"
    EVALUATE = "evaluate"


#: The (role, stage) combinations that exist, for every setting.
ROLE_STAGES = {
    PromptRole.SUMMARIZER: (Stage.SUMMARIZE, Stage.REFINE),
    PromptRole.EVALUATOR: (Stage.EVALUATE,),
}

_SLOT_RE = re.compile(r"\{\{(\w+)\}\}")


@dataclass(frozen=True)
class RenderedPrompt:
    system: str
    user: str


def _render_template(template: str, context: dict[str, str]) -> str:
    referenced = set(_SLOT_RE.findall(template))
    for slot in sorted(referenced):
        if slot not in context:
            raise MissingSlot(slot)
    return _SLOT_RE.sub(lambda m: context[m.group(1)], template)


def format_exemplars(exemplars: list[Exemplar], role: PromptRole) -> str:
    """Render in-context examples as a block that precedes the task instance.

    Summarizer exemplars are document/summary pairs; evaluator exemplars must
    also carry an explanation.
    """
    if not exemplars:
        return ""
    blocks = []
    for i, ex in enumerate(exemplars, start=1):
        lines = [f"Example {i}:", "Document:", ex.document, "Summary:", ex.summary]
        if role is PromptRole.EVALUATOR:
            if ex.explanation is None:
                raise MissingSlot("explanation")
            lines += ["Evaluation:", ex.explanation]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n\n"


class PromptRegistry:
    """All prompt templates, keyed by (role, setting value, stage)."""

    def __init__(self, systems: dict[PromptRole, str], users: dict[tuple[str, str, str], str]):
        self._systems = systems
        self._users = users
        self.validate()

    @classmethod
    def load(cls, directory: str | Path | None = None) -> "PromptRegistry":
        """Load from a template directory; None means the packaged defaults."""
        if directory is None:
            root = resources.files("summit").joinpath("templates")
        else:
            root = Path(directory)
        manifest = json.loads(root.joinpath("manifest.json").read_text(encoding="utf-8"))
        if manifest.get("schema") != "summit/prompts":
            raise ValueError(f"not a prompt manifest: {manifest.get('schema')!r}")
        systems = {
            PromptRole(role): root.joinpath(filename).read_text(encoding="utf-8").rstrip("\n")
            for role, filename in manifest["system"].items()
        }
        users = {}
        for key, filename in manifest["user"].items():
            role, setting, stage = key.split("/")
            users[(role, setting, stage)] = (
                root.joinpath(filename).read_text(encoding="utf-8").rstrip("\n")
            )
        return cls(systems, users)

    def validate(self) -> None:
        for role in PromptRole:
            if role not in self._systems:
                raise ValueError(f"missing system template for {role.value}")
        missing = [
            f"{role.value}/{setting}/{stage.value}"
            for role, stages in ROLE_STAGES.items()
            for setting in ("quality", "control", "faithfulness")
            for stage in stages
            if (role.value, setting, stage.value) not in self._users
        ]
        if missing:
            raise ValueError(f"missing user templates: {', '.join(missing)}")

    def template(self, role: PromptRole, setting, stage: Stage) -> str:
        setting_value = getattr(setting, "value", setting)
        return self._users[(role.value, setting_value, stage.value)]

    def render(self, role: PromptRole, setting, stage: Stage, context: dict[str, str]) -> RenderedPrompt:
        """Fill both system and user templates from the same context."""
        return RenderedPrompt(
            system=_render_template(self._systems[role], context),
            user=_render_template(self.template(role, setting, stage), context),
        )

    def fingerprint(self) -> str:
        """Content hash over every template, for peek-guarding experiment runs."""
        digest = hashlib.sha256()
        for role in sorted(self._systems, key=lambda r: r.value):
            digest.update(f"system/{role.value}\x00{self._systems[role]}\x00".encode("utf-8"))
        for key in sorted(self._users):
            digest.update(("/".join(key) + "\x00" + self._users[key] + "\x00").encode("utf-8"))
        digest.update(SUMMARIZER_FORMAT_INSTRUCTIONS.encode("utf-8"))
        digest.update(EVALUATOR_FORMAT_INSTRUCTIONS.encode("utf-8"))
        return digest.hexdigest()
