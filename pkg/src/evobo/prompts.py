"""Prompt construction and response parsing for LLM-driven algorithm design.

The generation loop talks to a language model in three situations: seeding an
initial population of optimizer classes, refining a single parent, and
combining two parents.  Each situation has a text template under
``templates/``; this module fills the templates in and turns model replies
back into :class:`Candidate` records.

Templates use :class:`string.Template` placeholders.  Substituted values
(candidate source code in particular) are inserted verbatim, so a ``$`` inside
generated code never re-triggers substitution.
"""

from __future__ import annotations

import logging
import re
import string
from dataclasses import dataclass, field
from pathlib import Path

__all__ = [
    "Candidate",
    "DuplicateParent",
    "MissingFitness",
    "ParseFailure",
    "PromptRequest",
    "PromptTemplates",
    "count_loc",
    "parse_response",
    "render_crossover",
    "render_initialization",
    "render_mutation",
]

logger = logging.getLogger(__name__)

_TEMPLATE_DIR = Path(__file__).parent / "templates"
_TEMPLATE_NAMES = (
    "task_prompt",
    "code_template",
    "output_format",
    "initialization",
    "mutation",
    "crossover",
)

KINDS = ("initialization", "mutation", "crossover")
_ARITY = {"initialization": 0, "mutation": 1, "crossover": 2}


class MissingFitness(ValueError):
    """A parent was offered for refinement before it was ever scored."""


class DuplicateParent(ValueError):
    """Both crossover slots refer to the same candidate."""


def count_loc(code: str) -> int:
    """Number of non-blank source lines; the secondary tie-break key."""
    return sum(1 for line in code.splitlines() if line.strip())


@dataclass
class Candidate:
    """One generated optimizer: source code plus bookkeeping.

    ``created`` is the global generation sequence number and breaks fitness
    ties (earlier wins, after fewer lines of code).  ``fitness`` stays None
    until the candidate has been scored; failed candidates score 0.0 and
    carry the failure text in ``error``.
    """

    name: str
    code: str
    origin: str = "init"
    description: str = ""
    parent_names: tuple[str, ...] = ()
    fitness: float | None = None
    error: str | None = None
    created: int = 0
    loc: int | None = None

    def __post_init__(self) -> None:
        if self.loc is None:
            self.loc = count_loc(self.code)

    def summary(self) -> str:
        """One-line digest used when listing prior attempts in a prompt."""
        score = "unscored" if self.fitness is None else f"score {self.fitness:.4f}"
        head = f"- {self.name} ({score})"
        if self.description:
            head += f": {_first_line(self.description)}"
        if self.error:
            head += f"\n  error: {_first_line(self.error)}"
        return head


@dataclass(frozen=True)
class PromptRequest:
    """A planned LLM call: which template, and which parents feed it."""

    kind: str
    parents: tuple[Candidate, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown prompt kind: {self.kind!r}")
        want = _ARITY[self.kind]
        if len(self.parents) != want:
            raise ValueError(
                f"{self.kind} prompt takes {want} parent(s), got {len(self.parents)}"
            )


class PromptTemplates:
    """The set of text templates backing every prompt.

    Loads from the packaged ``templates/`` directory by default; pass a
    directory to experiment with alternative wordings without touching the
    package.
    """

    def __init__(self, directory: str | Path | None = None):
        self.directory = Path(directory) if directory is not None else _TEMPLATE_DIR
        self._raw: dict[str, str] = {}
        for name in _TEMPLATE_NAMES:
            path = self.directory / f"{name}.txt"
            self._raw[name] = path.read_text(encoding="utf-8").rstrip("\n")

    def raw(self, name: str) -> str:
        return self._raw[name]

    def fill(self, name: str, **values: str) -> str:
        return string.Template(self._raw[name]).substitute(**values)


_default_templates: PromptTemplates | None = None


def _templates(templates: PromptTemplates | None) -> PromptTemplates:
    global _default_templates
    if templates is not None:
        return templates
    if _default_templates is None:
        _default_templates = PromptTemplates()
    return _default_templates


def _first_line(text: str) -> str:
    return text.strip().splitlines()[0] if text.strip() else ""


def _history_block(history: list[Candidate], max_entries: int) -> str:
    """List prior attempts, newest last, keeping at most ``max_entries``."""
    if not history:
        return ""
    shown = history[-max_entries:]
    lines = ["An overview of the algorithms designed so far, with scores and errors:"]
    if len(shown) < len(history):
        lines.append(f"(showing the {len(shown)} most recent of {len(history)})")
    lines.extend(cand.summary() for cand in shown)
    return "\n".join(lines)


def _parent_block(cand: Candidate) -> str:
    lines = [f"Name: {cand.name}"]
    if cand.description:
        lines.append(f"Description: {_first_line(cand.description)}")
    lines.append(f"Score (mean AOCC over the benchmark, higher is better): {cand.fitness:.4f}")
    if cand.error:
        lines.append(f"Error observed: {_first_line(cand.error)}")
    lines.append("Code:")
    lines.append("```python")
    lines.append(cand.code.rstrip("\n"))
    lines.append("```")
    return "\n".join(lines)


def render_initialization(
    history: list[Candidate] | tuple[Candidate, ...] = (),
    templates: PromptTemplates | None = None,
    max_entries: int = 25,
) -> str:
    """Prompt asking for a fresh optimizer, diverse from everything so far.

    With an empty history the algorithm list section disappears entirely and
    the count reads zero.
    """
    tpl = _templates(templates)
    history = list(history)
    return tpl.fill(
        "initialization",
        task_prompt=tpl.raw("task_prompt"),
        count=str(len(history)),
        history=_history_block(history, max_entries),
        code_template=tpl.raw("code_template"),
        output_format=tpl.raw("output_format"),
    )


def render_mutation(parent: Candidate, templates: PromptTemplates | None = None) -> str:
    """Prompt asking the model to refine a single scored parent."""
    if parent.fitness is None:
        raise MissingFitness(f"parent {parent.name!r} has no fitness yet")
    tpl = _templates(templates)
    return tpl.fill(
        "mutation",
        task_prompt=tpl.raw("task_prompt"),
        parent=_parent_block(parent),
        output_format=tpl.raw("output_format"),
    )


def render_crossover(
    parent_a: Candidate,
    parent_b: Candidate,
    templates: PromptTemplates | None = None,
) -> str:
    """Prompt asking the model to combine two scored parents, in the order given."""
    if parent_a is parent_b or (
        parent_a.name == parent_b.name and parent_a.code == parent_b.code
    ):
        raise DuplicateParent(f"crossover needs two distinct parents, got {parent_a.name!r} twice")
    for parent in (parent_a, parent_b):
        if parent.fitness is None:
            raise MissingFitness(f"parent {parent.name!r} has no fitness yet")
    tpl = _templates(templates)
    return tpl.fill(
        "crossover",
        task_prompt=tpl.raw("task_prompt"),
        parent_a=_parent_block(parent_a),
        parent_b=_parent_block(parent_b),
        output_format=tpl.raw("output_format"),
    )


def render_request(request: PromptRequest, templates: PromptTemplates | None = None) -> str:
    """Dispatch a :class:`PromptRequest` to the matching renderer."""
    if request.kind == "mutation":
        return render_mutation(request.parents[0], templates)
    if request.kind == "crossover":
        return render_crossover(request.parents[0], request.parents[1], templates)
    return render_initialization((), templates)


@dataclass(frozen=True)
class ParseFailure:
    """Why a model reply could not be turned into a candidate."""

    reason: str


_FENCE_RE = re.compile(r"```[ \t]*([A-Za-z0-9_+.-]*)[ \t]*\r?\n(.*?)```", re.DOTALL)
_CLASS_RE = re.compile(r"^[ \t]*class\s+([A-Za-z_]\w*)", re.MULTILINE)
_DESCRIPTION_RE = re.compile(r"#\s*Description\s*:\s*(.+)")


def parse_response(text: str) -> Candidate | ParseFailure:
    """Extract the class from a model reply.

    Takes the first fenced code block (warning if the reply holds several),
    requires a class definition inside it, and picks up the one-line
    description when present.  Returns a :class:`ParseFailure` instead of
    raising so a bad reply scores zero rather than stopping the run.
    """
    blocks = _FENCE_RE.findall(text)
    if not blocks:
        return ParseFailure("no fenced code block in response")
    if len(blocks) > 1:
        logger.warning("response contains %d code blocks; using the first", len(blocks))
    code = blocks[0][1].strip("\n")
    match = _CLASS_RE.search(code)
    if match is None:
        return ParseFailure("code block contains no class definition")
    desc = _DESCRIPTION_RE.search(text)
    return Candidate(
        name=match.group(1),
        code=code,
        description=desc.group(1).strip() if desc else "",
    )
