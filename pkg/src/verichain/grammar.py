"""Grammar for structured reasoning chains.

A chain is a sequence of subclaim blocks::

    C1: <subclaim text>
    Entity Resolution: <text>
    Resolution Verification: <text>
    Verification: <text>
    Status: Supported.

    C2: ...

Block labels run C1..Ck in order. Entity Resolution / Resolution
Verification steps are optional and may repeat; every block must carry a
Verification step and end with a Status line. Step text may span several
lines: a line that is not itself a keyword line extends the step above it.
Anything before the first block header (e.g. a leading "Chain:") is
treated as preamble and discarded.

Two keyword-matching modes exist. Strict mode (the pipeline default)
anchors keywords at the start of the line, case-sensitively, in their
canonical spelling. Lenient mode additionally tolerates leading list
markers and markdown bold around the keyword, which covers most drift in
raw model output.

``serialize`` emits the canonical form; ``serialize(parse_chain(t)) == t``
holds exactly for canonical input and up to insignificant whitespace and
keyword normalization otherwise.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from .errors import InputError
from .model import Verdict, parse_verdict
from .errors import UnknownVerdict


class ChainParseError(InputError):
    """Base for all chain grammar violations; ``block`` is 1-based when set."""

    def __init__(self, message: str, block: int | None = None):
        self.block = block
        super().__init__(message)


class MissingBlocks(ChainParseError):
    """No ``C1:`` block header found."""


class NonSequentialBlocks(ChainParseError):
    """Block labels are not exactly C1..Ck in order."""


class MissingStatus(ChainParseError):
    """A block is not terminated by a Status line."""


class MissingVerification(ChainParseError):
    """A block has no Verification step."""


class MalformedStatus(ChainParseError):
    """A Status line does not carry ``Supported.`` or ``Refuted.``."""


class StrayContent(ChainParseError):
    """Content after a closed block that belongs to no step."""


class StepKind(enum.Enum):
    ENTITY_RESOLUTION = "Entity Resolution"
    RESOLUTION_VERIFICATION = "Resolution Verification"
    VERIFICATION = "Verification"


class CitationKind(enum.Enum):
    EVIDENCE = "evidence"
    SUBCLAIM = "subclaim"


@dataclass(frozen=True)
class Citation:
    """A literal E<i> or C<i> token found in step text; span is (start, end)."""

    kind: CitationKind
    index: int
    span: tuple[int, int]


@dataclass(frozen=True)
class Step:
    kind: StepKind
    text: str
    citations: tuple[Citation, ...]


@dataclass(frozen=True)
class SubclaimBlock:
    index: int
    subclaim_text: str
    steps: tuple[Step, ...]
    status: Verdict

    def citations(self) -> tuple[Citation, ...]:
        """All citations in the block: subclaim text first, then steps in order."""
        found = list(extract_citations(self.subclaim_text))
        for step in self.steps:
            found.extend(step.citations)
        return tuple(found)


@dataclass(frozen=True)
class ReasoningChain:
    blocks: tuple[SubclaimBlock, ...]
    raw: str


_CITATION_RE = re.compile(r"\b([EC])(\d+)\b")

_STRICT_HEADER_RE = re.compile(r"^C(\d+):(.*)$")
_STRICT_KEYWORD_RE = re.compile(
    r"^(Entity Resolution|Resolution Verification|Verification|Status):(.*)$"
)
# Lenient: optional list marker ("- ", "* ", "1. ") and/or markdown bold
# around the keyword, case-insensitive keyword, loose spacing after colon.
_LENIENT_HEADER_RE = re.compile(
    r"^\s*(?:[-*•]\s+|\d+[.)]\s+)?(?:\*\*)?[Cc](\d+)(?:\*\*)?:(?:\*\*)?(.*)$"
)
_LENIENT_KEYWORD_RE = re.compile(
    r"^\s*(?:[-*•]\s+|\d+[.)]\s+)?(?:\*\*)?"
    r"(Entity Resolution|Resolution Verification|Verification|Status)"
    r"(?:\*\*)?:(?:\*\*)?\s*(.*)$",
    re.IGNORECASE,
)

_STATUS_SUFFIX = "."


def extract_citations(text: str) -> list[Citation]:
    """Extract every maximal ``E<digits>`` / ``C<digits>`` token at a word boundary.

    Order of appearance is preserved and duplicates are kept.
    """
    found = []
    for match in _CITATION_RE.finditer(text):
        kind = CitationKind.EVIDENCE if match.group(1) == "E" else CitationKind.SUBCLAIM
        found.append(Citation(kind=kind, index=int(match.group(2)), span=match.span()))
    return found


def _match_header(line: str, lenient: bool) -> tuple[int, str] | None:
    if lenient:
        m = _LENIENT_HEADER_RE.match(line)
        if m:
            return int(m.group(1)), m.group(2).strip()
        return None
    m = _STRICT_HEADER_RE.match(line)
    if not m:
        return None
    body = m.group(2)
    # Canonical form is "C1: text"; "C1:" alone starts an empty subclaim.
    if body and not body.startswith(" "):
        return None
    return int(m.group(1)), body[1:] if body else ""


def _match_keyword(line: str, lenient: bool) -> tuple[str, str] | None:
    if lenient:
        m = _LENIENT_KEYWORD_RE.match(line)
        if m:
            keyword = m.group(1).title()
            return keyword, m.group(2).strip()
        return None
    m = _STRICT_KEYWORD_RE.match(line)
    if not m:
        return None
    body = m.group(2)
    if body and not body.startswith(" "):
        return None
    return m.group(1), body[1:] if body else ""


def _parse_status_text(text: str, block: int, lenient: bool) -> Verdict:
    if lenient:
        try:
            return parse_verdict(text)
        except UnknownVerdict:
            raise MalformedStatus(
                f"block C{block}: malformed status {text!r}", block=block
            ) from None
    if text.endswith(_STATUS_SUFFIX):
        word = text[: -len(_STATUS_SUFFIX)]
        if word == "Supported":
            return Verdict.SUPPORTED
        if word == "Refuted":
            return Verdict.REFUTED
    raise MalformedStatus(f"block C{block}: malformed status {text!r}", block=block)


class _BlockBuilder:
    def __init__(self, index: int, subclaim_text: str):
        self.index = index
        self.subclaim_lines = [subclaim_text]
        self.steps: list[tuple[str, list[str]]] = []
        self.status: Verdict | None = None

    def add_content(self, line: str) -> None:
        target = self.steps[-1][1] if self.steps else self.subclaim_lines
        if target == [""]:
            target[0] = line  # keyword line carried no text of its own
        else:
            target.append(line)

    def build(self) -> SubclaimBlock:
        assert self.status is not None
        steps = []
        for keyword, lines in self.steps:
            text = "\n".join(lines)
            steps.append(
                Step(
                    kind=StepKind(keyword),
                    text=text,
                    citations=tuple(extract_citations(text)),
                )
            )
        return SubclaimBlock(
            index=self.index,
            subclaim_text="\n".join(self.subclaim_lines),
            steps=tuple(steps),
            status=self.status,
        )


def parse_chain(text: str, lenient: bool = False) -> ReasoningChain:
    """Parse raw chain text into a ReasoningChain.

    Raises a ChainParseError subclass naming the first violation found.
    Step order within a block is not enforced here; that is the structure
    auditor's format criterion. Lenient mode accepts a superset of strict
    mode: the canonical reading is tried first, and the loose keyword
    patterns only apply when it fails.
    """
    if lenient:
        try:
            return _parse(text, lenient=False)
        except ChainParseError:
            return _parse(text, lenient=True)
    return _parse(text, lenient=False)


def _parse(text: str, lenient: bool) -> ReasoningChain:
    lines = [line.rstrip() for line in text.split("\n")]

    header_indices = [
        m[0] for m in (_match_header(line, lenient) for line in lines) if m is not None
    ]
    if not header_indices or 1 not in header_indices:
        raise MissingBlocks("no C1: block header found")
    if header_indices != list(range(1, len(header_indices) + 1)):
        raise NonSequentialBlocks(
            f"block labels {['C%d' % i for i in header_indices]} are not sequential"
        )

    blocks: list[SubclaimBlock] = []
    current: _BlockBuilder | None = None

    def close_current() -> None:
        nonlocal current
        assert current is not None
        if current.status is None:
            raise MissingStatus(
                f"block C{current.index} has no Status line", block=current.index
            )
        if not any(kw == StepKind.VERIFICATION.value for kw, _ in current.steps):
            raise MissingVerification(
                f"block C{current.index} has no Verification step", block=current.index
            )
        blocks.append(current.build())
        current = None

    for line in lines:
        header = _match_header(line, lenient)
        if header is not None:
            if current is not None:
                close_current()
            current = _BlockBuilder(*header)
            continue
        if current is None and not blocks:
            continue  # preamble before C1
        keyword = _match_keyword(line, lenient)
        if keyword is not None:
            key, body = keyword
            if current is None:
                raise StrayContent(f"content after closed block: {line!r}")
            if key == "Status":
                current.status = _parse_status_text(body, current.index, lenient)
                close_current()
            else:
                current.steps.append((key, [body]))
            continue
        if not line:
            continue  # blank lines are insignificant
        if current is None:
            raise StrayContent(f"content after closed block: {line!r}")
        current.add_content(line)

    if current is not None:
        close_current()

    return ReasoningChain(blocks=tuple(blocks), raw=text)


def serialize(chain: ReasoningChain) -> str:
    """Emit the canonical keyword format, one blank line between blocks."""
    parts = []
    for block in chain.blocks:
        lines = [_labelled(f"C{block.index}", block.subclaim_text)]
        for step in block.steps:
            lines.append(_labelled(step.kind.value, step.text))
        lines.append(f"Status: {block.status.render()}.")
        parts.append("\n".join(lines))
    return "\n\n".join(parts)


def _labelled(label: str, text: str) -> str:
    return f"{label}: {text}" if text else f"{label}:"
