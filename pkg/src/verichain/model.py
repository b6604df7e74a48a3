"""Core domain types: verdicts, evidence sets, claim records.

Every type here is immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Iterator

from .errors import UnknownVerdict

# Punctuation tolerated around a bare verdict word in model output.
_VERDICT_TRIM = " \t\r\n.,!?:;\"'`*()[]"


class Verdict(enum.Enum):
    """Binary truth value of a claim or subclaim."""

    SUPPORTED = "supported"
    REFUTED = "refuted"

    def render(self) -> str:
        """Canonical chain-text form, e.g. ``Supported``."""
        return self.value.capitalize()

    def corpus_label(self) -> str:
        """Canonical corpus-file form, e.g. ``SUPPORTED``."""
        return self.value.upper()

    def opposite(self) -> "Verdict":
        return Verdict.REFUTED if self is Verdict.SUPPORTED else Verdict.SUPPORTED


def parse_verdict(text: str) -> Verdict:
    """Parse a bare verdict word, ignoring case and surrounding punctuation.

    Raises UnknownVerdict for anything that is not exactly one of the two
    values; this is a closed enum, not a keyword search.
    """
    cleaned = text.strip(_VERDICT_TRIM).lower()
    if cleaned == "supported":
        return Verdict.SUPPORTED
    if cleaned == "refuted":
        return Verdict.REFUTED
    raise UnknownVerdict(f"not a verdict: {text!r}")


@dataclass(frozen=True)
class EvidenceSet:
    """Ordered evidence texts addressed by 1-based indices E1..En."""

    items: tuple[str, ...]

    def __post_init__(self):
        if not self.items:
            raise ValueError("evidence set must be non-empty")
        object.__setattr__(self, "items", tuple(self.items))

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[str]:
        return iter(self.items)

    def get(self, index: int) -> str:
        """Return the evidence text at 1-based ``index``."""
        if not 1 <= index <= len(self.items):
            raise IndexError(f"evidence index {index} out of range 1..{len(self.items)}")
        return self.items[index - 1]


@dataclass(frozen=True)
class ClaimRecord:
    """One dataset example: a claim, its evidence set, and an optional gold verdict.

    ``gold`` is optional so the same type serves training corpora and
    pure-inference evaluation; operations that need it check explicitly.
    """

    id: str
    claim: str
    evidence: EvidenceSet
    gold: Verdict | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.id:
            raise ValueError("record id must be non-empty")
        if not self.claim.strip():
            raise ValueError(f"record {self.id!r}: claim must be non-empty")


@dataclass(frozen=True)
class AnnotatedRecord:
    """A claim record paired with a human-written reasoning chain.

    Loaders are responsible for auditing the chain text before
    constructing one of these; see ``corpus.load_annotated``.
    """

    record: ClaimRecord
    chain: str
