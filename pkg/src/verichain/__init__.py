"""Structured reasoning-chain toolkit for claim verification.

The package splits into a core library (grammar, judge, auditor,
prompting, inference, pipeline, corpus I/O, evaluation), a FastAPI
service wrapping it (``verichain.service``), and a CLI that talks to the
service (``verichain.cli``).
"""

from .audit import AuditPolicy, AuditReport, Criterion, Violation, audit, f
from .errors import VerichainError
from .grammar import (
    Citation,
    CitationKind,
    ReasoningChain,
    Step,
    StepKind,
    SubclaimBlock,
    extract_citations,
    parse_chain,
    serialize,
)
from .judge import judge
from .model import AnnotatedRecord, ClaimRecord, EvidenceSet, Verdict, parse_verdict
from .prompts import PromptKind, hint_for, render

__version__ = "0.1.0"

__all__ = [
    "AnnotatedRecord",
    "AuditPolicy",
    "AuditReport",
    "Citation",
    "CitationKind",
    "ClaimRecord",
    "Criterion",
    "EvidenceSet",
    "PromptKind",
    "ReasoningChain",
    "Step",
    "StepKind",
    "SubclaimBlock",
    "Verdict",
    "VerichainError",
    "Violation",
    "audit",
    "extract_citations",
    "f",
    "hint_for",
    "judge",
    "parse_chain",
    "parse_verdict",
    "render",
    "serialize",
    "__version__",
]
