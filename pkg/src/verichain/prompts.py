"""Prompt construction for chain generation, hint refinement, and baselines.

Templates are fixed text skeletons with ``{claim}``, ``{evidence}`` and
``{exemplars}`` slots. Rendering is deterministic: identical inputs give
byte-identical prompts, which makes generation reproducible and
cacheable. Evidence is always rendered in set order as
``(1)[first piece](2)[second piece]...``.

Custom skeletons (same slot names) can be loaded from a JSON override
file keyed by template kind.
"""

from __future__ import annotations

import enum
import json
import re
from pathlib import Path
from typing import Mapping, Sequence

from .errors import InputError, MissingExemplars, MissingGoldLabel
from .model import AnnotatedRecord, ClaimRecord, Verdict


class PromptKind(enum.Enum):
    STRUCTURED = "structured"
    HINT_SUPPORTED = "hint_supported"
    HINT_REFUTED = "hint_refuted"
    ZERO_SHOT = "zero_shot"
    ZERO_SHOT_COT = "zero_shot_cot"
    FEW_SHOT = "few_shot"
    FEW_SHOT_STRUCTURED = "few_shot_structured"


CHAIN_KINDS = frozenset(
    {
        PromptKind.STRUCTURED,
        PromptKind.HINT_SUPPORTED,
        PromptKind.HINT_REFUTED,
        PromptKind.FEW_SHOT_STRUCTURED,
    }
)
HINT_KINDS = frozenset({PromptKind.HINT_SUPPORTED, PromptKind.HINT_REFUTED})
FEW_SHOT_KINDS = frozenset({PromptKind.FEW_SHOT, PromptKind.FEW_SHOT_STRUCTURED})

_TASK_CHAIN = (
    "Based on the evidence, determine if the claim is supported by the evidence"
    " or refuted by it. Output the reasoning chain."
)
_TASK_DIRECT = (
    "Based on the evidence, determine if the claim is supported by the evidence"
    " or refuted by it."
)
_ANSWER_ONLY = 'Please respond with only whether the claim is "Supported" or "Refuted."'

HINT_SUPPORTED_LINE = "Hint: Every detail in this claim is supported."
HINT_REFUTED_LINE = "Hint: The claim should be refuted, locate the error in the reasoning chain."

DEFAULT_TEMPLATES: dict[PromptKind, str] = {
    PromptKind.STRUCTURED: (
        f"{_TASK_CHAIN}\nClaim: {{claim}}\nEvidence: {{evidence}}"
    ),
    PromptKind.HINT_SUPPORTED: (
        f"{_TASK_CHAIN}\nClaim: {{claim}}\nEvidence: {{evidence}}\n{HINT_SUPPORTED_LINE}"
    ),
    PromptKind.HINT_REFUTED: (
        f"{_TASK_CHAIN}\nClaim: {{claim}}\nEvidence: {{evidence}}\n{HINT_REFUTED_LINE}"
    ),
    PromptKind.ZERO_SHOT: (
        f"{_TASK_DIRECT}\nClaim: {{claim}}\nEvidence: {{evidence}}\n{_ANSWER_ONLY}"
    ),
    PromptKind.ZERO_SHOT_COT: (
        f"{_TASK_DIRECT}\nClaim: {{claim}}\nEvidence: {{evidence}}\n"
        "Think step by step, output your response in the following format:\n"
        "Chain: [your reasoning chain]\n"
        "Answer:[the claim is supported or the claim is refuted]"
    ),
    PromptKind.FEW_SHOT: (
        f"{_TASK_DIRECT}\n{_ANSWER_ONLY} Here are some examples:\n{{exemplars}}\n\n"
        "Follow the above examples:\nClaim: {claim}\nEvidence: {evidence}\nOutput:"
    ),
    PromptKind.FEW_SHOT_STRUCTURED: (
        f"{_TASK_CHAIN} Here are some examples:\n{{exemplars}}\n\n"
        "Follow the above examples:\nClaim: {claim}\nEvidence: {evidence}\nChain:"
    ),
}

_SLOT_RE = re.compile(r"\{(claim|evidence|exemplars)\}")


def render_evidence(items: Sequence[str]) -> str:
    """Render evidence pieces as ``(1)[text](2)[text]...`` in set order."""
    return "".join(f"({i})[{text}]" for i, text in enumerate(items, start=1))


def hint_for(gold: Verdict) -> PromptKind:
    """Pick the hint template kind matching a gold label."""
    return PromptKind.HINT_SUPPORTED if gold is Verdict.SUPPORTED else PromptKind.HINT_REFUTED


def render(
    kind: PromptKind,
    record: ClaimRecord,
    exemplars: Sequence[AnnotatedRecord] | None = None,
    templates: Mapping[PromptKind, str] | None = None,
) -> str:
    """Fill a template with a record (and exemplars for few-shot kinds)."""
    if kind in HINT_KINDS and record.gold is None:
        raise MissingGoldLabel(f"record {record.id!r} has no gold label for a hint prompt")
    if kind in FEW_SHOT_KINDS and not exemplars:
        raise MissingExemplars(f"{kind.value} prompt needs at least one exemplar")

    skeleton = (templates or DEFAULT_TEMPLATES)[kind]
    values = {
        "claim": record.claim,
        "evidence": render_evidence(list(record.evidence)),
        "exemplars": _render_exemplars(kind, exemplars) if kind in FEW_SHOT_KINDS else "",
    }
    # Single-pass substitution: slot values are never rescanned, so claim or
    # evidence text containing brace tokens cannot inject further slots.
    return _SLOT_RE.sub(lambda m: values[m.group(1)], skeleton)


def _render_exemplars(kind: PromptKind, exemplars: Sequence[AnnotatedRecord]) -> str:
    rendered = []
    for exemplar in exemplars:
        record = exemplar.record
        if record.gold is None:
            raise MissingGoldLabel(f"exemplar {record.id!r} has no gold label")
        lines = [
            f"Claim: {record.claim}",
            f"Evidence: {render_evidence(list(record.evidence))}",
        ]
        if kind is PromptKind.FEW_SHOT:
            lines.append(f"Output: {record.gold.render()}")
        else:
            lines.append(f"Chain: {exemplar.chain}")
        rendered.append("\n".join(lines))
    return "\n\n".join(rendered)


def load_template_overrides(path: str | Path) -> dict[PromptKind, str]:
    """Read a JSON override file mapping kind names to skeleton text.

    Missing kinds fall back to the defaults; unknown kinds or skeletons
    with unknown slots are rejected.
    """
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise InputError("template override file must hold a JSON object")
    templates = dict(DEFAULT_TEMPLATES)
    for key, skeleton in raw.items():
        try:
            kind = PromptKind(key)
        except ValueError:
            raise InputError(f"unknown template kind {key!r}") from None
        if not isinstance(skeleton, str):
            raise InputError(f"template {key!r} must be a string")
        unknown = [
            slot
            for slot in re.findall(r"\{(\w+)\}", skeleton)
            if slot not in ("claim", "evidence", "exemplars")
        ]
        if unknown:
            raise InputError(f"template {key!r} uses unknown slots: {unknown}")
        templates[kind] = skeleton
    return templates
