"""Rule-based structural verification of reasoning chains.

The auditor checks three criteria and reports violations instead of
raising:

- segmentation: the text parses into sequential C1..Ck blocks, each
  terminated by a Status line;
- grounding: every evidence citation points at an existing evidence
  piece, and a block only cites subclaims that precede it;
- format: blocks use the predefined step keywords in grammar order
  (entity steps first, a single Verification step last), plus the
  policy's per-step grounding requirements.

Policy flags relax individual requirements for ablation runs; relaxing a
flag never turns a passing chain into a failing one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any

from .grammar import (
    ChainParseError,
    CitationKind,
    MissingBlocks,
    MissingVerification,
    ReasoningChain,
    StepKind,
    StrayContent,
    extract_citations,
    parse_chain,
)


class Criterion(enum.Enum):
    SEGMENTATION = "segmentation"
    GROUNDING = "grounding"
    FORMAT = "format"


@dataclass(frozen=True)
class AuditPolicy:
    """Which structural requirements are enforced.

    The default (all flags on) is the full policy; ablation variants flip
    one flag. ``require_decomposition=False`` additionally accepts bare
    chains with no block headers by treating the whole text as a single
    anonymous block.
    """

    require_decomposition: bool = True
    require_entity_analysis: bool = True
    require_grounding: bool = True
    strict_keywords: bool = True

    def to_dict(self) -> dict[str, bool]:
        return {
            "require_decomposition": self.require_decomposition,
            "require_entity_analysis": self.require_entity_analysis,
            "require_grounding": self.require_grounding,
            "strict_keywords": self.strict_keywords,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AuditPolicy":
        return cls(**{k: bool(v) for k, v in data.items()})


DEFAULT_POLICY = AuditPolicy()


@dataclass(frozen=True)
class Violation:
    criterion: Criterion
    detail: str
    block: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"criterion": self.criterion.value, "block": self.block, "detail": self.detail}


@dataclass(frozen=True)
class AuditReport:
    passed: bool
    violations: tuple[Violation, ...] = ()

    def __post_init__(self):
        assert self.passed == (not self.violations)

    def to_dict(self) -> dict[str, Any]:
        return {"passed": self.passed, "violations": [v.to_dict() for v in self.violations]}


def audit(
    chain_text: str,
    evidence_count: int,
    policy: AuditPolicy = DEFAULT_POLICY,
) -> AuditReport:
    """Audit raw chain text against the policy; failures are reported, not raised."""
    if evidence_count < 1:
        raise ValueError("evidence_count must be >= 1")

    chain, violation = _parse_for_audit(chain_text, policy)
    if violation is not None:
        return AuditReport(passed=False, violations=(violation,))
    assert chain is not None

    violations = []
    for block in chain.blocks:
        violations.extend(_format_violations(block, policy))
        violations.extend(_grounding_violations(block, evidence_count, policy))
    return AuditReport(passed=not violations, violations=tuple(violations))


def f(chain_text: str, evidence_count: int) -> bool:
    """Convenience wrapper: full-policy audit collapsed to a boolean."""
    return audit(chain_text, evidence_count, DEFAULT_POLICY).passed


def _parse_for_audit(
    chain_text: str, policy: AuditPolicy
) -> tuple[ReasoningChain | None, Violation | None]:
    lenient = not policy.strict_keywords
    try:
        return parse_chain(chain_text, lenient=lenient), None
    except MissingBlocks as exc:
        if not policy.require_decomposition:
            # Accept a bare chain: wrap the whole text as one anonymous block.
            try:
                return parse_chain("C1:\n" + chain_text, lenient=lenient), None
            except ChainParseError as inner:
                return None, _parse_violation(inner)
        return None, _parse_violation(exc)
    except ChainParseError as exc:
        return None, _parse_violation(exc)


def _parse_violation(exc: ChainParseError) -> Violation:
    # Keyword/step discipline failures are format issues; everything else
    # is a segmentation failure (the text does not split into valid blocks).
    if isinstance(exc, (MissingVerification, StrayContent)):
        criterion = Criterion.FORMAT
    else:
        criterion = Criterion.SEGMENTATION
    return Violation(criterion=criterion, detail=str(exc), block=exc.block)


def _format_violations(block, policy: AuditPolicy) -> list[Violation]:
    violations = []
    kinds = [step.kind for step in block.steps]
    verification_count = kinds.count(StepKind.VERIFICATION)
    if verification_count > 1:
        violations.append(
            Violation(
                criterion=Criterion.FORMAT,
                detail=f"block C{block.index} has {verification_count} Verification steps",
                block=block.index,
            )
        )
    elif kinds and kinds[-1] is not StepKind.VERIFICATION:
        violations.append(
            Violation(
                criterion=Criterion.FORMAT,
                detail=f"block C{block.index}: Verification must be the final step",
                block=block.index,
            )
        )

    if policy.require_entity_analysis:
        entity_steps = [
            s
            for s in block.steps
            if s.kind in (StepKind.ENTITY_RESOLUTION, StepKind.RESOLUTION_VERIFICATION)
        ]
        has_resolution = any(s.kind is StepKind.ENTITY_RESOLUTION for s in entity_steps)
        if has_resolution and not any(s.citations for s in entity_steps):
            violations.append(
                Violation(
                    criterion=Criterion.FORMAT,
                    detail=f"block C{block.index}: entity analysis carries no citation",
                    block=block.index,
                )
            )

    if policy.require_grounding:
        for step in block.steps:
            if step.kind is StepKind.ENTITY_RESOLUTION:
                continue
            if not step.citations:
                violations.append(
                    Violation(
                        criterion=Criterion.FORMAT,
                        detail=(
                            f"block C{block.index}: {step.kind.value} step cites no"
                            " evidence or subclaim"
                        ),
                        block=block.index,
                    )
                )
    return violations


def _grounding_violations(block, evidence_count: int, policy: AuditPolicy) -> list[Violation]:
    violations = []
    sources = [("subclaim", c) for c in extract_citations(block.subclaim_text)]
    for step in block.steps:
        sources.extend((step.kind.value, c) for c in step.citations)
    for _, citation in sources:
        if citation.kind is CitationKind.EVIDENCE:
            if not 1 <= citation.index <= evidence_count:
                violations.append(
                    Violation(
                        criterion=Criterion.GROUNDING,
                        detail=(
                            f"block C{block.index} cites E{citation.index} but only"
                            f" {evidence_count} evidence pieces exist"
                        ),
                        block=block.index,
                    )
                )
        else:
            if not 1 <= citation.index < block.index:
                violations.append(
                    Violation(
                        criterion=Criterion.GROUNDING,
                        detail=(
                            f"block C{block.index} cites C{citation.index}; only earlier"
                            " subclaims may be cited"
                        ),
                        block=block.index,
                    )
                )
    return violations
