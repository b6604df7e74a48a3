"""Pydantic request/response models for the HTTP API.

These mirror the core domain types at the wire boundary; verdicts travel
as their corpus labels (``SUPPORTED`` / ``REFUTED``) and step kinds as
their canonical keywords.
"""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field

from ..audit import AuditPolicy
from ..grammar import ReasoningChain, Step, StepKind, SubclaimBlock
from ..model import AnnotatedRecord, ClaimRecord, EvidenceSet, Verdict

VerdictLabel = Literal["SUPPORTED", "REFUTED"]
StepKeyword = Literal["Entity Resolution", "Resolution Verification", "Verification"]


def verdict_from_label(label: str) -> Verdict:
    return Verdict(label.lower())


class CitationOut(BaseModel):
    kind: Literal["evidence", "subclaim"]
    index: int
    span: tuple[int, int]


class StepIn(BaseModel):
    kind: StepKeyword
    text: str


class StepOut(StepIn):
    citations: list[CitationOut]


class BlockIn(BaseModel):
    index: int = Field(ge=1)
    subclaim: str
    steps: list[StepIn]
    status: VerdictLabel


class BlockOut(BlockIn):
    steps: list[StepOut]


class ChainIn(BaseModel):
    blocks: list[BlockIn]

    def to_chain(self) -> ReasoningChain:
        from ..grammar import extract_citations

        blocks = []
        for block in self.blocks:
            steps = tuple(
                Step(
                    kind=StepKind(step.kind),
                    text=step.text,
                    citations=tuple(extract_citations(step.text)),
                )
                for step in block.steps
            )
            blocks.append(
                SubclaimBlock(
                    index=block.index,
                    subclaim_text=block.subclaim,
                    steps=steps,
                    status=verdict_from_label(block.status),
                )
            )
        return ReasoningChain(blocks=tuple(blocks), raw="")


class ChainOut(BaseModel):
    blocks: list[BlockOut]

    @classmethod
    def from_chain(cls, chain: ReasoningChain) -> "ChainOut":
        return cls(
            blocks=[
                BlockOut(
                    index=block.index,
                    subclaim=block.subclaim_text,
                    steps=[
                        StepOut(
                            kind=step.kind.value,
                            text=step.text,
                            citations=[
                                CitationOut(kind=c.kind.value, index=c.index, span=c.span)
                                for c in step.citations
                            ],
                        )
                        for step in block.steps
                    ],
                    status=block.status.corpus_label(),
                )
                for block in chain.blocks
            ]
        )


class ParseRequest(BaseModel):
    text: str
    lenient: bool = False


class SerializeRequest(BaseModel):
    chain: ChainIn


class SerializeResponse(BaseModel):
    text: str


class JudgeRequest(BaseModel):
    text: str
    lenient: bool = False


class JudgeResponse(BaseModel):
    verdict: VerdictLabel


class VerdictParseRequest(BaseModel):
    text: str


class PolicyIn(BaseModel):
    require_decomposition: bool = True
    require_entity_analysis: bool = True
    require_grounding: bool = True
    strict_keywords: bool = True

    def to_policy(self) -> AuditPolicy:
        return AuditPolicy(**self.model_dump())


class ViolationOut(BaseModel):
    criterion: Literal["segmentation", "grounding", "format"]
    block: Optional[int]
    detail: str


class AuditReportOut(BaseModel):
    passed: bool
    violations: list[ViolationOut]


class AuditRequest(BaseModel):
    text: str
    evidence_count: int = Field(ge=1)
    policy: Optional[PolicyIn] = None


class AuditBatchItem(BaseModel):
    id: str
    text: str
    evidence_count: int = Field(ge=1)


class AuditBatchRequest(BaseModel):
    items: list[AuditBatchItem]
    policy: Optional[PolicyIn] = None


class AuditBatchEntry(BaseModel):
    id: str
    report: AuditReportOut


class AuditBatchResponse(BaseModel):
    reports: list[AuditBatchEntry]


class RecordIn(BaseModel):
    id: str
    claim: str
    evidence: list[str] = Field(min_length=1)
    label: Optional[VerdictLabel] = None
    meta: dict[str, Any] = Field(default_factory=dict)

    def to_record(self) -> ClaimRecord:
        return ClaimRecord(
            id=self.id,
            claim=self.claim,
            evidence=EvidenceSet(tuple(self.evidence)),
            gold=verdict_from_label(self.label) if self.label else None,
            meta=self.meta,
        )


class ExemplarIn(RecordIn):
    label: VerdictLabel
    chain: Optional[str] = None

    def to_annotated(self) -> AnnotatedRecord:
        return AnnotatedRecord(record=self.to_record(), chain=self.chain or "")


class PromptRequest(BaseModel):
    kind: str
    record: RecordIn
    exemplars: Optional[list[ExemplarIn]] = None


class PromptResponse(BaseModel):
    prompt: str


class ScoreRequest(BaseModel):
    gold: list[VerdictLabel]
    pred: list[VerdictLabel]
    ids: Optional[list[str]] = None


class IngestRequest(BaseModel):
    content: str
    format: Literal["hover", "feverous-s", "canonical"]
    hops: Optional[int] = None
    sample: Optional[int] = None
    seed: int = 0


class IngestResponse(BaseModel):
    lines: list[str]
    total: int


class StatsRequest(BaseModel):
    content: str


class WarmupExportRequest(BaseModel):
    content: str
    expected_refuted_fraction: Optional[float] = None
    mix_tolerance: float = 0.15


class WarmupExportResponse(BaseModel):
    lines: list[str]
    total: int


class SelfImproveJobRequest(BaseModel):
    corpus_path: str
    out_dir: str
    annotated_path: Optional[str] = None
    config: dict[str, Any] = Field(default_factory=dict)
    resume: bool = False


class EvaluateJobRequest(BaseModel):
    corpus_path: str
    out_dir: str
    mode: str
    endpoint: dict[str, Any]
    exemplars_path: Optional[str] = None
    temperature: float = 0.01
    max_tokens: int = 1024
    concurrency: int = 4
    max_attempts: int = 3
    lenient: bool = False


class JobStatus(BaseModel):
    id: str
    kind: str
    status: Literal["queued", "running", "succeeded", "failed"]
    error: Optional[dict[str, str]] = None
    result: Optional[dict[str, Any]] = None


class ErrorBody(BaseModel):
    category: Literal["input", "pipeline", "internal"]
    type: str
    message: str
