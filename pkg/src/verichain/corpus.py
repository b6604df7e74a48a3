"""Corpus ingestion, canonical serialization, and dataset statistics.

The canonical corpus format is one JSON object per line::

    {"id": "...", "claim": "...", "evidence": ["...", ...], "label": "SUPPORTED"}

``label`` is optional (inference-only corpora) and tolerant of casing; an
optional ``meta`` object carries source-specific tags such as the HOVER
hop count. HOVER and FEVEROUS-S release files are normalized into this
form on ingest. Evidence granularity follows the source release; pieces
are never re-segmented.
"""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

from .audit import DEFAULT_POLICY, AuditPolicy, audit
from .errors import EmptyCorpus, InvalidAnnotatedChain, SchemaError, UnknownLabel
from .model import AnnotatedRecord, ClaimRecord, EvidenceSet, Verdict


class CorpusFormat(enum.Enum):
    HOVER = "hover"
    FEVEROUS_S = "feverous-s"
    CANONICAL = "canonical"


_HOVER_LABELS = {"SUPPORTED": Verdict.SUPPORTED, "NOT_SUPPORTED": Verdict.REFUTED}
_FEVEROUS_LABELS = {
    "SUPPORTS": Verdict.SUPPORTED,
    "SUPPORTED": Verdict.SUPPORTED,
    "REFUTES": Verdict.REFUTED,
    "REFUTED": Verdict.REFUTED,
}
_CANONICAL_LABELS = {"SUPPORTED": Verdict.SUPPORTED, "REFUTED": Verdict.REFUTED}


@dataclass(frozen=True)
class CorpusStats:
    """Aggregate corpus statistics; word counts use whitespace tokenization."""

    total: int
    supported: int
    refuted: int
    avg_words_claim: float
    avg_evidence_pieces: float
    avg_words_evidence: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "total": self.total,
            "supported": self.supported,
            "refuted": self.refuted,
            "avg_words_claim": self.avg_words_claim,
            "avg_evidence_pieces": self.avg_evidence_pieces,
            "avg_words_evidence": self.avg_words_evidence,
        }


def ingest(
    path: str | Path,
    format: CorpusFormat,
    hops: int | None = None,
) -> list[ClaimRecord]:
    """Load a corpus file in the declared format into canonical records.

    ``hops`` filters HOVER records by hop count; it is ignored for other
    formats. Raises SchemaError / UnknownLabel on the first bad record.
    """
    return ingest_text(Path(path).read_text(encoding="utf-8"), format, hops)


def ingest_text(text: str, format: CorpusFormat, hops: int | None = None) -> list[ClaimRecord]:
    """Same as ``ingest`` but over already-read file content."""
    if format is CorpusFormat.CANONICAL:
        records = _read_canonical(text)
    elif format is CorpusFormat.HOVER:
        records = _read_hover(text, hops)
    else:
        records = _read_feverous(text)
    _check_unique_ids(records)
    return records


def load_canonical(path: str | Path) -> list[ClaimRecord]:
    return load_canonical_text(Path(path).read_text(encoding="utf-8"))


def load_canonical_text(text: str) -> list[ClaimRecord]:
    records = _read_canonical(text)
    _check_unique_ids(records)
    return records


def write_canonical(records: Iterable[ClaimRecord], path: str | Path) -> None:
    """Write records as canonical JSON lines; lossless for canonical input."""
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(canonical_line(record) + "\n")


def canonical_line(record: ClaimRecord) -> str:
    data: dict[str, Any] = {
        "id": record.id,
        "claim": record.claim,
        "evidence": list(record.evidence),
    }
    if record.gold is not None:
        data["label"] = record.gold.corpus_label()
    if record.meta:
        data["meta"] = record.meta
    return json.dumps(data, ensure_ascii=False)


def stats(records: Sequence[ClaimRecord]) -> CorpusStats:
    """Compute corpus statistics; averages are arithmetic means per record."""
    if not records:
        raise EmptyCorpus("cannot compute statistics of an empty corpus")
    supported = sum(1 for r in records if r.gold is Verdict.SUPPORTED)
    refuted = sum(1 for r in records if r.gold is Verdict.REFUTED)
    claim_words = [len(r.claim.split()) for r in records]
    evidence_pieces = [len(r.evidence) for r in records]
    # Words in evidence counts the full evidence set of a record.
    evidence_words = [sum(len(piece.split()) for piece in r.evidence) for r in records]
    n = len(records)
    return CorpusStats(
        total=n,
        supported=supported,
        refuted=refuted,
        avg_words_claim=sum(claim_words) / n,
        avg_evidence_pieces=sum(evidence_pieces) / n,
        avg_words_evidence=sum(evidence_words) / n,
    )


def stratified_sample(
    records: Sequence[ClaimRecord], n: int, seed: int
) -> list[ClaimRecord]:
    """Deterministic uniform sample of ``n`` records, stratified by gold label.

    Class quotas are proportional with largest-remainder rounding; the
    returned records keep their corpus order. Records without a gold
    label cannot be stratified and are rejected.
    """
    if n < 0:
        raise ValueError("sample size must be >= 0")
    if n >= len(records):
        return list(records)
    if any(r.gold is None for r in records):
        raise EmptyCorpus("stratified sampling needs gold labels on every record")

    by_label: dict[Verdict, list[int]] = {Verdict.SUPPORTED: [], Verdict.REFUTED: []}
    for position, record in enumerate(records):
        by_label[record.gold].append(position)

    total = len(records)
    quotas: dict[Verdict, int] = {}
    remainders = []
    for label, positions in by_label.items():
        exact = n * len(positions) / total
        quotas[label] = int(exact)
        remainders.append((exact - int(exact), label.value, label))
    shortfall = n - sum(quotas.values())
    for _, _, label in sorted(remainders, reverse=True)[:shortfall]:
        quotas[label] += 1

    rng = random.Random(seed)
    chosen: list[int] = []
    for label in (Verdict.SUPPORTED, Verdict.REFUTED):
        positions = by_label[label]
        take = min(quotas[label], len(positions))
        chosen.extend(rng.sample(positions, take))
    return [records[i] for i in sorted(chosen)]


def load_annotated(
    path: str | Path, policy: AuditPolicy = DEFAULT_POLICY
) -> list[AnnotatedRecord]:
    """Load human-annotated records; every chain is audited on load.

    File format: canonical record fields plus a ``chain`` key holding the
    reasoning chain text.
    """
    return load_annotated_text(Path(path).read_text(encoding="utf-8"), policy)


def load_annotated_text(
    text: str, policy: AuditPolicy = DEFAULT_POLICY
) -> list[AnnotatedRecord]:
    annotated = []
    for line_no, data in _iter_jsonl(text):
        chain = data.pop("chain", None)
        if not isinstance(chain, str) or not chain.strip():
            raise SchemaError(line_no, "annotated record must carry a 'chain' string")
        record = _record_from_canonical(data, line_no, _CANONICAL_LABELS)
        report = audit(chain, evidence_count=len(record.evidence), policy=policy)
        if not report.passed:
            raise InvalidAnnotatedChain(record.id, report)
        annotated.append(AnnotatedRecord(record=record, chain=chain))
    ids = [a.record.id for a in annotated]
    if len(set(ids)) != len(ids):
        raise SchemaError(None, "duplicate record ids in annotated file")
    return annotated


def _check_unique_ids(records: Sequence[ClaimRecord]) -> None:
    seen: set[str] = set()
    for record in records:
        if record.id in seen:
            raise SchemaError(None, f"duplicate record id {record.id!r}")
        seen.add(record.id)


def _iter_jsonl(text: str) -> Iterable[tuple[int, dict]]:
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(line_no, f"invalid JSON: {exc.msg}") from None
        if not isinstance(data, dict):
            raise SchemaError(line_no, "expected a JSON object per line")
        yield line_no, data


def _load_json_records(text: str) -> list[tuple[int | None, dict]]:
    """Accept either a JSON array or JSON lines."""
    stripped = text.lstrip()
    if stripped.startswith("["):
        try:
            items = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(None, f"invalid JSON: {exc.msg}") from None
        out = []
        for i, item in enumerate(items):
            if not isinstance(item, dict):
                raise SchemaError(None, f"array item {i} is not an object")
            out.append((None, item))
        return out
    return list(_iter_jsonl(text))


def _read_canonical(text: str) -> list[ClaimRecord]:
    return [
        _record_from_canonical(data, line_no, _CANONICAL_LABELS)
        for line_no, data in _iter_jsonl(text)
    ]


def _record_from_canonical(
    data: dict, line_no: int | None, labels: dict[str, Verdict]
) -> ClaimRecord:
    record_id = data.get("id")
    claim = data.get("claim")
    evidence = data.get("evidence")
    if not isinstance(record_id, (str, int)) or record_id == "":
        raise SchemaError(line_no, "missing or invalid 'id'")
    if not isinstance(claim, str) or not claim.strip():
        raise SchemaError(line_no, "missing or invalid 'claim'")
    items = _normalize_evidence(evidence, line_no)
    gold = None
    if "label" in data and data["label"] is not None:
        gold = _parse_label(str(data["label"]), labels, line_no)
    meta = data.get("meta") or {}
    if not isinstance(meta, dict):
        raise SchemaError(line_no, "'meta' must be an object")
    return ClaimRecord(
        id=str(record_id), claim=claim, evidence=EvidenceSet(tuple(items)), gold=gold, meta=meta
    )


def _normalize_evidence(evidence: Any, line_no: int | None) -> list[str]:
    if not isinstance(evidence, list) or not evidence:
        raise SchemaError(line_no, "'evidence' must be a non-empty list")
    items = []
    for piece in evidence:
        if isinstance(piece, str):
            items.append(piece)
        elif (
            isinstance(piece, list)
            and len(piece) == 2
            and all(isinstance(p, str) for p in piece)
        ):
            items.append(f"{piece[0]}: {piece[1]}")  # [title, text] pair
        else:
            raise SchemaError(line_no, f"unsupported evidence piece: {piece!r}")
    return items


def _parse_label(label: str, labels: dict[str, Verdict], line_no: int | None) -> Verdict:
    normalized = label.strip().upper().replace(" ", "_")
    if normalized in labels:
        return labels[normalized]
    raise UnknownLabel(f"line {line_no}: unknown label {label!r}" if line_no else f"unknown label {label!r}")


def _read_hover(text: str, hops: int | None) -> list[ClaimRecord]:
    records = []
    for line_no, data in _load_json_records(text):
        record_id = data.get("uid") or data.get("id")
        if record_id is None:
            raise SchemaError(line_no, "missing 'uid'")
        claim = data.get("claim")
        if not isinstance(claim, str) or not claim.strip():
            raise SchemaError(line_no, "missing or invalid 'claim'")
        num_hops = data.get("num_hops")
        if hops is not None and num_hops != hops:
            continue
        evidence = data.get("evidence") or data.get("gold_evidence") or data.get("supporting_facts")
        items = _normalize_evidence(evidence, line_no)
        label = data.get("label")
        if label is None:
            raise SchemaError(line_no, "missing 'label'")
        gold = _parse_label(str(label), _HOVER_LABELS, line_no)
        meta = {"hops": num_hops} if num_hops is not None else {}
        records.append(
            ClaimRecord(
                id=str(record_id),
                claim=claim,
                evidence=EvidenceSet(tuple(items)),
                gold=gold,
                meta=meta,
            )
        )
    return records


def _read_feverous(text: str) -> list[ClaimRecord]:
    records = []
    for line_no, data in _load_json_records(text):
        record_id = data.get("id")
        if record_id is None:
            raise SchemaError(line_no, "missing 'id'")
        claim = data.get("claim")
        if not isinstance(claim, str) or not claim.strip():
            raise SchemaError(line_no, "missing or invalid 'claim'")
        evidence = data.get("evidence") or data.get("gold_evidence")
        items = _normalize_evidence(evidence, line_no)
        label = data.get("label")
        if label is None:
            raise SchemaError(line_no, "missing 'label'")
        gold = _parse_label(str(label), _FEVEROUS_LABELS, line_no)
        records.append(
            ClaimRecord(
                id=str(record_id), claim=claim, evidence=EvidenceSet(tuple(items)), gold=gold
            )
        )
    return records
