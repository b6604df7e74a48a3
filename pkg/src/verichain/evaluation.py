"""Macro-F1 evaluation of a generation endpoint over a labeled corpus.

Predictions are derived per prompt mode: structured-chain modes parse the
output and apply the verdict judge; direct-answer modes parse the bare
verdict word; the step-by-step baseline scans the answer section for a
verdict keyword. Output that yields no verdict is counted in
``unparsed_count`` and scored as the wrong class, never dropped:
excluding it would inflate scores on full validation sets.

Per-class precision/recall/F1 use the 0/0 = 0 convention; macro-F1 is
the unweighted mean of the two per-class F1 values.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Sequence

from .errors import EmptyCorpus, LengthMismatch, MissingGoldLabel, UnknownVerdict
from .grammar import ChainParseError, parse_chain
from .inference import FinishReason, GenerationClient, GenerationRequest
from .judge import judge
from .model import AnnotatedRecord, ClaimRecord, Verdict, parse_verdict
from .prompts import CHAIN_KINDS, PromptKind, render

_VERDICT_WORD_RE = re.compile(r"\b(supported|refuted)\b", re.IGNORECASE)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict[str, float]:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass(frozen=True)
class Prediction:
    id: str
    gold: Verdict
    predicted: Verdict
    parsed: bool = True

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "gold": self.gold.corpus_label(),
            "predicted": self.predicted.corpus_label(),
            "parsed": self.parsed,
        }


@dataclass(frozen=True)
class EvalReport:
    per_class: dict[Verdict, ClassMetrics]
    macro_f1: float
    confusion: dict[tuple[Verdict, Verdict], int]
    predictions: tuple[Prediction, ...]
    unparsed_count: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "macro_f1": self.macro_f1,
            "per_class": {v.value: m.to_dict() for v, m in self.per_class.items()},
            "confusion": {
                f"{gold.value}->{pred.value}": count
                for (gold, pred), count in sorted(
                    self.confusion.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value)
                )
            },
            "total": len(self.predictions),
            "unparsed_count": self.unparsed_count,
        }


def score(
    gold: Sequence[Verdict],
    pred: Sequence[Verdict],
    ids: Sequence[str] | None = None,
    parsed: Sequence[bool] | None = None,
) -> EvalReport:
    """Score aligned gold/predicted verdict lists."""
    if len(gold) != len(pred):
        raise LengthMismatch(f"{len(gold)} gold labels vs {len(pred)} predictions")
    if not gold:
        raise EmptyCorpus("nothing to score")
    if ids is None:
        ids = [str(i) for i in range(len(gold))]
    if parsed is None:
        parsed = [True] * len(gold)

    confusion = {
        (g, p): 0 for g in Verdict for p in Verdict
    }
    for g, p in zip(gold, pred):
        confusion[(g, p)] += 1

    per_class = {}
    for label in Verdict:
        tp = confusion[(label, label)]
        fp = sum(confusion[(g, label)] for g in Verdict if g is not label)
        fn = sum(confusion[(label, p)] for p in Verdict if p is not label)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[label] = ClassMetrics(precision=precision, recall=recall, f1=f1)

    macro_f1 = sum(m.f1 for m in per_class.values()) / len(per_class)
    predictions = tuple(
        Prediction(id=i, gold=g, predicted=p, parsed=ok)
        for i, g, p, ok in zip(ids, gold, pred, parsed)
    )
    unparsed = sum(1 for ok in parsed if not ok)
    return EvalReport(
        per_class=per_class,
        macro_f1=macro_f1,
        confusion=confusion,
        predictions=predictions,
        unparsed_count=unparsed,
    )


def extract_verdict(text: str) -> Verdict:
    """Pull a verdict out of free-form answer text.

    Prefers the section after the last ``Answer:`` marker, falling back to
    the whole text; the last verdict keyword wins. Raises UnknownVerdict
    when no keyword occurs.
    """
    marker = text.rfind("Answer:")
    section = text[marker + len("Answer:"):] if marker >= 0 else text
    matches = _VERDICT_WORD_RE.findall(section) or _VERDICT_WORD_RE.findall(text)
    if not matches:
        raise UnknownVerdict(f"no verdict keyword in {text[:80]!r}")
    return Verdict.SUPPORTED if matches[-1].lower() == "supported" else Verdict.REFUTED


def predict_from_output(text: str, mode: PromptKind, lenient: bool = False) -> Verdict:
    """Derive a verdict from raw model output for the given prompt mode."""
    if mode in CHAIN_KINDS:
        return judge(parse_chain(text, lenient=lenient))
    if mode is PromptKind.ZERO_SHOT_COT:
        return extract_verdict(text)
    return parse_verdict(text)


def evaluate(
    records: Sequence[ClaimRecord],
    mode: PromptKind,
    client: GenerationClient,
    exemplars: Sequence[AnnotatedRecord] | None = None,
    temperature: float = 0.01,
    max_tokens: int = 1024,
    concurrency: int = 4,
    lenient: bool = False,
) -> EvalReport:
    """Run the endpoint over the corpus in the given mode and score it.

    Needs a gold label on every record. Endpoint failures propagate after
    the client's retries; unparseable output is scored as the wrong class.
    """
    if not records:
        raise EmptyCorpus("nothing to evaluate")
    missing = [r.id for r in records if r.gold is None]
    if missing:
        raise MissingGoldLabel(f"records without gold labels: {missing[:5]}")

    def run_one(record: ClaimRecord) -> tuple[Verdict, bool]:
        prompt = render(mode, record, exemplars=exemplars)
        result = client.generate(
            GenerationRequest(prompt=prompt, temperature=temperature, max_tokens=max_tokens)
        )
        if result.finish_reason is not FinishReason.STOP:
            return record.gold.opposite(), False
        try:
            return predict_from_output(result.text, mode, lenient=lenient), True
        except (ChainParseError, UnknownVerdict):
            return record.gold.opposite(), False

    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        outcomes = list(pool.map(run_one, records))

    gold = [r.gold for r in records]
    pred = [verdict for verdict, _ in outcomes]
    parsed = [ok for _, ok in outcomes]
    return score(gold, pred, ids=[r.id for r in records], parsed=parsed)


def format_report(report: EvalReport) -> str:
    """Aligned text table for terminals and logs."""
    lines = [
        f"{'class':<12}{'precision':>10}{'recall':>10}{'f1':>10}",
    ]
    for label in Verdict:
        m = report.per_class[label]
        lines.append(
            f"{label.value:<12}{m.precision:>10.4f}{m.recall:>10.4f}{m.f1:>10.4f}"
        )
    lines.append(f"{'macro-f1':<12}{'':>10}{'':>10}{report.macro_f1:>10.4f}")
    lines.append("")
    lines.append("confusion (gold -> predicted)")
    for (g, p), count in sorted(
        report.confusion.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value)
    ):
        lines.append(f"  {g.value:<10}-> {p.value:<10}{count:>8}")
    lines.append(f"unparsed outputs: {report.unparsed_count}")
    return "\n".join(lines)
