"""Shared test utilities: chain builders, violation injection, scripted corpora."""

from __future__ import annotations

import random
from dataclasses import dataclass

from verichain.inference import prompt_fingerprint
from verichain.model import AnnotatedRecord, ClaimRecord, EvidenceSet, Verdict
from verichain.prompts import PromptKind, hint_for, render


def block_text(index: int, subclaim: str, steps: list[tuple[str, str]], status: Verdict) -> str:
    lines = [f"C{index}: {subclaim}"]
    lines.extend(f"{keyword}: {text}" for keyword, text in steps)
    lines.append(f"Status: {status.render()}.")
    return "\n".join(lines)


def chain_text(blocks: list[tuple[str, list[tuple[str, str]], Verdict]]) -> str:
    return "\n\n".join(
        block_text(i, subclaim, steps, status)
        for i, (subclaim, steps, status) in enumerate(blocks, start=1)
    )


def simple_chain(statuses: list[Verdict], evidence_count: int = 3) -> str:
    """A minimal valid chain with one block per status, grounded in E1."""
    assert evidence_count >= 1
    return chain_text(
        [
            (f"Subclaim number {i + 1}.", [("Verification", f"E1 confirms subclaim {i + 1}.")], status)
            for i, status in enumerate(statuses)
        ]
    )


def random_valid_chain(rng: random.Random, evidence_count: int = 3, max_blocks: int = 4) -> str:
    """Generate a chain that satisfies the full audit policy."""
    blocks = []
    n_blocks = rng.randint(1, max_blocks)
    for i in range(1, n_blocks + 1):
        steps: list[tuple[str, str]] = []
        for _ in range(rng.randint(0, 2)):
            evidence = rng.randint(1, evidence_count)
            steps.append(("Entity Resolution", f"Term {i} -> Entity {i} (from E{evidence})"))
            if rng.random() < 0.8:
                steps.append(
                    ("Resolution Verification", f"E{rng.randint(1, evidence_count)} confirms entity {i}.")
                )
        cite = f"E{rng.randint(1, evidence_count)}"
        if i > 1 and rng.random() < 0.3:
            cite = f"C{rng.randint(1, i - 1)}"
        steps.append(("Verification", f"{cite} settles subclaim {i}."))
        status = rng.choice([Verdict.SUPPORTED, Verdict.REFUTED])
        blocks.append((f"Subclaim {i} of the claim.", steps, status))
    return chain_text(blocks)


def inject_nonexistent_evidence(text: str, evidence_count: int) -> str:
    lines = text.split("\n")
    for i, line in enumerate(lines):
        if line.startswith("Verification: "):
            lines[i] = line + f" E{evidence_count + 1} agrees."
            return "\n".join(lines)
    raise AssertionError("no Verification line to corrupt")


def inject_forward_subclaim(text: str) -> str:
    lines = text.split("\n")
    for i, line in enumerate(lines):
        if line.startswith("Verification: "):
            lines[i] = line + " This matches C2."
            return "\n".join(lines)
    raise AssertionError("no Verification line to corrupt")


def inject_missing_status(text: str) -> str:
    lines = text.split("\n")
    index = max(i for i, line in enumerate(lines) if line.startswith("Status: "))
    del lines[index]
    return "\n".join(lines)


def inject_missing_verification(text: str) -> str:
    lines = text.split("\n")
    index = min(i for i, line in enumerate(lines) if line.startswith("Verification: "))
    del lines[index]
    return "\n".join(lines)


def inject_nonsequential_blocks(text: str) -> str:
    assert "\nC2: " in text, "need a chain with at least two blocks"
    return text.replace("\nC2: ", "\nC9: ", 1)


VIOLATION_INJECTORS = {
    "nonexistent_evidence": lambda text, n: inject_nonexistent_evidence(text, n),
    "forward_subclaim": lambda text, n: inject_forward_subclaim(text),
    "missing_status": lambda text, n: inject_missing_status(text),
    "missing_verification": lambda text, n: inject_missing_verification(text),
    "nonsequential_blocks": lambda text, n: inject_nonsequential_blocks(text),
}


@dataclass
class PipelineFixture:
    records: list[ClaimRecord]
    annotated: list[AnnotatedRecord]
    responses: dict[str, str]
    expected_buckets: dict[str, str]


def _record(i: int, gold: Verdict) -> ClaimRecord:
    return ClaimRecord(
        id=f"ex{i:02d}",
        claim=f"Claim number {i} states a fact about entity {i}.",
        evidence=EvidenceSet(
            tuple(f"Evidence piece {j} about entity {i}." for j in range(1, 4))
        ),
        gold=gold,
    )


def build_pipeline_fixture() -> PipelineFixture:
    """A 20-record scripted corpus exercising every selection bucket.

    Stories by record id:
      ex01-ex06  initial chain correct and well-formed          -> d1
      ex07-ex10  initial verdict wrong, hinted chain correct    -> d2
      ex11-ex12  initial unparseable, hinted chain correct      -> d2
      ex13-ex15  wrong verdict even with hint                   -> rejected_wrong
      ex16       unparseable with and without hint              -> rejected_wrong
      ex17-ex18  correct verdict but cites E9 of 3              -> rejected_format
      ex19       hint-rescued verdict but forward-cites C2      -> rejected_format
      ex20       no scripted response for the initial prompt    -> rejected_wrong
    """
    records: list[ClaimRecord] = []
    responses: dict[str, str] = {}
    expected: dict[str, str] = {}

    def add(prompt: str, response: str) -> None:
        responses[prompt_fingerprint(prompt)] = response

    def good_chain(record: ClaimRecord, verdict: Verdict) -> str:
        return simple_chain([verdict])

    def bad_grounding_chain(record: ClaimRecord, verdict: Verdict) -> str:
        return chain_text(
            [(record.claim, [("Verification", "E9 confirms the subclaim.")], verdict)]
        )

    def forward_cite_chain(record: ClaimRecord, verdict: Verdict) -> str:
        return chain_text(
            [(record.claim, [("Verification", "E1 confirms it. This matches C2.")], verdict)]
        )

    unparseable = "The claim looks plausible to me, so I will call it supported."

    for i in range(1, 21):
        gold = Verdict.SUPPORTED if i % 2 else Verdict.REFUTED
        record = _record(i, gold)
        records.append(record)
        structured = render(PromptKind.STRUCTURED, record)
        hinted = render(hint_for(gold), record)

        if i <= 6:
            add(structured, good_chain(record, gold))
            expected[record.id] = "d1"
        elif i <= 10:
            add(structured, good_chain(record, gold.opposite()))
            add(hinted, good_chain(record, gold))
            expected[record.id] = "d2"
        elif i <= 12:
            add(structured, unparseable)
            add(hinted, good_chain(record, gold))
            expected[record.id] = "d2"
        elif i <= 15:
            add(structured, good_chain(record, gold.opposite()))
            add(hinted, good_chain(record, gold.opposite()))
            expected[record.id] = "rejected_wrong"
        elif i == 16:
            add(structured, unparseable)
            add(hinted, unparseable)
            expected[record.id] = "rejected_wrong"
        elif i <= 18:
            add(structured, bad_grounding_chain(record, gold))
            expected[record.id] = "rejected_format"
        elif i == 19:
            add(structured, good_chain(record, gold.opposite()))
            add(hinted, forward_cite_chain(record, gold))
            expected[record.id] = "rejected_format"
        else:
            # ex20: initial prompt deliberately missing from the fixture map.
            add(hinted, good_chain(record, gold))
            expected[record.id] = "rejected_wrong"

    annotated = []
    for i, gold in ((91, Verdict.REFUTED), (92, Verdict.SUPPORTED)):
        record = _record(i, gold)
        annotated.append(AnnotatedRecord(record=record, chain=simple_chain([gold])))

    return PipelineFixture(
        records=records, annotated=annotated, responses=responses, expected_buckets=expected
    )
