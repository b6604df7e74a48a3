import json

import pytest

from verichain.errors import InputError, MissingExemplars, MissingGoldLabel
from verichain.model import AnnotatedRecord, ClaimRecord, EvidenceSet, Verdict
from verichain.prompts import (
    DEFAULT_TEMPLATES,
    PromptKind,
    hint_for,
    load_template_overrides,
    render,
    render_evidence,
)

from .helpers import simple_chain

RECORD = ClaimRecord(
    id="r1",
    claim="Solo is an orange-flavored soft drink from Norway.",
    evidence=EvidenceSet(("Solo is a soft drink.", "Solo originates from Norway.")),
    gold=Verdict.SUPPORTED,
)

EXEMPLAR = AnnotatedRecord(
    record=ClaimRecord(
        id="x1",
        claim="Simon Grundel-Helmfelt is most famous as a field marshal.",
        evidence=EvidenceSet(("Baron Simon Grundel was a Swedish soldier.",)),
        gold=Verdict.REFUTED,
    ),
    chain=simple_chain([Verdict.REFUTED], evidence_count=1),
)

EVIDENCE_TEXT = "(1)[Solo is a soft drink.](2)[Solo originates from Norway.]"


class TestExactPromptTexts:
    def test_structured_prompt(self):
        expected = (
            "Based on the evidence, determine if the claim is supported by the"
            " evidence or refuted by it. Output the reasoning chain.\n"
            f"Claim: {RECORD.claim}\n"
            f"Evidence: {EVIDENCE_TEXT}"
        )
        assert render(PromptKind.STRUCTURED, RECORD) == expected

    def test_hint_supported_prompt(self):
        rendered = render(PromptKind.HINT_SUPPORTED, RECORD)
        assert rendered.endswith("\nHint: Every detail in this claim is supported.")

    def test_hint_refuted_prompt(self):
        record = ClaimRecord(
            id="r2", claim=RECORD.claim, evidence=RECORD.evidence, gold=Verdict.REFUTED
        )
        rendered = render(PromptKind.HINT_REFUTED, record)
        assert rendered.endswith(
            "\nHint: The claim should be refuted, locate the error in the reasoning chain."
        )

    def test_hint_prompts_differ_from_structured_only_by_hint_line(self):
        structured = render(PromptKind.STRUCTURED, RECORD)
        for kind in (PromptKind.HINT_SUPPORTED, PromptKind.HINT_REFUTED):
            hinted = render(kind, RECORD)
            assert hinted.startswith(structured + "\n")
            extra = hinted[len(structured) + 1 :]
            assert extra.startswith("Hint: ") and "\n" not in extra

    def test_zero_shot_prompt(self):
        expected = (
            "Based on the evidence, determine if the claim is supported by the"
            " evidence or refuted by it.\n"
            f"Claim: {RECORD.claim}\n"
            f"Evidence: {EVIDENCE_TEXT}\n"
            'Please respond with only whether the claim is "Supported" or "Refuted."'
        )
        assert render(PromptKind.ZERO_SHOT, RECORD) == expected

    def test_zero_shot_cot_prompt(self):
        rendered = render(PromptKind.ZERO_SHOT_COT, RECORD)
        assert rendered.endswith(
            "Think step by step, output your response in the following format:\n"
            "Chain: [your reasoning chain]\n"
            "Answer:[the claim is supported or the claim is refuted]"
        )

    def test_few_shot_prompt_layout(self):
        rendered = render(PromptKind.FEW_SHOT, RECORD, exemplars=[EXEMPLAR])
        assert rendered.startswith(
            "Based on the evidence, determine if the claim is supported by the"
            " evidence or refuted by it.\n"
            'Please respond with only whether the claim is "Supported" or "Refuted."'
            " Here are some examples:\n"
        )
        assert f"Claim: {EXEMPLAR.record.claim}\n" in rendered
        assert "Output: Refuted" in rendered
        assert rendered.endswith(f"Follow the above examples:\nClaim: {RECORD.claim}\nEvidence: {EVIDENCE_TEXT}\nOutput:")

    def test_few_shot_structured_prompt_layout(self):
        rendered = render(PromptKind.FEW_SHOT_STRUCTURED, RECORD, exemplars=[EXEMPLAR])
        assert "Output the reasoning chain. Here are some examples:" in rendered
        assert f"Chain: {EXEMPLAR.chain}" in rendered
        assert rendered.endswith("Chain:")

    def test_evidence_notation(self):
        assert render_evidence(["a", "b", "c"]) == "(1)[a](2)[b](3)[c]"


class TestHintSelection:
    def test_supported_picks_supported_hint(self):
        assert hint_for(Verdict.SUPPORTED) is PromptKind.HINT_SUPPORTED

    def test_refuted_picks_refuted_hint(self):
        assert hint_for(Verdict.REFUTED) is PromptKind.HINT_REFUTED

    def test_exhaustive_over_both_values(self):
        assert {hint_for(v) for v in Verdict} == {
            PromptKind.HINT_SUPPORTED,
            PromptKind.HINT_REFUTED,
        }


class TestRenderContract:
    def test_deterministic(self):
        for kind in PromptKind:
            exemplars = [EXEMPLAR] if "few_shot" in kind.value else None
            once = render(kind, RECORD, exemplars=exemplars)
            twice = render(kind, RECORD, exemplars=exemplars)
            assert once == twice

    def test_no_unresolved_slots(self):
        for kind in PromptKind:
            exemplars = [EXEMPLAR] if "few_shot" in kind.value else None
            rendered = render(kind, RECORD, exemplars=exemplars)
            for slot in ("{claim}", "{evidence}", "{exemplars}"):
                assert slot not in rendered, (kind, slot)

    def test_missing_exemplars(self):
        with pytest.raises(MissingExemplars):
            render(PromptKind.FEW_SHOT, RECORD)
        with pytest.raises(MissingExemplars):
            render(PromptKind.FEW_SHOT_STRUCTURED, RECORD, exemplars=[])

    def test_hint_needs_gold_label(self):
        unlabeled = ClaimRecord(id="u", claim="c", evidence=EvidenceSet(("e",)))
        with pytest.raises(MissingGoldLabel):
            render(PromptKind.HINT_SUPPORTED, unlabeled)

    def test_exemplar_order_is_preserved(self):
        other = AnnotatedRecord(
            record=ClaimRecord(
                id="x2",
                claim="A second exemplar claim.",
                evidence=EvidenceSet(("More evidence.",)),
                gold=Verdict.SUPPORTED,
            ),
            chain=simple_chain([Verdict.SUPPORTED], evidence_count=1),
        )
        rendered = render(PromptKind.FEW_SHOT, RECORD, exemplars=[EXEMPLAR, other])
        assert rendered.index(EXEMPLAR.record.claim) < rendered.index(other.record.claim)

    def test_brace_tokens_in_claim_are_inert(self):
        tricky = ClaimRecord(
            id="t", claim="A claim containing {evidence} braces.", evidence=EvidenceSet(("e",))
        )
        rendered = render(PromptKind.STRUCTURED, tricky)
        assert "A claim containing {evidence} braces." in rendered
        assert rendered.count("(1)[e]") == 1


class TestOverrides:
    def test_override_file_replaces_skeleton(self, tmp_path):
        path = tmp_path / "templates.json"
        path.write_text(json.dumps({"structured": "Q: {claim} | E: {evidence}"}))
        templates = load_template_overrides(path)
        rendered = render(PromptKind.STRUCTURED, RECORD, templates=templates)
        assert rendered == f"Q: {RECORD.claim} | E: {EVIDENCE_TEXT}"
        # Untouched kinds keep their defaults.
        assert templates[PromptKind.ZERO_SHOT] == DEFAULT_TEMPLATES[PromptKind.ZERO_SHOT]

    def test_unknown_kind_rejected(self, tmp_path):
        path = tmp_path / "templates.json"
        path.write_text(json.dumps({"mystery": "text"}))
        with pytest.raises(InputError):
            load_template_overrides(path)

    def test_unknown_slot_rejected(self, tmp_path):
        path = tmp_path / "templates.json"
        path.write_text(json.dumps({"structured": "{claim} {nonsense}"}))
        with pytest.raises(InputError):
            load_template_overrides(path)
