"""Self-improvement data selection pipeline.

One round walks the labeled corpus and, per record:

1. generates a reasoning chain from the structured prompt and judges it;
2. when the judged verdict misses the gold label (or the output is
   malformed or truncated), regenerates once with the label-revealing
   hint prompt;
3. passes the surviving candidate through the structure audit (unless
   format checking is disabled) and emits a training pair.

Every record lands in exactly one ledger bucket: ``d1`` (initially
correct), ``d2`` (hint-rescued), ``rejected_wrong`` or
``rejected_format``. The emitted training file holds the selection pairs
in corpus order followed by the human-annotated warm-up pairs; training
itself is external, the pipeline only produces files and expects a fresh
endpoint per round.

Generations are checkpointed in a per-round journal keyed by
``(record id, prompt hash)``, so an interrupted run resumes idempotently
and a scripted-backend run is byte-deterministic end to end.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from .audit import DEFAULT_POLICY, AuditPolicy, AuditReport, audit
from .errors import (
    ChecksumMismatch,
    EndpointRejected,
    InputError,
    InvalidAnnotatedChain,
    MissingEndpointForRound,
    MissingGoldLabel,
    TransportError,
)
from .grammar import ChainParseError, parse_chain
from .inference import (
    Backend,
    Fallback,
    FinishReason,
    GenerationClient,
    GenerationRequest,
    HttpBackend,
    ScriptedBackend,
    prompt_fingerprint,
)
from .judge import judge
from .model import AnnotatedRecord, ClaimRecord, Verdict
from .prompts import PromptKind, hint_for, load_template_overrides, render

logger = logging.getLogger(__name__)


class Bucket(enum.Enum):
    D1 = "d1"
    D2 = "d2"
    REJECTED_WRONG = "rejected_wrong"
    REJECTED_FORMAT = "rejected_format"


class PairSource(enum.Enum):
    HUMAN = "human"
    D1 = "d1"
    D2 = "d2"


@dataclass(frozen=True)
class TrainingPair:
    """A prompt/chain pair ready for supervised fine-tuning."""

    id: str
    source: PairSource
    input: str
    output: str

    def to_json_line(self) -> str:
        return json.dumps(
            {"id": self.id, "source": self.source.value, "input": self.input, "output": self.output},
            ensure_ascii=False,
        )


@dataclass
class LedgerEntry:
    """Per-example diagnostics: what was generated and where it landed."""

    id: str
    gold: Verdict
    bucket: Bucket
    initial_chain: str | None = None
    initial_parse_ok: bool = False
    initial_verdict: Verdict | None = None
    hint_chain: str | None = None
    hint_parse_ok: bool = False
    hint_verdict: Verdict | None = None
    audit: AuditReport | None = None
    note: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "gold": self.gold.corpus_label(),
            "bucket": self.bucket.value,
            "initial_chain": self.initial_chain,
            "initial_parse_ok": self.initial_parse_ok,
            "initial_verdict": self.initial_verdict.corpus_label() if self.initial_verdict else None,
            "hint_chain": self.hint_chain,
            "hint_parse_ok": self.hint_parse_ok,
            "hint_verdict": self.hint_verdict.corpus_label() if self.hint_verdict else None,
            "audit": self.audit.to_dict() if self.audit else None,
            "note": self.note,
        }


@dataclass
class SelectionLedger:
    """Ordered per-example outcomes of one pipeline round."""

    entries: list[LedgerEntry] = field(default_factory=list)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def bucket_counts(self) -> dict[Bucket, int]:
        counts = {bucket: 0 for bucket in Bucket}
        for entry in self.entries:
            counts[entry.bucket] += 1
        return counts

    def by_id(self) -> dict[str, LedgerEntry]:
        return {entry.id: entry for entry in self.entries}

    def write(self, path: str | Path, config: Mapping[str, Any] | None = None) -> None:
        """Write one JSON object per example; the resolved run config first."""
        with open(path, "w", encoding="utf-8") as handle:
            if config is not None:
                handle.write(json.dumps({"run_config": dict(config)}, ensure_ascii=False) + "\n")
            for entry in self.entries:
                handle.write(json.dumps(entry.to_dict(), ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class EndpointSpec:
    """Where one round's generations come from."""

    kind: str = "http"  # "http" or "scripted"
    base_url: str | None = None
    model: str = ""
    api_key_env: str | None = None
    fixtures: str | None = None
    fallback: str = "error"

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "base_url": self.base_url,
            "model": self.model,
            "api_key_env": self.api_key_env,
            "fixtures": self.fixtures,
            "fallback": self.fallback,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EndpointSpec":
        known = {f: data[f] for f in cls.__dataclass_fields__ if f in data}
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InputError(f"unknown endpoint keys: {sorted(unknown)}")
        return cls(**known)


def build_backend(spec: EndpointSpec, env: Mapping[str, str] | None = None) -> Backend:
    env = dict(env if env is not None else os.environ)
    if spec.kind == "scripted":
        if not spec.fixtures:
            raise InputError("scripted endpoint needs a 'fixtures' path")
        return ScriptedBackend.from_file(spec.fixtures, fallback=Fallback(spec.fallback))
    if spec.kind == "http":
        base_url = spec.base_url or env.get("VERICHAIN_ENDPOINT")
        if not base_url:
            raise InputError("http endpoint needs 'base_url' or VERICHAIN_ENDPOINT")
        api_key = env.get(spec.api_key_env) if spec.api_key_env else env.get("VERICHAIN_API_KEY")
        return HttpBackend(base_url=base_url, api_key=api_key, model_name=spec.model)
    raise InputError(f"unknown endpoint kind {spec.kind!r}")


@dataclass(frozen=True)
class PipelineConfig:
    rounds: int = 1
    use_hints: bool = True
    use_format_check: bool = True
    audit_policy: AuditPolicy = DEFAULT_POLICY
    temperature: float = 0.01
    hint_temperature: float | None = None
    max_tokens: int = 1024
    concurrency: int = 4
    max_attempts: int = 3
    backoff_base: float = 0.5
    checkpoint_dir: str | None = None
    endpoints: tuple[EndpointSpec, ...] = ()
    template_overrides: str | None = None
    warmup_expected_refuted_fraction: float | None = None
    warmup_mix_tolerance: float = 0.15

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.concurrency < 1:
            raise ValueError("concurrency must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return {
            "rounds": self.rounds,
            "use_hints": self.use_hints,
            "use_format_check": self.use_format_check,
            "audit_policy": self.audit_policy.to_dict(),
            "temperature": self.temperature,
            "hint_temperature": self.hint_temperature,
            "max_tokens": self.max_tokens,
            "concurrency": self.concurrency,
            "max_attempts": self.max_attempts,
            "backoff_base": self.backoff_base,
            "checkpoint_dir": self.checkpoint_dir,
            "endpoints": [spec.to_dict() for spec in self.endpoints],
            "template_overrides": self.template_overrides,
            "warmup_expected_refuted_fraction": self.warmup_expected_refuted_fraction,
            "warmup_mix_tolerance": self.warmup_mix_tolerance,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PipelineConfig":
        data = dict(data)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        if "audit_policy" in data:
            data["audit_policy"] = AuditPolicy.from_dict(data["audit_policy"])
        if "endpoints" in data:
            data["endpoints"] = tuple(EndpointSpec.from_dict(e) for e in data["endpoints"])
        return cls(**data)


class GenerationJournal:
    """Append-only checkpoint of completed generations, one JSON line each.

    Lines are content-addressed by ``(record id, prompt hash)`` and carry
    an integrity checksum; a corrupt line raises ChecksumMismatch on
    load. A truncated final line (a write cut short by a crash) is
    dropped, since that generation never completed.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[str, tuple[str, str]] = {}
        self._handle = None
        if self.path.exists():
            self._load()

    @staticmethod
    def key(record_id: str, prompt: str) -> str:
        return f"{record_id}\x1f{prompt_fingerprint(prompt)}"

    @staticmethod
    def _checksum(key: str, text: str, finish: str) -> str:
        joined = "\x1f".join((key, text, finish))
        return hashlib.sha256(joined.encode("utf-8")).hexdigest()

    def _load(self) -> None:
        lines = self.path.read_text(encoding="utf-8").splitlines()
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError:
                if i == len(lines) - 1:
                    logger.warning("dropping truncated checkpoint line in %s", self.path)
                    continue
                raise ChecksumMismatch(f"{self.path}: unreadable checkpoint line {i + 1}")
            try:
                key, text, finish, check = data["key"], data["text"], data["finish"], data["check"]
            except (KeyError, TypeError):
                raise ChecksumMismatch(f"{self.path}: malformed checkpoint line {i + 1}") from None
            if self._checksum(key, text, finish) != check:
                raise ChecksumMismatch(f"{self.path}: checksum mismatch at line {i + 1}")
            self._entries[key] = (text, finish)

    def get(self, key: str) -> tuple[str, FinishReason] | None:
        entry = self._entries.get(key)
        if entry is None:
            return None
        text, finish = entry
        return text, FinishReason(finish)

    def record(self, key: str, text: str, finish: FinishReason) -> None:
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = (text, finish.value)
            if self._handle is None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                self._handle = open(self.path, "a", encoding="utf-8")
            line = json.dumps(
                {
                    "key": key,
                    "text": text,
                    "finish": finish.value,
                    "check": self._checksum(key, text, finish.value),
                },
                ensure_ascii=False,
            )
            self._handle.write(line + "\n")
            self._handle.flush()

    def close(self) -> None:
        with self._lock:
            if self._handle is not None:
                self._handle.close()
                self._handle = None


@dataclass
class RoundResult:
    round_index: int
    ledger: SelectionLedger
    pairs: list[TrainingPair]


@dataclass
class RunResult:
    rounds: list[RoundResult]
    training_paths: list[Path]
    ledger_paths: list[Path]


def export_warmup(
    annotated: Sequence[AnnotatedRecord],
    expected_refuted_fraction: float | None = None,
    mix_tolerance: float = 0.15,
    templates: Mapping[PromptKind, str] | None = None,
) -> list[TrainingPair]:
    """Turn human-annotated records into warm-up training pairs.

    Every chain is re-validated under the full audit policy regardless of
    any run-level ablation; annotated data is authored to the full
    structure. Warns when the refuted fraction drifts from the configured
    expectation.
    """
    pairs = []
    refuted = 0
    for item in annotated:
        record = item.record
        report = audit(item.chain, evidence_count=len(record.evidence), policy=DEFAULT_POLICY)
        if not report.passed:
            raise InvalidAnnotatedChain(record.id, report)
        if record.gold is Verdict.REFUTED:
            refuted += 1
        pairs.append(
            TrainingPair(
                id=record.id,
                source=PairSource.HUMAN,
                input=render(PromptKind.STRUCTURED, record, templates=templates),
                output=item.chain,
            )
        )
    if expected_refuted_fraction is not None and pairs:
        actual = refuted / len(pairs)
        if abs(actual - expected_refuted_fraction) > mix_tolerance:
            logger.warning(
                "warm-up label mix: refuted fraction %.2f deviates from expected %.2f",
                actual,
                expected_refuted_fraction,
            )
    return pairs


def write_training_file(pairs: Sequence[TrainingPair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for pair in pairs:
            handle.write(pair.to_json_line() + "\n")


def load_training_file(path: str | Path) -> list[TrainingPair]:
    pairs = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            data = json.loads(line)
            try:
                pairs.append(
                    TrainingPair(
                        id=str(data["id"]),
                        source=PairSource(data["source"]),
                        input=data["input"],
                        output=data["output"],
                    )
                )
            except (KeyError, ValueError) as exc:
                raise InputError(f"training file line {line_no}: {exc}") from None
    return pairs


class _RoundRunner:
    def __init__(
        self,
        client: GenerationClient,
        config: PipelineConfig,
        journal: GenerationJournal | None,
        templates: Mapping[PromptKind, str] | None,
    ):
        self.client = client
        self.config = config
        self.journal = journal
        self.templates = templates
        self.lenient = not config.audit_policy.strict_keywords

    def _generate(self, record_id: str, prompt: str, temperature: float) -> tuple[str, FinishReason]:
        key = GenerationJournal.key(record_id, prompt)
        if self.journal is not None:
            cached = self.journal.get(key)
            if cached is not None:
                return cached
        result = self.client.generate(
            GenerationRequest(
                prompt=prompt,
                temperature=temperature,
                max_tokens=self.config.max_tokens,
            )
        )
        if self.journal is not None:
            self.journal.record(key, result.text, result.finish_reason)
        return result.text, result.finish_reason

    def _judge_text(self, text: str, finish: FinishReason) -> tuple[bool, Verdict | None, str | None]:
        """Returns (parse_ok, verdict, note). Truncated output is never judged."""
        if finish is not FinishReason.STOP:
            return False, None, "generation truncated"
        try:
            chain = parse_chain(text, lenient=self.lenient)
        except ChainParseError as exc:
            return False, None, f"unparseable chain: {exc}"
        return True, judge(chain), None

    def process(self, record: ClaimRecord) -> tuple[LedgerEntry, TrainingPair | None]:
        assert record.gold is not None
        structured_prompt = render(PromptKind.STRUCTURED, record, templates=self.templates)
        entry = LedgerEntry(id=record.id, gold=record.gold, bucket=Bucket.REJECTED_WRONG)

        try:
            text, finish = self._generate(record.id, structured_prompt, self.config.temperature)
        except (TransportError, EndpointRejected) as exc:
            entry.note = f"initial generation failed: {exc}"
            return entry, None

        entry.initial_chain = text
        entry.initial_parse_ok, entry.initial_verdict, note = self._judge_text(text, finish)
        entry.note = note

        candidate: tuple[str, Bucket] | None = None
        if entry.initial_verdict is record.gold:
            candidate = (text, Bucket.D1)
        elif self.config.use_hints:
            hint_prompt = render(hint_for(record.gold), record, templates=self.templates)
            temperature = (
                self.config.hint_temperature
                if self.config.hint_temperature is not None
                else self.config.temperature
            )
            try:
                hint_text, hint_finish = self._generate(record.id, hint_prompt, temperature)
            except (TransportError, EndpointRejected) as exc:
                entry.note = f"hint generation failed: {exc}"
                return entry, None
            entry.hint_chain = hint_text
            entry.hint_parse_ok, entry.hint_verdict, hint_note = self._judge_text(
                hint_text, hint_finish
            )
            if hint_note is not None:
                entry.note = f"hint: {hint_note}" if entry.note is None else f"{entry.note}; hint: {hint_note}"
            if entry.hint_verdict is record.gold:
                candidate = (hint_text, Bucket.D2)

        if candidate is None:
            entry.bucket = Bucket.REJECTED_WRONG
            return entry, None

        chain_text, bucket = candidate
        report = audit(chain_text, len(record.evidence), self.config.audit_policy)
        entry.audit = report
        if self.config.use_format_check and not report.passed:
            entry.bucket = Bucket.REJECTED_FORMAT
            return entry, None

        entry.bucket = bucket
        source = PairSource.D1 if bucket is Bucket.D1 else PairSource.D2
        pair = TrainingPair(
            id=record.id, source=source, input=structured_prompt, output=chain_text
        )
        return entry, pair


def run_round(
    corpus: Sequence[ClaimRecord],
    annotated: Sequence[AnnotatedRecord],
    client: GenerationClient,
    config: PipelineConfig = PipelineConfig(),
    round_index: int = 1,
) -> RoundResult:
    """Execute one generate/judge/hint/audit round over the corpus.

    Returns the per-example ledger and the training pairs: selection
    pairs in corpus order, then the human warm-up pairs.
    """
    missing = [r.id for r in corpus if r.gold is None]
    if missing:
        raise MissingGoldLabel(f"corpus records without gold labels: {missing[:5]}")

    templates = (
        load_template_overrides(config.template_overrides)
        if config.template_overrides
        else None
    )
    journal = None
    if config.checkpoint_dir:
        journal_path = Path(config.checkpoint_dir) / f"round{round_index}.generations.jsonl"
        journal = GenerationJournal(journal_path)

    runner = _RoundRunner(client=client, config=config, journal=journal, templates=templates)
    try:
        with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
            outcomes = list(pool.map(runner.process, corpus))
    finally:
        if journal is not None:
            journal.close()

    ledger = SelectionLedger(entries=[entry for entry, _ in outcomes])
    pairs = [pair for _, pair in outcomes if pair is not None]
    pairs.extend(
        export_warmup(
            annotated,
            expected_refuted_fraction=config.warmup_expected_refuted_fraction,
            mix_tolerance=config.warmup_mix_tolerance,
            templates=templates,
        )
    )
    return RoundResult(round_index=round_index, ledger=ledger, pairs=pairs)


def run(
    corpus: Sequence[ClaimRecord],
    annotated: Sequence[AnnotatedRecord],
    config: PipelineConfig,
    out_dir: str | Path,
    env: Mapping[str, str] | None = None,
) -> RunResult:
    """Execute all configured rounds, writing artifacts per round.

    Later rounds are meant to run against the externally fine-tuned model
    from the previous round's training file, so each round must name its
    own endpoint; a round without one raises MissingEndpointForRound
    rather than blocking.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results: list[RoundResult] = []
    training_paths: list[Path] = []
    ledger_paths: list[Path] = []

    for round_index in range(1, config.rounds + 1):
        if round_index > len(config.endpoints):
            raise MissingEndpointForRound(round_index)
        backend = build_backend(config.endpoints[round_index - 1], env)
        client = GenerationClient(
            backend,
            max_attempts=config.max_attempts,
            backoff_base=config.backoff_base,
            max_in_flight=config.concurrency,
        )
        result = run_round(corpus, annotated, client, config, round_index=round_index)
        training_path = out_dir / f"training_round{round_index}.jsonl"
        ledger_path = out_dir / f"ledger_round{round_index}.jsonl"
        write_training_file(result.pairs, training_path)
        result.ledger.write(ledger_path, config={**config.to_dict(), "round": round_index})
        results.append(result)
        training_paths.append(training_path)
        ledger_paths.append(ledger_path)
        logger.info(
            "round %d: %s",
            round_index,
            {b.value: c for b, c in result.ledger.bucket_counts().items()},
        )

    return RunResult(rounds=results, training_paths=training_paths, ledger_paths=ledger_paths)
