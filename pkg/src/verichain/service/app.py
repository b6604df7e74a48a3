"""FastAPI service wrapping the core package.

Stateless operations (parsing, judging, auditing, prompt rendering,
scoring, corpus transforms) answer synchronously; pipeline and
evaluation runs execute as background jobs polled by id. Input errors
map to HTTP 400 with a structured body, pipeline failures to 502, so
thin clients can translate them into exit codes without inspecting
messages.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..audit import DEFAULT_POLICY, audit
from ..corpus import (
    CorpusFormat,
    canonical_line,
    ingest_text,
    load_annotated,
    load_annotated_text,
    load_canonical,
    load_canonical_text,
    stats,
    stratified_sample,
)
from ..errors import InputError, PipelineError, VerichainError
from ..evaluation import evaluate, format_report, score
from ..grammar import parse_chain, serialize
from ..inference import GenerationClient
from ..judge import judge
from ..model import parse_verdict
from ..pipeline import EndpointSpec, PipelineConfig, build_backend, export_warmup, run
from ..prompts import PromptKind, render
from . import schemas
from .jobs import JobRegistry

logger = logging.getLogger(__name__)


def create_app() -> FastAPI:
    app = FastAPI(title="verichain", version=__version__)
    jobs = JobRegistry()

    @app.exception_handler(VerichainError)
    async def verichain_error_handler(request: Request, exc: VerichainError):
        if isinstance(exc, InputError):
            category, status = "input", 400
        elif isinstance(exc, PipelineError):
            category, status = "pipeline", 502
        else:  # pragma: no cover - no other subclasses exist
            category, status = "internal", 500
        body = schemas.ErrorBody(category=category, type=type(exc).__name__, message=str(exc))
        return JSONResponse(status_code=status, content={"error": body.model_dump()})

    @app.exception_handler(ValueError)
    async def value_error_handler(request: Request, exc: ValueError):
        body = schemas.ErrorBody(category="input", type="ValueError", message=str(exc))
        return JSONResponse(status_code=400, content={"error": body.model_dump()})

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    # -- chain operations ------------------------------------------------

    @app.post("/v1/chains/parse", response_model=schemas.ChainOut)
    def chains_parse(request: schemas.ParseRequest):
        return schemas.ChainOut.from_chain(parse_chain(request.text, lenient=request.lenient))

    @app.post("/v1/chains/serialize", response_model=schemas.SerializeResponse)
    def chains_serialize(request: schemas.SerializeRequest):
        return schemas.SerializeResponse(text=serialize(request.chain.to_chain()))

    @app.post("/v1/chains/judge", response_model=schemas.JudgeResponse)
    def chains_judge(request: schemas.JudgeRequest):
        chain = parse_chain(request.text, lenient=request.lenient)
        return schemas.JudgeResponse(verdict=judge(chain).corpus_label())

    @app.post("/v1/chains/audit", response_model=schemas.AuditReportOut)
    def chains_audit(request: schemas.AuditRequest):
        policy = request.policy.to_policy() if request.policy else DEFAULT_POLICY
        report = audit(request.text, request.evidence_count, policy)
        return schemas.AuditReportOut(**report.to_dict())

    @app.post("/v1/chains/audit-batch", response_model=schemas.AuditBatchResponse)
    def chains_audit_batch(request: schemas.AuditBatchRequest):
        policy = request.policy.to_policy() if request.policy else DEFAULT_POLICY
        reports = [
            schemas.AuditBatchEntry(
                id=item.id,
                report=schemas.AuditReportOut(
                    **audit(item.text, item.evidence_count, policy).to_dict()
                ),
            )
            for item in request.items
        ]
        return schemas.AuditBatchResponse(reports=reports)

    @app.post("/v1/verdicts/parse", response_model=schemas.JudgeResponse)
    def verdicts_parse(request: schemas.VerdictParseRequest):
        return schemas.JudgeResponse(verdict=parse_verdict(request.text).corpus_label())

    # -- prompts and scoring ----------------------------------------------

    @app.post("/v1/prompts/render", response_model=schemas.PromptResponse)
    def prompts_render(request: schemas.PromptRequest):
        try:
            kind = PromptKind(request.kind)
        except ValueError:
            raise InputError(f"unknown prompt kind {request.kind!r}") from None
        exemplars = [e.to_annotated() for e in request.exemplars or []] or None
        prompt = render(kind, request.record.to_record(), exemplars=exemplars)
        return schemas.PromptResponse(prompt=prompt)

    @app.post("/v1/score")
    def score_endpoint(request: schemas.ScoreRequest):
        report = score(
            [schemas.verdict_from_label(v) for v in request.gold],
            [schemas.verdict_from_label(v) for v in request.pred],
            ids=request.ids,
        )
        return report.to_dict()

    # -- corpus operations -------------------------------------------------

    @app.post("/v1/corpus/ingest", response_model=schemas.IngestResponse)
    def corpus_ingest(request: schemas.IngestRequest):
        records = ingest_text(request.content, CorpusFormat(request.format), hops=request.hops)
        if request.sample is not None:
            records = stratified_sample(records, request.sample, seed=request.seed)
        return schemas.IngestResponse(
            lines=[canonical_line(r) for r in records], total=len(records)
        )

    @app.post("/v1/corpus/stats")
    def corpus_stats(request: schemas.StatsRequest):
        return stats(load_canonical_text(request.content)).to_dict()

    @app.post("/v1/warmup/export", response_model=schemas.WarmupExportResponse)
    def warmup_export(request: schemas.WarmupExportRequest):
        annotated = load_annotated_text(request.content)
        pairs = export_warmup(
            annotated,
            expected_refuted_fraction=request.expected_refuted_fraction,
            mix_tolerance=request.mix_tolerance,
        )
        return schemas.WarmupExportResponse(
            lines=[pair.to_json_line() for pair in pairs], total=len(pairs)
        )

    # -- jobs ---------------------------------------------------------------

    @app.post("/v1/jobs/selfimprove", response_model=schemas.JobStatus)
    def jobs_selfimprove(request: schemas.SelfImproveJobRequest):
        config = PipelineConfig.from_dict(request.config)
        corpus_path = Path(request.corpus_path)
        if not corpus_path.exists():
            raise InputError(f"corpus file not found: {corpus_path}")
        if config.checkpoint_dir and not request.resume:
            journals = list(Path(config.checkpoint_dir).glob("round*.generations.jsonl"))
            if journals:
                raise InputError(
                    f"checkpoint directory {config.checkpoint_dir} already has journals;"
                    " pass resume to continue from them"
                )

        def work():
            corpus = load_canonical(corpus_path)
            annotated = load_annotated(request.annotated_path) if request.annotated_path else []
            result = run(corpus, annotated, config, request.out_dir)
            return {
                "training_files": [str(p) for p in result.training_paths],
                "ledger_files": [str(p) for p in result.ledger_paths],
                "rounds": [
                    {
                        "round": r.round_index,
                        "buckets": {b.value: c for b, c in r.ledger.bucket_counts().items()},
                        "pairs": len(r.pairs),
                    }
                    for r in result.rounds
                ],
            }

        job = jobs.submit("selfimprove", work)
        return schemas.JobStatus(**job.__dict__)

    @app.post("/v1/jobs/evaluate", response_model=schemas.JobStatus)
    def jobs_evaluate(request: schemas.EvaluateJobRequest):
        try:
            mode = PromptKind(request.mode)
        except ValueError:
            raise InputError(f"unknown prompt mode {request.mode!r}") from None
        corpus_path = Path(request.corpus_path)
        if not corpus_path.exists():
            raise InputError(f"corpus file not found: {corpus_path}")
        spec = EndpointSpec.from_dict(request.endpoint)

        def work():
            records = load_canonical(corpus_path)
            exemplars = (
                load_annotated(request.exemplars_path) if request.exemplars_path else None
            )
            client = GenerationClient(
                build_backend(spec),
                max_attempts=request.max_attempts,
                max_in_flight=request.concurrency,
            )
            report = evaluate(
                records,
                mode,
                client,
                exemplars=exemplars,
                temperature=request.temperature,
                max_tokens=request.max_tokens,
                concurrency=request.concurrency,
                lenient=request.lenient,
            )
            out_dir = Path(request.out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "report.json").write_text(
                json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8"
            )
            (out_dir / "report.txt").write_text(format_report(report) + "\n", encoding="utf-8")
            with open(out_dir / "predictions.jsonl", "w", encoding="utf-8") as handle:
                for prediction in report.predictions:
                    handle.write(json.dumps(prediction.to_dict(), ensure_ascii=False) + "\n")
            return {
                "macro_f1": report.macro_f1,
                "unparsed_count": report.unparsed_count,
                "report_json": str(out_dir / "report.json"),
                "report_txt": str(out_dir / "report.txt"),
                "predictions": str(out_dir / "predictions.jsonl"),
            }

        job = jobs.submit("evaluate", work)
        return schemas.JobStatus(**job.__dict__)

    @app.get("/v1/jobs/{job_id}", response_model=schemas.JobStatus)
    def job_status(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise InputError(f"unknown job {job_id!r}")
        return schemas.JobStatus(**job.__dict__)

    return app


app = create_app()
