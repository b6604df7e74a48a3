"""Command-line entry point; every subcommand is a thin service client.

Without ``--server`` the service app is mounted in-process, so the CLI
works standalone; with it, requests go to a running ``verichain serve``
instance (file paths in ``selfimprove`` / ``evaluate`` then refer to the
server's filesystem).

Exit codes: 0 success, 1 pipeline-level failure, 2 input or schema error.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from .client import ServiceClient, ServiceError


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ServiceError as exc:
            _fail(str(exc), exc.exit_code)
        except BrokenPipeError:
            # Downstream consumer (head, etc.) closed the pipe; not an error.
            sys.stderr.close()
            sys.exit(0)
        except OSError as exc:
            _fail(str(exc), 2)
        except json.JSONDecodeError as exc:
            _fail(f"invalid JSON: {exc}", 2)

    return wrapper


@click.group()
@click.option("--server", envvar="VERICHAIN_SERVER", default=None, help="Service URL; default runs in-process.")
@click.pass_context
def main(ctx, server):
    """Structured reasoning-chain toolkit for claim verification."""
    ctx.obj = {"server": server}


def client_from(ctx) -> ServiceClient:
    return ServiceClient(server=ctx.obj.get("server"))


@main.command()
@click.option("--format", "corpus_format", required=True, type=click.Choice(["hover", "feverous-s", "canonical"]))
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--hops", type=int, default=None, help="Keep only HOVER records with this hop count.")
@click.option("--sample", type=int, default=None, help="Label-stratified sample size.")
@click.option("--seed", type=int, default=0, show_default=True, help="Sampling seed.")
@click.pass_context
@handle_errors
def ingest(ctx, corpus_format, in_path, out_path, hops, sample, seed):
    """Normalize a dataset release into the canonical corpus format."""
    content = Path(in_path).read_text(encoding="utf-8")
    with client_from(ctx) as client:
        response = client.post(
            "/v1/corpus/ingest",
            {"content": content, "format": corpus_format, "hops": hops, "sample": sample, "seed": seed},
        )
    Path(out_path).write_text(
        "".join(line + "\n" for line in response["lines"]), encoding="utf-8"
    )
    click.echo(f"wrote {response['total']} records to {out_path}")


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True, help="Emit raw JSON instead of a table.")
@click.pass_context
@handle_errors
def stats(ctx, in_path, as_json):
    """Corpus statistics: totals, class counts, average lengths."""
    content = Path(in_path).read_text(encoding="utf-8")
    with client_from(ctx) as client:
        data = client.post("/v1/corpus/stats", {"content": content})
    if as_json:
        click.echo(json.dumps(data, indent=2))
        return
    rows = [
        ("total", data["total"]),
        ("supported", data["supported"]),
        ("refuted", data["refuted"]),
        ("avg words in claim", f"{data['avg_words_claim']:.1f}"),
        ("avg evidence pieces", f"{data['avg_evidence_pieces']:.1f}"),
        ("avg words in evidence", f"{data['avg_words_evidence']:.1f}"),
    ]
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        click.echo(f"{name:<{width}}  {value}")


@main.command("warmup-export")
@click.option("--annotated", "annotated_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--expected-refuted-fraction", type=float, default=None)
@click.option("--mix-tolerance", type=float, default=0.15, show_default=True)
@click.pass_context
@handle_errors
def warmup_export(ctx, annotated_path, out_path, expected_refuted_fraction, mix_tolerance):
    """Validate annotated chains and emit the warm-up training file."""
    content = Path(annotated_path).read_text(encoding="utf-8")
    with client_from(ctx) as client:
        response = client.post(
            "/v1/warmup/export",
            {
                "content": content,
                "expected_refuted_fraction": expected_refuted_fraction,
                "mix_tolerance": mix_tolerance,
            },
        )
    Path(out_path).write_text(
        "".join(line + "\n" for line in response["lines"]), encoding="utf-8"
    )
    click.echo(f"wrote {response['total']} training pairs to {out_path}")


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(dir_okay=False))
@click.option("--annotated", "annotated_path", default=None, type=click.Path(dir_okay=False))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--resume", is_flag=True, help="Continue from existing checkpoints.")
@click.option("--dry-run", is_flag=True, help="Require scripted endpoints (no live model).")
@click.option("--rounds", type=int, default=None)
@click.option("--hints/--no-hints", "use_hints", default=None)
@click.option("--format-check/--no-format-check", "use_format_check", default=None)
@click.option("--concurrency", type=int, default=None)
@click.option("--checkpoint-dir", default=None)
@click.pass_context
@handle_errors
def selfimprove(ctx, corpus_path, annotated_path, config_path, out_dir, resume, dry_run,
                rounds, use_hints, use_format_check, concurrency, checkpoint_dir):
    """Run chain generation, judging, hint refinement, and selection."""
    config = json.loads(Path(config_path).read_text(encoding="utf-8")) if config_path else {}
    overrides = {
        "rounds": rounds,
        "use_hints": use_hints,
        "use_format_check": use_format_check,
        "concurrency": concurrency,
        "checkpoint_dir": checkpoint_dir,
    }
    config.update({k: v for k, v in overrides.items() if v is not None})
    if dry_run:
        endpoints = config.get("endpoints") or []
        if not endpoints or any(e.get("kind") != "scripted" for e in endpoints):
            _fail("--dry-run needs scripted endpoints in the config", 2)
    with client_from(ctx) as client:
        job = client.post(
            "/v1/jobs/selfimprove",
            {
                "corpus_path": corpus_path,
                "annotated_path": annotated_path,
                "out_dir": out_dir,
                "config": config,
                "resume": resume,
            },
        )
        status = client.wait_for_job(job["id"])
    result = status["result"]
    for round_info in result["rounds"]:
        click.echo(f"round {round_info['round']}: buckets {round_info['buckets']}")
    for path in result["training_files"] + result["ledger_files"]:
        click.echo(path)


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(dir_okay=False))
@click.option("--mode", required=True,
              type=click.Choice(["structured", "hint_supported", "hint_refuted", "zero_shot",
                                 "zero_shot_cot", "few_shot", "few_shot_structured"]))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--endpoint", "endpoint_url", default=None, help="Chat-completion base URL.")
@click.option("--model", default="", help="Model name passed to the endpoint.")
@click.option("--fixtures", default=None, type=click.Path(dir_okay=False),
              help="Scripted-backend fixture file (instead of a live endpoint).")
@click.option("--exemplars", "exemplars_path", default=None, type=click.Path(dir_okay=False),
              help="Annotated file providing few-shot exemplars.")
@click.option("--temperature", type=float, default=0.01, show_default=True)
@click.option("--max-tokens", type=int, default=1024, show_default=True)
@click.option("--concurrency", type=int, default=4, show_default=True)
@click.option("--lenient", is_flag=True, help="Parse model output with the lenient grammar.")
@click.pass_context
@handle_errors
def evaluate(ctx, corpus_path, mode, out_dir, endpoint_url, model, fixtures, exemplars_path,
             temperature, max_tokens, concurrency, lenient):
    """Score an endpoint on a labeled corpus (macro-F1)."""
    if fixtures:
        endpoint = {"kind": "scripted", "fixtures": fixtures}
    elif endpoint_url:
        endpoint = {"kind": "http", "base_url": endpoint_url, "model": model}
    else:
        endpoint = {"kind": "http", "model": model}  # base URL from environment
    with client_from(ctx) as client:
        job = client.post(
            "/v1/jobs/evaluate",
            {
                "corpus_path": corpus_path,
                "out_dir": out_dir,
                "mode": mode,
                "endpoint": endpoint,
                "exemplars_path": exemplars_path,
                "temperature": temperature,
                "max_tokens": max_tokens,
                "concurrency": concurrency,
                "lenient": lenient,
            },
        )
        status = client.wait_for_job(job["id"])
    result = status["result"]
    click.echo(Path(result["report_txt"]).read_text(encoding="utf-8"), nl=False)
    click.echo(f"macro-f1: {result['macro_f1']:.4f}")
    click.echo(f"reports in {out_dir}")


@main.command()
@click.option("--chains", "chains_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="JSONL of {id, chain} objects.")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False),
              help="Roster output; stdout when omitted.")
@click.option("--lenient", is_flag=True, help="Audit with relaxed keyword matching.")
@click.pass_context
@handle_errors
def audit(ctx, chains_path, corpus_path, out_path, lenient):
    """Audit chains against their records' evidence sets."""
    with client_from(ctx) as client:
        corpus = client.post(
            "/v1/corpus/ingest",
            {"content": Path(corpus_path).read_text(encoding="utf-8"), "format": "canonical"},
        )
        evidence_counts = {
            json.loads(line)["id"]: len(json.loads(line)["evidence"])
            for line in corpus["lines"]
        }
        items = []
        for line_no, line in enumerate(Path(chains_path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            data = json.loads(line)
            if "id" not in data or "chain" not in data:
                _fail(f"chains file line {line_no}: need 'id' and 'chain'", 2)
            if data["id"] not in evidence_counts:
                _fail(f"chains file line {line_no}: id {data['id']!r} not in corpus", 2)
            items.append(
                {"id": data["id"], "text": data["chain"], "evidence_count": evidence_counts[data["id"]]}
            )
        payload: dict = {"items": items}
        if lenient:
            payload["policy"] = {"strict_keywords": False}
        response = client.post("/v1/chains/audit-batch", payload)
    lines = [
        json.dumps({"id": entry["id"], **entry["report"]}, ensure_ascii=False)
        for entry in response["reports"]
    ]
    output = "".join(line + "\n" for line in lines)
    if out_path:
        Path(out_path).write_text(output, encoding="utf-8")
        passed = sum(1 for entry in response["reports"] if entry["report"]["passed"])
        click.echo(f"audited {len(lines)} chains ({passed} passed) -> {out_path}")
    else:
        click.echo(output, nl=False)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8321, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("verichain.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
