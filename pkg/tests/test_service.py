import json
import time

import pytest
from fastapi.testclient import TestClient

from verichain.corpus import write_canonical
from verichain.service.app import create_app

from .helpers import build_pipeline_fixture, simple_chain
from verichain.model import Verdict

S = Verdict.SUPPORTED
R = Verdict.REFUTED


@pytest.fixture()
def api():
    with TestClient(create_app()) as client:
        yield client


def wait_for_job(api, job_id, timeout=30.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        status = api.get(f"/v1/jobs/{job_id}").json()
        if status["status"] in ("succeeded", "failed"):
            return status
        time.sleep(0.02)
    raise AssertionError("job did not finish in time")


class TestHealthAndChains:
    def test_health(self, api):
        body = api.get("/health").json()
        assert body["status"] == "ok"

    def test_parse_round_trip(self, api, chain_fixtures):
        text = chain_fixtures["debel_gallery"]
        parsed = api.post("/v1/chains/parse", json={"text": text}).json()
        assert len(parsed["blocks"]) == 2
        assert parsed["blocks"][0]["status"] == "SUPPORTED"
        assert parsed["blocks"][0]["steps"][0]["kind"] == "Entity Resolution"
        serialized = api.post("/v1/chains/serialize", json={"chain": parsed}).json()
        assert serialized["text"] == text

    def test_parse_error_maps_to_400_input(self, api):
        response = api.post("/v1/chains/parse", json={"text": "no blocks"})
        assert response.status_code == 400
        error = response.json()["error"]
        assert error["category"] == "input"
        assert error["type"] == "MissingBlocks"

    def test_judge(self, api):
        text = simple_chain([S, R])
        body = api.post("/v1/chains/judge", json={"text": text}).json()
        assert body["verdict"] == "REFUTED"

    def test_audit(self, api):
        response = api.post(
            "/v1/chains/audit",
            json={"text": simple_chain([S]).replace("E1", "E9"), "evidence_count": 3},
        ).json()
        assert response["passed"] is False
        assert response["violations"][0]["criterion"] == "grounding"

    def test_audit_policy_flag(self, api):
        bare = "Verification: E1 confirms.\nStatus: Supported."
        strict = api.post("/v1/chains/audit", json={"text": bare, "evidence_count": 1}).json()
        relaxed = api.post(
            "/v1/chains/audit",
            json={
                "text": bare,
                "evidence_count": 1,
                "policy": {"require_decomposition": False},
            },
        ).json()
        assert not strict["passed"] and relaxed["passed"]

    def test_audit_batch(self, api):
        items = [
            {"id": "a", "text": simple_chain([S]), "evidence_count": 3},
            {"id": "b", "text": "garbage", "evidence_count": 3},
        ]
        body = api.post("/v1/chains/audit-batch", json={"items": items}).json()
        assert [entry["report"]["passed"] for entry in body["reports"]] == [True, False]

    def test_verdict_parse(self, api):
        assert api.post("/v1/verdicts/parse", json={"text": "Refuted."}).json()["verdict"] == "REFUTED"
        assert api.post("/v1/verdicts/parse", json={"text": "maybe"}).status_code == 400


class TestPromptsAndScore:
    def test_render_structured(self, api):
        body = api.post(
            "/v1/prompts/render",
            json={
                "kind": "structured",
                "record": {"id": "r", "claim": "the claim", "evidence": ["e1", "e2"]},
            },
        ).json()
        assert body["prompt"].startswith("Based on the evidence")
        assert "(1)[e1](2)[e2]" in body["prompt"]

    def test_render_hint_requires_gold(self, api):
        response = api.post(
            "/v1/prompts/render",
            json={"kind": "hint_supported", "record": {"id": "r", "claim": "c", "evidence": ["e"]}},
        )
        assert response.status_code == 400
        assert response.json()["error"]["type"] == "MissingGoldLabel"

    def test_unknown_kind(self, api):
        response = api.post(
            "/v1/prompts/render",
            json={"kind": "mystery", "record": {"id": "r", "claim": "c", "evidence": ["e"]}},
        )
        assert response.status_code == 400

    def test_score(self, api):
        body = api.post(
            "/v1/score",
            json={"gold": ["SUPPORTED", "REFUTED"], "pred": ["SUPPORTED", "REFUTED"]},
        ).json()
        assert body["macro_f1"] == 1.0

    def test_score_length_mismatch(self, api):
        response = api.post("/v1/score", json={"gold": ["SUPPORTED"], "pred": []})
        assert response.status_code == 400
        assert response.json()["error"]["type"] == "LengthMismatch"


class TestCorpusEndpoints:
    def test_ingest_canonical(self, api):
        content = json.dumps({"id": "a", "claim": "c", "evidence": ["e"], "label": "supported"})
        body = api.post("/v1/corpus/ingest", json={"content": content, "format": "canonical"}).json()
        assert body["total"] == 1
        assert json.loads(body["lines"][0])["label"] == "SUPPORTED"

    def test_ingest_schema_error(self, api):
        response = api.post(
            "/v1/corpus/ingest", json={"content": '{"id": "a"}', "format": "canonical"}
        )
        assert response.status_code == 400
        assert response.json()["error"]["type"] == "SchemaError"

    def test_stats(self, api):
        content = "\n".join(
            json.dumps({"id": f"r{i}", "claim": "a b", "evidence": ["w1 w2 w3"], "label": "SUPPORTED"})
            for i in range(4)
        )
        body = api.post("/v1/corpus/stats", json={"content": content}).json()
        assert body["total"] == 4
        assert body["avg_words_claim"] == 2.0
        assert body["avg_words_evidence"] == 3.0

    def test_warmup_export(self, api):
        line = json.dumps(
            {
                "id": "h1",
                "claim": "claim",
                "evidence": ["e one", "e two", "e three"],
                "label": "REFUTED",
                "chain": simple_chain([R]),
            }
        )
        body = api.post("/v1/warmup/export", json={"content": line}).json()
        assert body["total"] == 1
        pair = json.loads(body["lines"][0])
        assert pair["source"] == "human"


class TestJobs:
    def test_selfimprove_job(self, api, tmp_path):
        fixture = build_pipeline_fixture()
        corpus_path = tmp_path / "corpus.jsonl"
        write_canonical(fixture.records, corpus_path)
        fixtures_path = tmp_path / "responses.json"
        fixtures_path.write_text(json.dumps(fixture.responses))
        job = api.post(
            "/v1/jobs/selfimprove",
            json={
                "corpus_path": str(corpus_path),
                "out_dir": str(tmp_path / "out"),
                "config": {
                    "endpoints": [{"kind": "scripted", "fixtures": str(fixtures_path)}],
                    "max_attempts": 1,
                    "backoff_base": 0,
                },
            },
        ).json()
        status = wait_for_job(api, job["id"])
        assert status["status"] == "succeeded", status["error"]
        buckets = status["result"]["rounds"][0]["buckets"]
        assert buckets == {"d1": 6, "d2": 6, "rejected_wrong": 5, "rejected_format": 3}
        assert (tmp_path / "out" / "training_round1.jsonl").exists()

    def test_selfimprove_missing_corpus_is_input_error(self, api, tmp_path):
        response = api.post(
            "/v1/jobs/selfimprove",
            json={"corpus_path": str(tmp_path / "nope.jsonl"), "out_dir": str(tmp_path)},
        )
        assert response.status_code == 400

    def test_selfimprove_refuses_stale_checkpoints_without_resume(self, api, tmp_path):
        fixture = build_pipeline_fixture()
        corpus_path = tmp_path / "corpus.jsonl"
        write_canonical(fixture.records, corpus_path)
        checkpoint = tmp_path / "cp"
        checkpoint.mkdir()
        (checkpoint / "round1.generations.jsonl").write_text("")
        response = api.post(
            "/v1/jobs/selfimprove",
            json={
                "corpus_path": str(corpus_path),
                "out_dir": str(tmp_path / "out"),
                "config": {"checkpoint_dir": str(checkpoint)},
            },
        )
        assert response.status_code == 400

    def test_evaluate_job_with_scripted_backend(self, api, tmp_path):
        fixture = build_pipeline_fixture()
        records = fixture.records[:6]  # the d1 stories: initial output judges to gold
        corpus_path = tmp_path / "corpus.jsonl"
        write_canonical(records, corpus_path)
        fixtures_path = tmp_path / "responses.json"
        fixtures_path.write_text(json.dumps(fixture.responses))
        job = api.post(
            "/v1/jobs/evaluate",
            json={
                "corpus_path": str(corpus_path),
                "out_dir": str(tmp_path / "eval"),
                "mode": "structured",
                "endpoint": {"kind": "scripted", "fixtures": str(fixtures_path)},
                "max_attempts": 1,
            },
        ).json()
        status = wait_for_job(api, job["id"])
        assert status["status"] == "succeeded", status["error"]
        assert status["result"]["macro_f1"] == 1.0
        report = json.loads((tmp_path / "eval" / "report.json").read_text())
        assert report["total"] == 6
        predictions = (tmp_path / "eval" / "predictions.jsonl").read_text().splitlines()
        assert len(predictions) == 6

    def test_evaluate_job_failure_reports_pipeline_error(self, api, tmp_path):
        fixture = build_pipeline_fixture()
        corpus_path = tmp_path / "corpus.jsonl"
        write_canonical(fixture.records[:2], corpus_path)
        fixtures_path = tmp_path / "responses.json"
        fixtures_path.write_text("{}")  # no scripted responses at all
        job = api.post(
            "/v1/jobs/evaluate",
            json={
                "corpus_path": str(corpus_path),
                "out_dir": str(tmp_path / "eval"),
                "mode": "structured",
                "endpoint": {"kind": "scripted", "fixtures": str(fixtures_path)},
                "max_attempts": 1,
            },
        ).json()
        status = wait_for_job(api, job["id"])
        assert status["status"] == "failed"
        assert status["error"]["category"] == "pipeline"

    def test_unknown_job_id(self, api):
        assert api.get("/v1/jobs/doesnotexist").status_code == 400
