"""Cross-component contract: the inference client against a live adapter.

Runs only when VERICHAIN_ADAPTER_URL points at a served adapter (see
adapter/README.md); the adapter's own suite covers the same protocol
from the server side.
"""

import os

import pytest

from verichain.inference import (
    EndpointRejected,
    FinishReason,
    GenerationClient,
    GenerationRequest,
    HttpBackend,
)

ADAPTER_URL = os.environ.get("VERICHAIN_ADAPTER_URL")

pytestmark = pytest.mark.skipif(
    not ADAPTER_URL, reason="set VERICHAIN_ADAPTER_URL to a served adapter to run"
)


def client():
    return GenerationClient(HttpBackend(base_url=ADAPTER_URL), max_attempts=2, backoff_base=0)


def test_generation_round_trip():
    result = client().generate(
        GenerationRequest(prompt="Based on the evidence, decide.", temperature=0.01, max_tokens=32)
    )
    assert isinstance(result.text, str)
    assert result.finish_reason in (FinishReason.STOP, FinishReason.LENGTH)
    assert result.usage.completion_tokens >= 0


def test_same_prompt_same_output():
    request = GenerationRequest(prompt="Deterministic prompt.", temperature=0.01, max_tokens=16)
    first = client().generate(request)
    second = client().generate(request)
    assert first.text == second.text


def test_max_tokens_cap_reported_as_length():
    result = client().generate(
        GenerationRequest(prompt="Another prompt entirely.", temperature=0.01, max_tokens=4)
    )
    assert result.finish_reason is FinishReason.LENGTH or len(result.text) <= 4


def test_malformed_request_is_rejected_not_retried():
    import httpx

    response = httpx.post(f"{ADAPTER_URL}/chat/completions", json={"messages": []})
    assert response.status_code == 400
