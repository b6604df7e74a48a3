"""Thin HTTP client over the service API.

The CLI always goes through this layer. With no server URL the app is
mounted in-process over an ASGI transport, so batch subcommands work
standalone while exercising the exact same request/response path a
remote deployment would.
"""

from __future__ import annotations

import time
from typing import Any

import httpx


class ServiceError(Exception):
    """An error response from the service, carrying its category."""

    def __init__(self, category: str, error_type: str, message: str, status_code: int):
        self.category = category
        self.error_type = error_type
        self.status_code = status_code
        super().__init__(message)

    @property
    def exit_code(self) -> int:
        return 2 if self.category == "input" else 1


class ServiceClient:
    def __init__(self, server: str | None = None, timeout: float = 600.0):
        if server:
            self._client = httpx.Client(base_url=server.rstrip("/"), timeout=timeout)
        else:
            import warnings

            with warnings.catch_warnings():
                # The ASGI test transport import warns about its httpx pin;
                # that is noise for CLI users running in-process.
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient

            from .service.app import create_app

            self._client = TestClient(create_app())
        self.server = server

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "ServiceClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def request(self, method: str, path: str, payload: dict | None = None) -> Any:
        try:
            response = self._client.request(method, path, json=payload)
        except httpx.HTTPError as exc:
            raise ServiceError("pipeline", "Transport", f"cannot reach service: {exc}", 0) from exc
        if response.status_code >= 400:
            raise self._to_error(response)
        return response.json()

    def post(self, path: str, payload: dict) -> Any:
        return self.request("POST", path, payload)

    def get(self, path: str) -> Any:
        return self.request("GET", path)

    @staticmethod
    def _to_error(response: httpx.Response) -> ServiceError:
        try:
            error = response.json().get("error", {})
        except ValueError:
            error = {}
        if not error:
            # 422s come from request validation, which is caller input.
            category = "input" if response.status_code in (404, 422) else "pipeline"
            return ServiceError(
                category, "HTTPError", response.text[:300], response.status_code
            )
        return ServiceError(
            error.get("category", "pipeline"),
            error.get("type", "Unknown"),
            error.get("message", response.text[:300]),
            response.status_code,
        )

    def wait_for_job(self, job_id: str, poll_interval: float = 0.2) -> dict:
        """Poll a job until it finishes; raises ServiceError on failure."""
        while True:
            status = self.get(f"/v1/jobs/{job_id}")
            if status["status"] == "succeeded":
                return status
            if status["status"] == "failed":
                error = status.get("error") or {}
                raise ServiceError(
                    error.get("category", "pipeline"),
                    error.get("type", "JobFailed"),
                    error.get("message", "job failed"),
                    500,
                )
            time.sleep(poll_interval)
