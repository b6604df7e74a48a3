"""Exception hierarchy shared across the package.

Errors are split into two categories so callers (CLI, service) can map
them to exit codes / HTTP statuses without enumerating every subclass:

- ``InputError``: the caller supplied bad data (malformed files, unknown
  labels, invalid chains, bad arguments).
- ``PipelineError``: a run-level failure (endpoint unreachable, corrupt
  checkpoint, missing round configuration).
"""

from __future__ import annotations


class VerichainError(Exception):
    """Base class for all package errors."""


class InputError(VerichainError):
    """The caller supplied invalid input."""


class PipelineError(VerichainError):
    """A pipeline-level failure independent of input validity."""


class UnknownVerdict(InputError):
    """Text does not name one of the two verdict values."""


class UnknownLabel(InputError):
    """A corpus record carries a label outside the binary task."""


class SchemaError(InputError):
    """A corpus file does not match its declared format."""

    def __init__(self, line: int | None, detail: str):
        self.line = line
        self.detail = detail
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{detail}")


class EmptyCorpus(InputError):
    """An operation that needs records received none."""


class LengthMismatch(InputError):
    """Gold and predicted verdict lists differ in length."""


class MissingExemplars(InputError):
    """A few-shot prompt was requested without exemplars."""


class MissingGoldLabel(InputError):
    """An operation that needs gold labels got a record without one."""


class InvalidAnnotatedChain(InputError):
    """A human-annotated chain failed the structure audit."""

    def __init__(self, record_id: str, report):
        self.record_id = record_id
        self.report = report
        detail = "; ".join(v.detail for v in report.violations) or "audit failed"
        super().__init__(f"annotated chain {record_id!r} is invalid: {detail}")


class TransportError(PipelineError):
    """Generation endpoint unreachable or transiently failing."""


class EndpointRejected(PipelineError):
    """Generation endpoint returned a well-formed application error."""

    def __init__(self, status_code: int, detail: str):
        self.status_code = status_code
        self.detail = detail
        super().__init__(f"endpoint rejected request ({status_code}): {detail}")


class ChecksumMismatch(PipelineError):
    """A checkpoint journal line failed its integrity check."""


class MissingEndpointForRound(PipelineError):
    """A multi-round run reached a round with no configured endpoint."""

    def __init__(self, round_index: int):
        self.round_index = round_index
        super().__init__(f"no endpoint configured for round {round_index}")
