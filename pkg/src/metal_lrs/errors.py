"""Error taxonomy shared by the store, services, miner and CLI.

Every domain error carries a stable ``code`` so HTTP handlers and the CLI
can surface it without string matching.
"""

from __future__ import annotations


class MetalError(Exception):
    """Base class for all domain errors."""

    code = "ERROR"

    def payload(self) -> dict:
        return {"code": self.code, "message": str(self)}


class ValidationError(MetalError):
    code = "VALIDATION"

    def __init__(self, field: str, message: str, index: int | None = None):
        self.field = field
        self.index = index
        super().__init__(f"{field}: {message}" if field else message)

    def payload(self) -> dict:
        out = {"code": self.code, "message": str(self), "field": self.field}
        if self.index is not None:
            out["index"] = self.index
        return out


class ConflictError(MetalError):
    code = "CONFLICT"

    def __init__(self, statement_id: str, index: int | None = None):
        self.statement_id = statement_id
        self.index = index
        super().__init__(f"statement {statement_id} already stored with different content")

    def payload(self) -> dict:
        out = {"code": self.code, "message": str(self), "statement_id": self.statement_id}
        if self.index is not None:
            out["index"] = self.index
        return out


class BadFilterError(MetalError):
    code = "BAD_FILTER"


class DanglingReferenceError(MetalError):
    code = "DANGLING_REFERENCE"

    def __init__(self, target: str, message: str | None = None):
        self.target = target
        super().__init__(message or f"reference to missing record {target!r}")


class DuplicateError(MetalError):
    code = "DUPLICATE"


class UnknownLearnerError(MetalError):
    code = "UNKNOWN_LEARNER"

    def __init__(self, learner_id: str):
        self.learner_id = learner_id
        super().__init__(f"unknown learner {learner_id!r}")


class UnknownEntityTypeError(MetalError):
    code = "UNKNOWN_ENTITY_TYPE"


class UnknownSkillError(MetalError):
    code = "UNKNOWN_SKILL"


class UnknownResourceError(MetalError):
    code = "UNKNOWN_RESOURCE"

    def __init__(self, resource_ids: list[str]):
        self.resource_ids = resource_ids
        super().__init__(f"events reference unknown resources: {', '.join(sorted(resource_ids))}")


class UnknownRecommendationError(MetalError):
    code = "UNKNOWN_RECOMMENDATION"


class IllegalTransitionError(MetalError):
    code = "ILLEGAL_TRANSITION"

    def __init__(self, current_state: str, decision: str):
        self.current_state = current_state
        self.decision = decision
        super().__init__(f"decision {decision!r} not allowed from state {current_state!r}")


class LimitExceededError(MetalError):
    code = "LIMIT_EXCEEDED"


class MalformedCsvError(MetalError):
    code = "MALFORMED_CSV"


class MalformedRowError(MetalError):
    code = "MALFORMED_ROW"

    def __init__(self, line: int, column: str, message: str):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class NonMonotonicOnsetsError(MetalError):
    code = "NON_MONOTONIC_ONSETS"


class DegenerateGroupsError(MetalError):
    code = "DEGENERATE_GROUPS"


class ZeroVarianceError(MetalError):
    code = "ZERO_VARIANCE"
