"""Statement wire format: validation, canonicalization and filter predicates.

A statement is kept as the canonical JSON object the client sent: ids
lowercased, mbox lowercased, score normalized to the scaled form. Unknown
fields are preserved verbatim so publisher-specific extensions survive a
round trip. Server-assigned data (`stored`, defaulted `timestamp`) is added
at read time, never merged into the stored content.
"""

from __future__ import annotations

import copy
import re
import uuid
from datetime import datetime, timedelta

from .errors import BadFilterError, ValidationError

VOIDING_VERB = "http://adlnet.gov/expapi/verbs/voided"

# Client timestamps may run ahead of the server clock by at most this much.
CLOCK_SKEW = timedelta(seconds=60)

_ABSOLUTE_IRI = re.compile(r"^[A-Za-z][A-Za-z0-9+.\-]*:\S+$")


def is_absolute_iri(value: object) -> bool:
    return isinstance(value, str) and bool(_ABSOLUTE_IRI.match(value))


def normalize_uuid(value: object, field: str) -> str:
    if not isinstance(value, str):
        raise ValidationError(field, "statement id must be a UUID string")
    try:
        return str(uuid.UUID(value))
    except ValueError as exc:
        raise ValidationError(field, f"not a UUID: {value!r}") from exc


def parse_instant(value: object, field: str) -> datetime:
    """Parse an ISO 8601 instant; the offset must be explicit."""
    if not isinstance(value, str):
        raise ValidationError(field, "instant must be an ISO 8601 string")
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        parsed = datetime.fromisoformat(text)
    except ValueError as exc:
        raise ValidationError(field, f"not an ISO 8601 instant: {value!r}") from exc
    if parsed.tzinfo is None:
        raise ValidationError(field, f"instant {value!r} lacks an explicit offset")
    return parsed


def _validate_actor(actor: object, path: str) -> dict:
    if not isinstance(actor, dict):
        raise ValidationError(path, "actor must be an object")
    out = copy.deepcopy(actor)
    mbox = out.get("mbox")
    account = out.get("account")
    if mbox is None and account is None:
        raise ValidationError(path, "actor needs a mbox or an account")
    if mbox is not None:
        if not isinstance(mbox, str) or not mbox.lower().startswith("mailto:"):
            raise ValidationError(f"{path}.mbox", "mbox must be a mailto: IRI")
        out["mbox"] = mbox.lower()
    if account is not None:
        if not isinstance(account, dict):
            raise ValidationError(f"{path}.account", "account must be an object")
        if not account.get("homePage") or not isinstance(account.get("homePage"), str):
            raise ValidationError(f"{path}.account.homePage", "account homePage required")
        if not account.get("name") or not isinstance(account.get("name"), str):
            raise ValidationError(f"{path}.account.name", "account name required")
    return out


def _validate_verb(verb: object, path: str) -> dict:
    if not isinstance(verb, dict):
        raise ValidationError(path, "verb must be an object")
    out = copy.deepcopy(verb)
    if not is_absolute_iri(out.get("id")):
        raise ValidationError(f"{path}.id", "verb id must be a non-empty absolute identifier")
    display = out.get("display")
    if display is not None and not isinstance(display, dict):
        raise ValidationError(f"{path}.display", "display must be a language map")
    return out


def _validate_object(obj: object, path: str) -> dict:
    if not isinstance(obj, dict):
        raise ValidationError(path, "object must be an object")
    out = copy.deepcopy(obj)
    object_type = out.get("objectType", "Activity")
    if object_type == "StatementRef":
        out["id"] = normalize_uuid(out.get("id"), f"{path}.id")
    elif object_type == "Activity":
        if not is_absolute_iri(out.get("id")):
            raise ValidationError(f"{path}.id", "activity id must be a non-empty absolute identifier")
    else:
        raise ValidationError(f"{path}.objectType", f"unsupported objectType {object_type!r}")
    return out


def _validate_result(result: object, path: str) -> dict:
    if not isinstance(result, dict):
        raise ValidationError(path, "result must be an object")
    out = copy.deepcopy(result)
    score = out.get("score")
    if score is not None:
        if isinstance(score, (int, float)) and not isinstance(score, bool):
            score = {"scaled": float(score)}
            out["score"] = score
        if not isinstance(score, dict):
            raise ValidationError(f"{path}.score", "score must be a number or an object")
        scaled = score.get("scaled")
        if scaled is not None:
            if not isinstance(scaled, (int, float)) or isinstance(scaled, bool):
                raise ValidationError(f"{path}.score.scaled", "scaled score must be a number")
            if not 0.0 <= float(scaled) <= 1.0:
                raise ValidationError(f"{path}.score.scaled", f"scaled score {scaled} outside [0, 1]")
    if "success" in out and not isinstance(out["success"], bool):
        raise ValidationError(f"{path}.success", "success must be a boolean")
    if "duration" in out and not isinstance(out["duration"], str):
        raise ValidationError(f"{path}.duration", "duration must be an ISO 8601 duration string")
    return out


def canonicalize_statement(raw: object, provided_id: str | None = None) -> dict:
    """Validate a statement candidate and return its canonical content.

    `provided_id` is the id given out of band (PUT query parameter); it must
    agree with a body id when both are present. The returned dict carries no
    server-assigned fields.
    """
    if not isinstance(raw, dict):
        raise ValidationError("", "statement must be a JSON object")
    content = copy.deepcopy(raw)

    body_id = content.get("id")
    if body_id is not None:
        body_id = normalize_uuid(body_id, "id")
    if provided_id is not None:
        provided_id = normalize_uuid(provided_id, "statementId")
        if body_id is not None and body_id != provided_id:
            raise ValidationError("id", f"body id {body_id} does not match statementId {provided_id}")
        body_id = provided_id
    if body_id is not None:
        content["id"] = body_id

    if "actor" not in content:
        raise ValidationError("actor", "missing required field")
    if "verb" not in content:
        raise ValidationError("verb", "missing required field")
    if "object" not in content:
        raise ValidationError("object", "missing required field")

    content["actor"] = _validate_actor(content["actor"], "actor")
    content["verb"] = _validate_verb(content["verb"], "verb")
    content["object"] = _validate_object(content["object"], "object")
    if content.get("timestamp") is not None:
        parse_instant(content["timestamp"], "timestamp")
    if content.get("result") is not None:
        content["result"] = _validate_result(content["result"], "result")
    if "stored" in content:
        # `stored` is owned by the store; clients cannot set it.
        del content["stored"]

    if verb_id(content) == VOIDING_VERB and content["object"].get("objectType") != "StatementRef":
        raise ValidationError("object.objectType", "a voiding statement must target a StatementRef")
    return content


def verb_id(content: dict) -> str:
    return content["verb"]["id"]


def object_type(content: dict) -> str:
    return content["object"].get("objectType", "Activity")


def activity_id(content: dict) -> str | None:
    return content["object"].get("id") if object_type(content) == "Activity" else None


def voided_target(content: dict) -> str | None:
    if verb_id(content) == VOIDING_VERB and object_type(content) == "StatementRef":
        return content["object"]["id"]
    return None


def actor_identifiers(actor: dict) -> set[tuple]:
    """Inverse functional identifiers of an agent, for equality matching."""
    out: set[tuple] = set()
    mbox = actor.get("mbox")
    if isinstance(mbox, str):
        out.add(("mbox", mbox.lower()))
    account = actor.get("account")
    if isinstance(account, dict) and account.get("homePage") and account.get("name"):
        out.add(("account", account["homePage"], account["name"]))
    return out


def parse_agent_filter(value: str) -> set[tuple]:
    import json

    try:
        agent = json.loads(value)
    except ValueError as exc:
        raise BadFilterError(f"agent filter is not valid JSON: {value!r}") from exc
    if not isinstance(agent, dict):
        raise BadFilterError("agent filter must be a JSON object")
    idents = actor_identifiers(agent)
    if not idents:
        raise BadFilterError("agent filter needs a mbox or an account")
    return idents
