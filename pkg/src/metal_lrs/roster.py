"""Roster CSV exchange: bundle import, entity listing, pseudonymized export.

CSV dialect: UTF-8, comma-separated, double-quote escaping, mandatory header
row. Column sets follow the store's record types (see docs in README);
multi-valued cells use `|` separators. Imports are atomic: a bundle with any
error is rejected, the report enumerates every error, and the store stays
byte-identical.
"""

from __future__ import annotations

import base64
import csv
import hashlib
import hmac
import io
import json
import uuid
import zipfile
from dataclasses import dataclass, field
from datetime import date, datetime, timezone

from . import statements as wire
from .errors import BadFilterError, MetalError, UnknownEntityTypeError, ValidationError
from .models import (
    AnnualResult,
    ClassSection,
    CurriculumRecord,
    Enrollment,
    LearnerRecord,
    ResourceRecord,
    SkillResult,
    UserRecord,
)
from .store import Store, canonical_json

BUNDLE_FILES = ("users", "demographics", "classes", "enrollments", "results", "resources", "curriculum")

# optional member: pseudonymized activity events, so an export bundle stays
# minable without access to the original statement log
EVENTS_FILE = "events"

_COLUMNS = {
    "users": ["id", "role", "name", "email"],
    "demographics": ["user_id", "birth_date", "sex", "nationality", "socio_professional_category", "guardians"],
    "classes": ["id", "school_id", "subject", "year"],
    "enrollments": ["user_id", "class_id", "role"],
    "results": ["user_id", "skill_id", "score", "date"],
    "resources": ["id", "title", "attributes"],
    "curriculum": ["user_id", "school_year", "grade_subjects", "annual_results"],
    EVENTS_FILE: ["user_id", "instant", "resource_id", "verb"],
}

ENTITY_TYPES = BUNDLE_FILES + ("school_life",)

# exact-match filterable fields per entity
_FILTERABLE = {
    "users": {"role"},
    "demographics": {"sex"},
    "classes": {"school_id", "subject", "year"},
    "enrollments": {"user_id", "class_id", "role"},
    "results": {"user_id", "skill_id"},
    "resources": {"title"},
    "curriculum": {"user_id", "school_year"},
    "school_life": {"learner_id", "class_id"},
}


@dataclass
class RowError:
    row: int
    column: str
    code: str
    message: str

    def to_dict(self) -> dict:
        return {"row": self.row, "column": self.column, "code": self.code, "message": self.message}


@dataclass
class FileReport:
    rows_read: int = 0
    rows_accepted: int = 0
    errors: list[RowError] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_accepted": self.rows_accepted,
            "errors": [e.to_dict() for e in self.errors],
        }


@dataclass
class ImportReport:
    files: dict[str, FileReport] = field(default_factory=dict)
    status: str = "rejected"

    @property
    def error_count(self) -> int:
        return sum(len(f.errors) for f in self.files.values())

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "files": {name: report.to_dict() for name, report in sorted(self.files.items())},
        }


def _parse_date_cell(value: str, allow_year_only: bool = False) -> tuple[date, bool]:
    value = value.strip()
    if allow_year_only and value.isdigit() and len(value) == 4:
        return date(int(value), 1, 1), True
    return date.fromisoformat(value), False


def _split_multi(cell: str) -> list[str]:
    return [part for part in (p.strip() for p in cell.split("|")) if part]


def _row_to_record(file_name: str, row: dict[str, str]):
    if file_name == "users":
        return UserRecord(
            id=row["id"].strip(),
            role=(row.get("role") or "learner").strip(),
            name=(row.get("name") or "").strip() or None,
            email=(row.get("email") or "").strip() or None,
        )
    if file_name == "demographics":
        born, year_only = _parse_date_cell(row["birth_date"], allow_year_only=True)
        return LearnerRecord(
            id=row["user_id"].strip(),
            birth_date=born,
            sex=row["sex"].strip(),
            nationality=(row.get("nationality") or "").strip() or None,
            socio_professional_category=(row.get("socio_professional_category") or "").strip() or None,
            guardians=tuple(_split_multi(row.get("guardians") or "")),
            year_only=year_only,
        )
    if file_name == "classes":
        return ClassSection(
            id=row["id"].strip(),
            school_id=(row.get("school_id") or "").strip(),
            subject=(row.get("subject") or "").strip(),
            year=(row.get("year") or "").strip(),
        )
    if file_name == "enrollments":
        return Enrollment(
            user_id=row["user_id"].strip(),
            class_id=row["class_id"].strip(),
            role=row["role"].strip(),
        )
    if file_name == "results":
        return SkillResult(
            user_id=row["user_id"].strip(),
            skill_id=row["skill_id"].strip(),
            score=float(row["score"]),
            date=_parse_date_cell(row["date"])[0],
        )
    if file_name == "resources":
        attributes = {}
        for pair in _split_multi(row.get("attributes") or ""):
            key, sep, value = pair.partition("=")
            if not sep:
                raise ValueError(f"attribute {pair!r} is not key=value")
            attributes[key.strip()] = value.strip()
        return ResourceRecord(id=row["id"].strip(), title=(row.get("title") or "").strip(), attributes=attributes)
    if file_name == "curriculum":
        annual = []
        for triple in _split_multi(row.get("annual_results") or ""):
            parts = triple.split(":")
            if len(parts) != 3:
                raise ValueError(f"annual result {triple!r} is not subject:score:period")
            annual.append(AnnualResult(parts[0].strip(), float(parts[1]), parts[2].strip()))
        return CurriculumRecord(
            learner_id=row["user_id"].strip(),
            school_year=row["school_year"].strip(),
            grade_subjects=tuple(_split_multi(row.get("grade_subjects") or "")),
            annual_results=tuple(annual),
        )
    raise ValueError(f"unknown bundle file {file_name!r}")


def _column_of(exc: Exception, file_name: str) -> str:
    if isinstance(exc, ValidationError) and exc.field:
        # model fields map onto CSV columns, modulo the id/user_id rename
        if exc.field == "id" and file_name in ("demographics", "curriculum"):
            return "user_id"
        return exc.field
    return ""


def _event_statement(user_id: str, instant: str, resource_id: str, verb: str, occurrence: int) -> dict:
    """Synthesize the statement behind an imported activity-event row; the id
    is a name-based UUID so re-importing the same bundle stays idempotent."""
    namespace = uuid.uuid5(uuid.NAMESPACE_URL, "urn:metal:event-import")
    sid = uuid.uuid5(namespace, f"{user_id}|{instant}|{resource_id}|{verb}|{occurrence}")
    return {
        "id": str(sid),
        "actor": {"account": {"homePage": "urn:metal:import", "name": user_id}},
        "verb": {"id": verb},
        "object": {"objectType": "Activity", "id": f"res:{resource_id}"},
        "timestamp": instant,
    }


def import_csv_bundle(store: Store, files: dict[str, str | bytes]) -> ImportReport:
    """Parse, validate and atomically upsert a named set of CSV files.

    An optional `events` file (pseudonymized activity events from an export)
    is replayed into the statement log; the bundle commits as one unit."""
    report = ImportReport()
    records = []
    origins: list[tuple[str, int]] = []  # (file, csv line) per staged record
    event_rows: list[tuple[int, dict[str, str]]] = []

    for raw_name in sorted(files):
        name = raw_name[:-4] if raw_name.endswith(".csv") else raw_name
        file_report = report.files.setdefault(name, FileReport())
        if name not in BUNDLE_FILES and name != EVENTS_FILE:
            file_report.errors.append(
                RowError(0, "", "MALFORMED_CSV", f"unknown bundle file {raw_name!r}")
            )
            continue
        payload = files[raw_name]
        try:
            text = payload.decode("utf-8") if isinstance(payload, bytes) else payload
        except UnicodeDecodeError as exc:
            file_report.errors.append(RowError(0, "", "MALFORMED_CSV", f"not UTF-8: {exc}"))
            continue
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None:
            file_report.errors.append(RowError(0, "", "MALFORMED_CSV", "missing header row"))
            continue
        unknown = [c for c in reader.fieldnames if c not in _COLUMNS[name]]
        required = _COLUMNS[name][0]
        if unknown or required not in reader.fieldnames:
            file_report.errors.append(
                RowError(
                    1,
                    unknown[0] if unknown else required,
                    "MALFORMED_CSV",
                    f"header must use columns {_COLUMNS[name]}",
                )
            )
            continue
        if name == EVENTS_FILE:
            for row in reader:
                file_report.rows_read += 1
                event_rows.append((reader.line_num, row))
            continue
        seen_keys: set = set()
        for row in reader:
            line = reader.line_num
            file_report.rows_read += 1
            try:
                record = _row_to_record(name, row)
            except ValidationError as exc:
                file_report.errors.append(
                    RowError(line, _column_of(exc, name), "VALIDATION", str(exc))
                )
                continue
            except (KeyError, ValueError, TypeError, AttributeError) as exc:
                column = exc.args[0] if isinstance(exc, KeyError) else ""
                file_report.errors.append(RowError(line, str(column), "MALFORMED_ROW", str(exc)))
                continue
            key = Store._record_key(record)
            if key in seen_keys:
                file_report.errors.append(
                    RowError(line, _COLUMNS[name][0], "DUPLICATE", f"duplicate key {key!r} in {name}")
                )
                continue
            seen_keys.add(key)
            records.append(record)
            origins.append((name, line))

    with store.lock:
        referential = store.validate_bundle(records)
        rejected_indexes = set()
        for index, exc in referential:
            name, line = origins[index]
            code = exc.code if isinstance(exc, MetalError) else "VALIDATION"
            column = _column_of(exc, name)
            if not column and hasattr(exc, "target"):
                # attribute the error to the column holding the missing id
                record = records[index]
                for attr_name, col in (
                    ("user_id", "user_id"),
                    ("learner_id", "user_id"),
                    ("class_id", "class_id"),
                    ("id", "user_id" if name == "demographics" else "id"),
                ):
                    if getattr(record, attr_name, None) == exc.target:
                        column = col
                        break
            report.files[name].errors.append(RowError(line, column, code, str(exc)))
            rejected_indexes.add(index)
        for index, (name, _) in enumerate(origins):
            if index not in rejected_indexes:
                report.files[name].rows_accepted += 1

        bodies = []
        if event_rows:
            staged_learners = {
                r.id for r in records if isinstance(r, UserRecord) and r.role == "learner"
            } | {uid for uid, u in store.users.items() if u.role == "learner"}
            staged_resources = {r.id for r in records if isinstance(r, ResourceRecord)} | set(
                store.resources
            )
            events_report = report.files[EVENTS_FILE]
            occurrences: dict[tuple, int] = {}
            now = datetime.now(timezone.utc)
            for line, row in event_rows:
                missing = [c for c in _COLUMNS[EVENTS_FILE] if not row.get(c)]
                if missing:
                    events_report.errors.append(RowError(line, missing[0], "MALFORMED_ROW", "missing value"))
                    continue
                if row["user_id"] not in staged_learners:
                    events_report.errors.append(
                        RowError(line, "user_id", "DANGLING_REFERENCE", f"no learner {row['user_id']!r}")
                    )
                    continue
                if row["resource_id"] not in staged_resources:
                    events_report.errors.append(
                        RowError(line, "resource_id", "DANGLING_REFERENCE", f"no resource {row['resource_id']!r}")
                    )
                    continue
                key = (row["user_id"], row["instant"], row["resource_id"], row["verb"])
                occurrences[key] = occurrences.get(key, 0) + 1
                body = _event_statement(*key, occurrences[key])
                try:
                    canonical = wire.canonicalize_statement(body)
                    instant = wire.parse_instant(canonical["timestamp"], "instant")
                    if instant > now + wire.CLOCK_SKEW:
                        raise ValidationError("instant", f"instant {row['instant']} is in the future")
                except ValidationError as exc:
                    column = "verb" if "verb" in exc.field else "instant"
                    events_report.errors.append(RowError(line, column, "VALIDATION", str(exc)))
                    continue
                bodies.append(body)
                events_report.rows_accepted += 1

        if report.error_count == 0:
            store.apply_bundle(records)
            if bodies:
                store.insert_statements(bodies)
            report.status = "committed"
        else:
            report.status = "rejected"
    return report


# ------------------------------------------------------------------ archives


def read_bundle_archive(blob: bytes) -> dict[str, bytes]:
    try:
        archive = zipfile.ZipFile(io.BytesIO(blob))
        return {info.filename: archive.read(info) for info in archive.infolist() if not info.is_dir()}
    except zipfile.BadZipFile as exc:
        raise ValidationError("archive", f"not a zip archive: {exc}") from exc


def write_bundle_archive(files: dict[str, str]) -> bytes:
    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, "w", zipfile.ZIP_DEFLATED) as archive:
        for name in sorted(files):
            archive.writestr(name if name.endswith(".csv") else f"{name}.csv", files[name])
    return buffer.getvalue()


# ------------------------------------------------------------------ listing


def list_entities(
    store: Store,
    entity_type: str,
    filters: dict[str, str] | None = None,
    limit: int = 100,
    cursor: str | None = None,
) -> tuple[list[dict], str | None]:
    """Records of one entity type, id-ascending, exact-match filtered, paged."""
    if entity_type not in ENTITY_TYPES:
        raise UnknownEntityTypeError(f"unknown entity type {entity_type!r}")
    if limit < 1:
        raise BadFilterError(f"limit must be >= 1, got {limit}")
    filters = filters or {}
    unknown = set(filters) - _FILTERABLE[entity_type]
    if unknown:
        raise BadFilterError(
            f"{entity_type} cannot filter on {sorted(unknown)}; allowed: {sorted(_FILTERABLE[entity_type])}"
        )

    with store.lock:
        if entity_type == "users":
            rows = [u.to_dict() for u in store.users.values()]
        elif entity_type == "demographics":
            rows = [r.to_dict() for r in store.learners.values()]
        elif entity_type == "classes":
            rows = [c.to_dict() for c in store.classes.values()]
        elif entity_type == "resources":
            rows = [r.to_dict() for r in store.resources.values()]
        elif entity_type == "enrollments":
            rows = [{"id": ":".join(e.key()), **e.to_dict()} for e in store.enrollments.values()]
        elif entity_type == "results":
            rows = [{"id": ":".join(r.key()), **r.to_dict()} for r in store.skill_results.values()]
        elif entity_type == "curriculum":
            rows = [{"id": f"{c.learner_id}:{c.school_year}", **c.to_dict()} for c in store.curricula.values()]
        else:
            rows = [{"id": f"{s.learner_id}:{s.class_id}", **s.to_dict()} for s in store.school_life.values()]

    rows = [r for r in rows if all(str(r.get(k)) == v for k, v in filters.items())]
    rows.sort(key=lambda r: r["id"])

    fingerprint = hashlib.sha256(
        canonical_json({"entity": entity_type, "filters": filters}).encode()
    ).hexdigest()[:16]
    if cursor is not None:
        try:
            data = json.loads(base64.urlsafe_b64decode(cursor.encode()).decode())
            anchor, token_fp = data["a"], data["f"]
        except (ValueError, KeyError, TypeError) as exc:
            raise BadFilterError(f"unknown cursor {cursor!r}") from exc
        if token_fp != fingerprint:
            raise BadFilterError("cursor was issued for a different listing")
        rows = [r for r in rows if r["id"] > anchor]
    page = rows[:limit]
    more = None
    if len(rows) > limit and page:
        more = base64.urlsafe_b64encode(
            json.dumps({"f": fingerprint, "a": page[-1]["id"]}).encode()
        ).decode()
    return page, more


# ------------------------------------------------------------------ export


def pseudonym(salt: str, identifier: str) -> str:
    return hmac.new(salt.encode(), identifier.encode(), hashlib.sha256).hexdigest()[:32]


def _csv_text(columns: list[str], rows: list[list[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return buffer.getvalue()


def export_pseudonymized(
    store: Store,
    salt: str,
    entity_types: tuple[str, ...] = BUNDLE_FILES,
    include_events: bool = True,
) -> dict[str, str]:
    """Export bundle with every user identifier replaced by a keyed digest.

    Direct identifiers are dropped: names and mailboxes entirely, birth dates
    beyond the year. The same salt maps a user to the same pseudonym in every
    file, so exports stay joinable; the output re-imports into an empty store.
    When users and resources are both exported, activity events ride along in
    an `events` file so the bundle stays minable on its own.
    """
    if not salt:
        raise ValidationError("salt", "salt must be non-empty")
    unknown = [e for e in entity_types if e not in BUNDLE_FILES]
    if unknown:
        raise UnknownEntityTypeError(f"cannot export {unknown[0]!r}")

    def nym(identifier: str) -> str:
        return pseudonym(salt, identifier)

    out: dict[str, str] = {}
    with store.lock:
        if "users" in entity_types:
            rows = [[nym(u.id), u.role, "", ""] for u in store.users.values()]
            rows.sort()
            out["users"] = _csv_text(_COLUMNS["users"], rows)
        if "demographics" in entity_types:
            rows = [
                [
                    nym(r.id),
                    str(r.birth_date.year),
                    r.sex,
                    r.nationality or "",
                    r.socio_professional_category or "",
                    "|".join(nym(g) for g in r.guardians),
                ]
                for r in store.learners.values()
            ]
            rows.sort()
            out["demographics"] = _csv_text(_COLUMNS["demographics"], rows)
        if "classes" in entity_types:
            rows = sorted([c.id, c.school_id, c.subject, c.year] for c in store.classes.values())
            out["classes"] = _csv_text(_COLUMNS["classes"], rows)
        if "enrollments" in entity_types:
            rows = sorted([nym(e.user_id), e.class_id, e.role] for e in store.enrollments.values())
            out["enrollments"] = _csv_text(_COLUMNS["enrollments"], rows)
        if "results" in entity_types:
            rows = sorted(
                [nym(r.user_id), r.skill_id, repr(r.score), r.date.isoformat()]
                for r in store.skill_results.values()
            )
            out["results"] = _csv_text(_COLUMNS["results"], rows)
        if "resources" in entity_types:
            rows = sorted(
                [r.id, r.title, "|".join(f"{k}={v}" for k, v in sorted(r.attributes.items()))]
                for r in store.resources.values()
            )
            out["resources"] = _csv_text(_COLUMNS["resources"], rows)
        if "curriculum" in entity_types:
            rows = sorted(
                [
                    nym(c.learner_id),
                    c.school_year,
                    "|".join(c.grade_subjects),
                    "|".join(f"{a.subject}:{a.score}:{a.period}" for a in c.annual_results),
                ]
                for c in store.curricula.values()
            )
            out["curriculum"] = _csv_text(_COLUMNS["curriculum"], rows)
    if include_events and "users" in entity_types and "resources" in entity_types:
        rows = sorted(
            [nym(e.learner_id), e.instant.isoformat(), e.resource_id, e.verb]
            for e in store.activity_events()
        )
        if rows:
            out[EVENTS_FILE] = _csv_text(_COLUMNS[EVENTS_FILE], rows)
    return out
