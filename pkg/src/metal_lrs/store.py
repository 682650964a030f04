"""Central record store: append-only statement log plus roster tables.

All other modules read from and write to this one object. Writes are
serialized behind a single lock, reads work on snapshots, statement content
survives a restart bit-exactly (the canonical JSON line is re-emitted from
the parsed content, and canonical serialization is deterministic).
"""

from __future__ import annotations

import base64
import copy
import hashlib
import json
import threading
import uuid
from dataclasses import dataclass
from datetime import date, datetime, timezone
from pathlib import Path

from . import statements as stmt
from .errors import (
    BadFilterError,
    ConflictError,
    DanglingReferenceError,
    DuplicateError,
    UnknownLearnerError,
    ValidationError,
)
from .models import (
    ROLE_LEARNER,
    ActivityEvent,
    ClassSection,
    CurriculumRecord,
    Enrollment,
    LearnerRecord,
    ResourceRecord,
    SchoolLifeRecord,
    SkillResult,
    UserRecord,
)

RosterRecord = (
    UserRecord
    | LearnerRecord
    | CurriculumRecord
    | SchoolLifeRecord
    | ClassSection
    | ResourceRecord
    | Enrollment
    | SkillResult
)


def canonical_json(obj: object) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _isoformat(instant: datetime) -> str:
    return instant.astimezone(timezone.utc).isoformat()


@dataclass(frozen=True)
class StoredStatement:
    id: str
    stored: datetime
    content: dict

    def read_view(self) -> dict:
        body = copy.deepcopy(self.content)
        body.setdefault("timestamp", _isoformat(self.stored))
        body["stored"] = _isoformat(self.stored)
        return body


@dataclass
class StatementFilter:
    agent: set[tuple] | None = None  # identifier tuples from statements.actor_identifiers
    verb: str | None = None
    activity: str | None = None
    since: datetime | None = None  # exclusive, on the stored instant
    until: datetime | None = None  # inclusive, on the stored instant
    limit: int = 50
    cursor: str | None = None

    def fingerprint(self) -> str:
        key = canonical_json(
            {
                "agent": sorted(list(t) for t in self.agent) if self.agent else None,
                "verb": self.verb,
                "activity": self.activity,
                "since": _isoformat(self.since) if self.since else None,
                "until": _isoformat(self.until) if self.until else None,
            }
        )
        return hashlib.sha256(key.encode()).hexdigest()[:16]


@dataclass
class StatementPage:
    statements: list[dict]
    more: str | None = None


def _encode_cursor(fingerprint: str, anchor: StoredStatement) -> str:
    token = canonical_json({"f": fingerprint, "s": _isoformat(anchor.stored), "i": anchor.id})
    return base64.urlsafe_b64encode(token.encode()).decode()


def _decode_cursor(cursor: str, fingerprint: str) -> tuple[datetime, str]:
    try:
        data = json.loads(base64.urlsafe_b64decode(cursor.encode()).decode())
        anchor = (stmt.parse_instant(data["s"], "cursor"), data["i"])
        token_fp = data["f"]
    except (ValueError, KeyError, TypeError, ValidationError) as exc:
        raise BadFilterError(f"unknown cursor {cursor!r}") from exc
    if token_fp != fingerprint:
        raise BadFilterError("cursor was issued for a different filter")
    return anchor


class Store:
    """Statement log + roster tables with optional directory persistence."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self.lock = threading.RLock()
        self._statements: list[StoredStatement] = []
        self._by_id: dict[str, StoredStatement] = {}
        self.users: dict[str, UserRecord] = {}
        self.learners: dict[str, LearnerRecord] = {}
        self.curricula: dict[tuple[str, str], CurriculumRecord] = {}
        self.school_life: dict[tuple[str, str], SchoolLifeRecord] = {}
        self.classes: dict[str, ClassSection] = {}
        self.resources: dict[str, ResourceRecord] = {}
        self.enrollments: dict[tuple[str, str, str], Enrollment] = {}
        self.skill_results: dict[tuple[str, str, str], SkillResult] = {}
        self.recommendations: dict[str, dict] = {}
        if self.path is not None:
            self.path.mkdir(parents=True, exist_ok=True)
            self._load()

    # ------------------------------------------------------------------ load/save

    def _statement_log(self) -> Path:
        assert self.path is not None
        return self.path / "statements.jsonl"

    def _load(self) -> None:
        log = self._statement_log()
        if log.exists():
            with log.open(encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    entry = json.loads(line)
                    record = StoredStatement(
                        id=entry["statement"]["id"],
                        stored=stmt.parse_instant(entry["stored"], "stored"),
                        content=entry["statement"],
                    )
                    self._statements.append(record)
                    self._by_id[record.id] = record
        roster_file = self.path / "roster.json"
        if roster_file.exists():
            data = json.loads(roster_file.read_text(encoding="utf-8"))
            self.users = {d["id"]: UserRecord.from_dict(d) for d in data.get("users", [])}
            self.learners = {d["id"]: LearnerRecord.from_dict(d) for d in data.get("learners", [])}
            self.curricula = {
                (r.learner_id, r.school_year): r
                for r in (CurriculumRecord.from_dict(d) for d in data.get("curricula", []))
            }
            self.school_life = {
                (r.learner_id, r.class_id): r
                for r in (SchoolLifeRecord.from_dict(d) for d in data.get("school_life", []))
            }
            self.classes = {d["id"]: ClassSection.from_dict(d) for d in data.get("classes", [])}
            self.resources = {d["id"]: ResourceRecord.from_dict(d) for d in data.get("resources", [])}
            self.enrollments = {
                r.key(): r for r in (Enrollment.from_dict(d) for d in data.get("enrollments", []))
            }
            self.skill_results = {
                r.key(): r for r in (SkillResult.from_dict(d) for d in data.get("skill_results", []))
            }
        rec_file = self.path / "recommendations.json"
        if rec_file.exists():
            self.recommendations = json.loads(rec_file.read_text(encoding="utf-8"))

    def _append_statements(self, records: list[StoredStatement]) -> None:
        if self.path is None:
            return
        with self._statement_log().open("a", encoding="utf-8") as fh:
            for record in records:
                fh.write(canonical_json({"stored": _isoformat(record.stored), "statement": record.content}))
                fh.write("\n")
            fh.flush()

    def _roster_state(self) -> dict:
        return {
            "users": [self.users[k].to_dict() for k in sorted(self.users)],
            "learners": [self.learners[k].to_dict() for k in sorted(self.learners)],
            "curricula": [self.curricula[k].to_dict() for k in sorted(self.curricula)],
            "school_life": [self.school_life[k].to_dict() for k in sorted(self.school_life)],
            "classes": [self.classes[k].to_dict() for k in sorted(self.classes)],
            "resources": [self.resources[k].to_dict() for k in sorted(self.resources)],
            "enrollments": [self.enrollments[k].to_dict() for k in sorted(self.enrollments)],
            "skill_results": [self.skill_results[k].to_dict() for k in sorted(self.skill_results)],
        }

    def roster_snapshot_bytes(self) -> bytes:
        with self.lock:
            return canonical_json(self._roster_state()).encode()

    def _persist_roster(self) -> None:
        if self.path is None:
            return
        target = self.path / "roster.json"
        tmp = target.with_suffix(".json.tmp")
        tmp.write_text(canonical_json(self._roster_state()), encoding="utf-8")
        tmp.replace(target)

    def persist_recommendations(self) -> None:
        if self.path is None:
            return
        target = self.path / "recommendations.json"
        tmp = target.with_suffix(".json.tmp")
        tmp.write_text(canonical_json(self.recommendations), encoding="utf-8")
        tmp.replace(target)

    # ------------------------------------------------------------------ statements

    @property
    def statement_count(self) -> int:
        return len(self._statements)

    def insert_statement(self, raw: dict, provided_id: str | None = None) -> str:
        return self.insert_statements([raw], provided_ids=[provided_id])[0]

    def insert_statements(self, raws: list[dict], provided_ids: list[str | None] | None = None) -> list[str]:
        """Insert a batch atomically: either every statement is stored or none."""
        if provided_ids is None:
            provided_ids = [None] * len(raws)
        with self.lock:
            now = datetime.now(timezone.utc)
            pending: list[StoredStatement] = []
            pending_by_id: dict[str, dict] = {}
            ids: list[str] = []
            for index, (raw, pid) in enumerate(zip(raws, provided_ids)):
                try:
                    content = stmt.canonicalize_statement(raw, provided_id=pid)
                    if content.get("timestamp") is not None:
                        ts = stmt.parse_instant(content["timestamp"], "timestamp")
                        if ts > now + stmt.CLOCK_SKEW:
                            raise ValidationError(
                                "timestamp", f"timestamp {content['timestamp']} is ahead of the store clock"
                            )
                except ValidationError as exc:
                    exc.index = index
                    raise
                sid = content.get("id") or str(uuid.uuid4())
                content["id"] = sid
                existing = self._by_id.get(sid)
                if existing is not None:
                    if existing.content != content:
                        raise ConflictError(sid, index=index)
                    ids.append(sid)  # idempotent re-insert
                    continue
                staged = pending_by_id.get(sid)
                if staged is not None:
                    if staged != content:
                        raise ConflictError(sid, index=index)
                    ids.append(sid)
                    continue
                record = StoredStatement(id=sid, stored=now, content=content)
                pending.append(record)
                pending_by_id[sid] = content
                ids.append(sid)
            for record in pending:
                self._statements.append(record)
                self._by_id[record.id] = record
            self._append_statements(pending)
            return ids

    def get_statement(self, statement_id: str) -> dict | None:
        sid = stmt.normalize_uuid(statement_id, "statementId")
        with self.lock:
            record = self._by_id.get(sid)
        return record.read_view() if record else None

    def _voided_ids(self, snapshot: list[StoredStatement]) -> set[str]:
        """Ids voided by a stored voiding statement; voiding statements are un-voidable."""
        targets = set()
        for record in snapshot:
            target = stmt.voided_target(record.content)
            if target is not None:
                targets.add(target)
        return {
            record.id
            for record in snapshot
            if record.id in targets and stmt.voided_target(record.content) is None
        }

    def is_voided(self, statement_id: str) -> bool:
        sid = stmt.normalize_uuid(statement_id, "statementId")
        with self.lock:
            snapshot = list(self._statements)
        return sid in self._voided_ids(snapshot)

    def query_statements(self, filt: StatementFilter) -> StatementPage:
        if filt.limit < 1:
            raise BadFilterError(f"limit must be >= 1, got {filt.limit}")
        with self.lock:
            snapshot = list(self._statements)
        voided = self._voided_ids(snapshot)

        def matches(record: StoredStatement) -> bool:
            if record.id in voided:
                return False
            content = record.content
            if filt.agent is not None:
                if not (stmt.actor_identifiers(content["actor"]) & filt.agent):
                    return False
            if filt.verb is not None and stmt.verb_id(content) != filt.verb:
                return False
            if filt.activity is not None and stmt.activity_id(content) != filt.activity:
                return False
            if filt.since is not None and not record.stored > filt.since:
                return False
            if filt.until is not None and not record.stored <= filt.until:
                return False
            return True

        matching = sorted((r for r in snapshot if matches(r)), key=lambda r: r.id)
        matching.sort(key=lambda r: r.stored, reverse=True)  # stable: ties stay id-ascending

        fingerprint = filt.fingerprint()
        if filt.cursor is not None:
            anchor_stored, anchor_id = _decode_cursor(filt.cursor, fingerprint)
            matching = [
                r
                for r in matching
                if r.stored < anchor_stored or (r.stored == anchor_stored and r.id > anchor_id)
            ]
        page = matching[: filt.limit]
        more = None
        if len(matching) > filt.limit and page:
            more = _encode_cursor(fingerprint, page[-1])
        return StatementPage(statements=[r.read_view() for r in page], more=more)

    # ------------------------------------------------------------------ roster

    def _lookup_sets(self, staged: dict[type, dict]) -> dict:
        """Key views that consult staged records first, then the stored tables."""
        return {
            "users": lambda k: staged[UserRecord].get(k) or self.users.get(k),
            "classes": lambda k: k in staged[ClassSection] or k in self.classes,
            "resources": lambda k: k in staged[ResourceRecord] or k in self.resources,
        }

    def _check_record(self, record: RosterRecord, lookups: dict) -> None:
        if isinstance(record, UserRecord):
            record.validate()
        elif isinstance(record, LearnerRecord):
            record.validate()
            user = lookups["users"](record.id)
            if user is None:
                raise DanglingReferenceError(record.id, f"no user {record.id!r} for demographics")
            if user.role != ROLE_LEARNER:
                raise DuplicateError(f"user id {record.id!r} is taken by a {user.role}, not a learner")
        elif isinstance(record, CurriculumRecord):
            record.validate()
            user = lookups["users"](record.learner_id)
            if user is None or user.role != ROLE_LEARNER:
                raise DanglingReferenceError(record.learner_id)
        elif isinstance(record, SchoolLifeRecord):
            user = lookups["users"](record.learner_id)
            if user is None or user.role != ROLE_LEARNER:
                raise DanglingReferenceError(record.learner_id)
            if not lookups["classes"](record.class_id):
                raise DanglingReferenceError(record.class_id)
        elif isinstance(record, ClassSection):
            record.validate()
        elif isinstance(record, ResourceRecord):
            record.validate()
        elif isinstance(record, Enrollment):
            record.validate()
            if lookups["users"](record.user_id) is None:
                raise DanglingReferenceError(record.user_id)
            if not lookups["classes"](record.class_id):
                raise DanglingReferenceError(record.class_id)
        elif isinstance(record, SkillResult):
            record.validate()
            if lookups["users"](record.user_id) is None:
                raise DanglingReferenceError(record.user_id)
        else:
            raise ValidationError("", f"not a roster record: {type(record).__name__}")

    @staticmethod
    def _record_key(record: RosterRecord):
        if isinstance(record, (UserRecord, LearnerRecord, ClassSection, ResourceRecord)):
            return record.id
        return record.key()

    _TABLE_OF = {
        UserRecord: "users",
        LearnerRecord: "learners",
        CurriculumRecord: "curricula",
        SchoolLifeRecord: "school_life",
        ClassSection: "classes",
        ResourceRecord: "resources",
        Enrollment: "enrollments",
        SkillResult: "skill_results",
    }

    def validate_bundle(self, records: list[RosterRecord]) -> list[tuple[int, Exception]]:
        """Referential/uniqueness check of a bundle against store + bundle. Collects all errors."""
        staged: dict[type, dict] = {UserRecord: {}, ClassSection: {}, ResourceRecord: {}}
        for record in records:
            if type(record) in staged:
                staged[type(record)][self._record_key(record)] = record
        lookups = self._lookup_sets(staged)
        errors: list[tuple[int, Exception]] = []
        for index, record in enumerate(records):
            try:
                self._check_record(record, lookups)
            except Exception as exc:  # noqa: BLE001 - reported, not swallowed
                errors.append((index, exc))
        return errors

    def apply_bundle(self, records: list[RosterRecord]) -> list[str]:
        """Atomically upsert a bundle; raises the first error and changes nothing on failure."""
        with self.lock:
            errors = self.validate_bundle(records)
            if errors:
                raise errors[0][1]
            keys = []
            for record in records:
                table = getattr(self, self._TABLE_OF[type(record)])
                key = self._record_key(record)
                table[key] = record
                keys.append(key if isinstance(key, str) else ":".join(key))
            self._persist_roster()
            return keys

    def upsert_roster_record(self, record: RosterRecord) -> str:
        return self.apply_bundle([record])[0]

    # ------------------------------------------------------------------ learner context

    def resolve_learner_context(self, learner_id: str, reference_date: date) -> frozenset[str]:
        """Flat attribute labels for a learner: demographics + curriculum + school life."""
        with self.lock:
            user = self.users.get(learner_id)
            if user is None or user.role != ROLE_LEARNER:
                raise UnknownLearnerError(learner_id)
            labels: set[str] = set()
            demo = self.learners.get(learner_id)
            if demo is not None:
                born = demo.birth_date
                age = reference_date.year - born.year - (
                    (reference_date.month, reference_date.day) < (born.month, born.day)
                )
                labels.add(f"age={age}")
                labels.add(f"sex={demo.sex}")
            for (lid, _), curriculum in self.curricula.items():
                if lid == learner_id:
                    labels.update(curriculum.grade_subjects)
            for (lid, class_id) in self.school_life:
                if lid == learner_id:
                    labels.add(f"class={class_id}")
            return frozenset(labels)

    def learner_ids(self) -> list[str]:
        with self.lock:
            return sorted(uid for uid, u in self.users.items() if u.role == ROLE_LEARNER)

    # ------------------------------------------------------------------ activity events

    def _resolve_resource(self, activity_iri: str) -> str | None:
        if activity_iri in self.resources:
            return activity_iri
        if activity_iri.startswith("res:") and activity_iri[4:] in self.resources:
            return activity_iri[4:]
        for sep in (":", "/"):
            tail = activity_iri.rsplit(sep, 1)[-1]
            if tail in self.resources:
                return tail
        return None

    def _resolve_actor(self, actor: dict) -> str | None:
        idents = stmt.actor_identifiers(actor)
        for kind, *rest in idents:
            if kind == "account":
                user = self.users.get(rest[1])
                if user is not None and user.role == ROLE_LEARNER:
                    return user.id
            elif kind == "mbox":
                email = rest[0][len("mailto:"):]
                for user in self.users.values():
                    if user.role == ROLE_LEARNER and user.email and user.email.lower() == email:
                        return user.id
        return None

    def activity_events(self) -> list[ActivityEvent]:
        """Events derived 1:1 from stored, non-voided statements with a known resource."""
        with self.lock:
            snapshot = list(self._statements)
            voided = self._voided_ids(snapshot)
            events = []
            for record in snapshot:
                if record.id in voided:
                    continue
                activity = stmt.activity_id(record.content)
                if activity is None:
                    continue
                resource_id = self._resolve_resource(activity)
                if resource_id is None:
                    continue
                learner_id = self._resolve_actor(record.content["actor"])
                if learner_id is None:
                    continue
                raw_ts = record.content.get("timestamp")
                instant = stmt.parse_instant(raw_ts, "timestamp") if raw_ts else record.stored
                events.append(
                    ActivityEvent(
                        learner_id=learner_id,
                        instant=instant,
                        resource_id=resource_id,
                        verb=stmt.verb_id(record.content),
                        statement_id=record.id,
                    )
                )
        events.sort(key=lambda e: (e.instant, e.statement_id))
        return events
