"""Persistent record types of the conceptual data model.

The user entity sits at the center: demographic, curriculum and school-life
records hang off a user id, activity events reference users and resources.
All types are plain dataclasses with `to_dict`/`from_dict` for the JSON
persistence layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime

from .errors import ValidationError

ROLE_LEARNER = "learner"
ROLE_TEACHER = "teacher"

# Declared vocabulary for resource attribute keys.
RESOURCE_ATTRIBUTE_KEYS = ("subject", "resource-type", "publisher", "grade-level")


def _parse_date(value: str, field_name: str) -> date:
    try:
        return date.fromisoformat(value)
    except ValueError as exc:
        raise ValidationError(field_name, f"not an ISO date: {value!r}") from exc


@dataclass
class UserRecord:
    id: str
    role: str = ROLE_LEARNER
    name: str | None = None
    email: str | None = None

    def validate(self) -> None:
        if not self.id:
            raise ValidationError("id", "user id must be non-empty")
        if len(self.id) > 64:
            raise ValidationError("id", "ids are opaque tokens of at most 64 chars")
        if self.role not in (ROLE_LEARNER, ROLE_TEACHER):
            raise ValidationError("role", f"unknown role {self.role!r}")

    def to_dict(self) -> dict:
        return {"id": self.id, "role": self.role, "name": self.name, "email": self.email}

    @classmethod
    def from_dict(cls, d: dict) -> "UserRecord":
        return cls(id=d["id"], role=d.get("role", ROLE_LEARNER), name=d.get("name"), email=d.get("email"))


@dataclass
class LearnerRecord:
    """Demographic record attached to a learner user."""

    id: str
    birth_date: date
    sex: str
    nationality: str | None = None
    socio_professional_category: str | None = None
    guardians: tuple[str, ...] = ()
    year_only: bool = False  # True after pseudonymized export truncated the birth date

    def validate(self, today: date | None = None) -> None:
        if not self.id:
            raise ValidationError("id", "learner id must be non-empty")
        if not self.sex:
            raise ValidationError("sex", "sex code must be non-empty")
        if today is None:
            today = date.today()
        if self.birth_date >= today:
            raise ValidationError("birth_date", f"birth date {self.birth_date} not in the past")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "birth_date": self.birth_date.isoformat(),
            "sex": self.sex,
            "nationality": self.nationality,
            "socio_professional_category": self.socio_professional_category,
            "guardians": list(self.guardians),
            "year_only": self.year_only,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LearnerRecord":
        return cls(
            id=d["id"],
            birth_date=date.fromisoformat(d["birth_date"]),
            sex=d["sex"],
            nationality=d.get("nationality"),
            socio_professional_category=d.get("socio_professional_category"),
            guardians=tuple(d.get("guardians") or ()),
            year_only=bool(d.get("year_only", False)),
        )


@dataclass
class AnnualResult:
    subject: str
    score: float  # on the 0..20 grading scale
    period: str

    def validate(self) -> None:
        if not 0.0 <= self.score <= 20.0:
            raise ValidationError("annual_results.score", f"score {self.score} outside [0, 20]")


@dataclass
class CurriculumRecord:
    learner_id: str
    school_year: str
    grade_subjects: tuple[str, ...] = ()
    annual_results: tuple[AnnualResult, ...] = ()

    def validate(self) -> None:
        if not self.learner_id:
            raise ValidationError("learner_id", "learner id must be non-empty")
        if not self.school_year:
            raise ValidationError("school_year", "school year label must be non-empty")
        for r in self.annual_results:
            r.validate()

    def key(self) -> tuple[str, str]:
        return (self.learner_id, self.school_year)

    def to_dict(self) -> dict:
        return {
            "learner_id": self.learner_id,
            "school_year": self.school_year,
            "grade_subjects": list(self.grade_subjects),
            "annual_results": [
                {"subject": r.subject, "score": r.score, "period": r.period} for r in self.annual_results
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CurriculumRecord":
        return cls(
            learner_id=d["learner_id"],
            school_year=d["school_year"],
            grade_subjects=tuple(d.get("grade_subjects") or ()),
            annual_results=tuple(AnnualResult(**r) for r in d.get("annual_results") or ()),
        )


@dataclass
class Mark:
    skill_or_subject: str
    score: float
    date: date


@dataclass
class Homework:
    due_date: date
    resource_id: str | None = None


@dataclass
class Absence:
    date: date
    reason: str


@dataclass
class Incident:
    date: date
    code: str


@dataclass
class SchoolLifeRecord:
    learner_id: str
    class_id: str
    marks: tuple[Mark, ...] = ()
    homework: tuple[Homework, ...] = ()
    absences: tuple[Absence, ...] = ()
    incidents: tuple[Incident, ...] = ()

    def key(self) -> tuple[str, str]:
        return (self.learner_id, self.class_id)

    def to_dict(self) -> dict:
        return {
            "learner_id": self.learner_id,
            "class_id": self.class_id,
            "marks": [
                {"skill_or_subject": m.skill_or_subject, "score": m.score, "date": m.date.isoformat()}
                for m in self.marks
            ],
            "homework": [
                {"due_date": h.due_date.isoformat(), "resource_id": h.resource_id} for h in self.homework
            ],
            "absences": [{"date": a.date.isoformat(), "reason": a.reason} for a in self.absences],
            "incidents": [{"date": i.date.isoformat(), "code": i.code} for i in self.incidents],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SchoolLifeRecord":
        return cls(
            learner_id=d["learner_id"],
            class_id=d["class_id"],
            marks=tuple(
                Mark(m["skill_or_subject"], m["score"], date.fromisoformat(m["date"]))
                for m in d.get("marks") or ()
            ),
            homework=tuple(
                Homework(date.fromisoformat(h["due_date"]), h.get("resource_id"))
                for h in d.get("homework") or ()
            ),
            absences=tuple(
                Absence(date.fromisoformat(a["date"]), a["reason"]) for a in d.get("absences") or ()
            ),
            incidents=tuple(
                Incident(date.fromisoformat(i["date"]), i["code"]) for i in d.get("incidents") or ()
            ),
        )


@dataclass
class ResourceRecord:
    id: str
    title: str = ""
    attributes: dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        if not self.id:
            raise ValidationError("id", "resource id must be non-empty")
        for key in self.attributes:
            if key not in RESOURCE_ATTRIBUTE_KEYS:
                raise ValidationError(
                    "attributes", f"key {key!r} not in declared vocabulary {RESOURCE_ATTRIBUTE_KEYS}"
                )

    def attribute_labels(self) -> frozenset[str]:
        return frozenset(f"{k}={v}" for k, v in self.attributes.items())

    def to_dict(self) -> dict:
        return {"id": self.id, "title": self.title, "attributes": dict(self.attributes)}

    @classmethod
    def from_dict(cls, d: dict) -> "ResourceRecord":
        return cls(id=d["id"], title=d.get("title", ""), attributes=dict(d.get("attributes") or {}))


@dataclass
class ClassSection:
    id: str
    school_id: str = ""
    subject: str = ""
    year: str = ""

    def validate(self) -> None:
        if not self.id:
            raise ValidationError("id", "class id must be non-empty")

    def to_dict(self) -> dict:
        return {"id": self.id, "school_id": self.school_id, "subject": self.subject, "year": self.year}

    @classmethod
    def from_dict(cls, d: dict) -> "ClassSection":
        return cls(id=d["id"], school_id=d.get("school_id", ""), subject=d.get("subject", ""), year=d.get("year", ""))


@dataclass(frozen=True)
class Enrollment:
    user_id: str
    class_id: str
    role: str

    def validate(self) -> None:
        if self.role not in (ROLE_LEARNER, ROLE_TEACHER):
            raise ValidationError("role", f"unknown role {self.role!r}")

    def key(self) -> tuple[str, str, str]:
        return (self.user_id, self.class_id, self.role)

    def to_dict(self) -> dict:
        return {"user_id": self.user_id, "class_id": self.class_id, "role": self.role}

    @classmethod
    def from_dict(cls, d: dict) -> "Enrollment":
        return cls(user_id=d["user_id"], class_id=d["class_id"], role=d["role"])


@dataclass(frozen=True)
class SkillResult:
    user_id: str
    skill_id: str
    score: float  # normalized to [0, 1]
    date: date

    def validate(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValidationError("score", f"score {self.score} outside [0, 1]")

    def key(self) -> tuple[str, str, str]:
        return (self.user_id, self.skill_id, self.date.isoformat())

    def to_dict(self) -> dict:
        return {"user_id": self.user_id, "skill_id": self.skill_id, "score": self.score, "date": self.date.isoformat()}

    @classmethod
    def from_dict(cls, d: dict) -> "SkillResult":
        return cls(user_id=d["user_id"], skill_id=d["skill_id"], score=d["score"], date=date.fromisoformat(d["date"]))


@dataclass(frozen=True)
class ActivityEvent:
    """One resource access, derived from a stored non-voided statement."""

    learner_id: str
    instant: datetime
    resource_id: str
    verb: str
    statement_id: str
