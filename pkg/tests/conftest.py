from __future__ import annotations

import sys
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import pytest

SRC = Path(__file__).resolve().parent.parent / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from metal_lrs.models import (  # noqa: E402
    ClassSection,
    CurriculumRecord,
    Enrollment,
    LearnerRecord,
    ResourceRecord,
    SkillResult,
    UserRecord,
)
from metal_lrs.store import Store  # noqa: E402

VERB_EXPERIENCED = "http://adlnet.gov/expapi/verbs/experienced"
REFERENCE_DATE = date(2018, 11, 1)
T0 = datetime(2018, 11, 1, 10, 0, tzinfo=timezone.utc)


def account_actor(user_id: str) -> dict:
    return {"account": {"homePage": "https://vle.example.org", "name": user_id}}


def activity_statement(user_id: str, resource_id: str, at: datetime, verb: str = VERB_EXPERIENCED) -> dict:
    return {
        "actor": account_actor(user_id),
        "verb": {"id": verb},
        "object": {"objectType": "Activity", "id": f"res:{resource_id}"},
        "timestamp": at.isoformat(),
    }


def seed_d1(store: Store) -> None:
    """Three learners, five resources, the published-pattern-shaped sessions."""
    records = [
        UserRecord("L1", "learner", email="l1@ex.org"),
        UserRecord("L2", "learner", email="l2@ex.org"),
        UserRecord("L3", "learner", email="l3@ex.org"),
        LearnerRecord("L1", date(2004, 3, 1), "M"),
        LearnerRecord("L2", date(2004, 6, 15), "M"),
        LearnerRecord("L3", date(2003, 5, 10), "F"),
        CurriculumRecord("L1", "2018-2019", ("Mathematics-grade-9",)),
        CurriculumRecord("L2", "2018-2019", ("Mathematics-grade-9",)),
        CurriculumRecord("L3", "2018-2019", ("History-grade-9",)),
        ResourceRecord("R-15", "Fractions drill", {"subject": "Mathematics"}),
        ResourceRecord("R-42", "Geometry intro", {"subject": "Mathematics"}),
        ResourceRecord("R-77", "Algebra quiz", {"subject": "Mathematics"}),
        ResourceRecord("R-88", "Equations game", {"subject": "Mathematics"}),
        ResourceRecord("R-80", "Revolutions timeline", {"subject": "History"}),
    ]
    store.apply_bundle(records)
    sessions = {
        "L1": ["R-15", "R-42", "R-77"],
        "L2": ["R-15", "R-42", "R-88"],
        "L3": ["R-80"],
    }
    batch = []
    for learner, resource_ids in sessions.items():
        for i, rid in enumerate(resource_ids):
            batch.append(activity_statement(learner, rid, T0 + timedelta(minutes=5 * i)))
    store.insert_statements(batch)


@pytest.fixture
def store() -> Store:
    return Store()


@pytest.fixture
def d1_store() -> Store:
    s = Store()
    seed_d1(s)
    return s


@pytest.fixture
def d1_contexts(d1_store: Store) -> dict[str, frozenset[str]]:
    return {
        lid: d1_store.resolve_learner_context(lid, REFERENCE_DATE) for lid in d1_store.learner_ids()
    }


def seed_class_fixture(store: Store) -> None:
    """A class with two learners and one teacher plus some skill results."""
    store.apply_bundle(
        [
            UserRecord("L1", "learner", email="l1@ex.org"),
            UserRecord("L2", "learner", email="l2@ex.org"),
            UserRecord("T1", "teacher", email="t1@ex.org"),
            LearnerRecord("L1", date(2004, 3, 1), "M"),
            LearnerRecord("L2", date(2004, 6, 15), "F"),
            ClassSection("C1", "S1", "Mathematics", "2018-2019"),
            Enrollment("L1", "C1", "learner"),
            Enrollment("L2", "C1", "learner"),
            Enrollment("T1", "C1", "teacher"),
            SkillResult("L1", "SK-frac", 0.4, date(2018, 11, 1)),
            SkillResult("L2", "SK-frac", 0.8, date(2018, 11, 1)),
        ]
    )
