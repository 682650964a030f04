"""Rule derivation from mined patterns and the teacher-gated recommendation flow.

Rules split the last item off a pattern, so each one reads as "learners like
X who did A, B next did C" and stays explainable. A recommendation reaches a
learner only through the teacher: proposed -> (approved | rejected | amended),
amended -> approved, approved -> delivered; rejected and delivered are
terminal.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

from .errors import (
    IllegalTransitionError,
    UnknownLearnerError,
    UnknownRecommendationError,
    ValidationError,
)
from .mining import (
    Item,
    KIND_ATTR,
    MultiSourcePattern,
    SequenceDB,
    build_sequence_db,
    pattern_support,
    sequence_key,
)
from .store import Store

STATE_PROPOSED = "proposed"
STATE_APPROVED = "approved"
STATE_REJECTED = "rejected"
STATE_AMENDED = "amended"
STATE_DELIVERED = "delivered"

TERMINAL_STATES = frozenset({STATE_REJECTED, STATE_DELIVERED})

# decision -> {current state -> next state}
TRANSITIONS: dict[str, dict[str, str]] = {
    "approve": {STATE_PROPOSED: STATE_APPROVED, STATE_AMENDED: STATE_APPROVED},
    "reject": {STATE_PROPOSED: STATE_REJECTED},
    "amend": {STATE_PROPOSED: STATE_AMENDED},
    "deliver": {STATE_APPROVED: STATE_DELIVERED},
}


@dataclass(frozen=True)
class Rule:
    context: frozenset[str]
    antecedent: tuple[Item, ...]
    consequent: Item
    confidence: float
    support_count: int

    def canonical_key(self) -> tuple:
        return (tuple(sorted(self.context)), sequence_key(self.antecedent), self.consequent.sort_key())

    def to_dict(self) -> dict:
        return {
            "context": sorted(self.context),
            "antecedent": [item.token() for item in self.antecedent],
            "consequent": self.consequent.token(),
            "confidence": self.confidence,
            "support": self.support_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Rule":
        return cls(
            context=frozenset(d["context"]),
            antecedent=tuple(Item.parse(t) for t in d["antecedent"]),
            consequent=Item.parse(d["consequent"]),
            confidence=d["confidence"],
            support_count=d["support"],
        )


def derive_rules(
    patterns: list[MultiSourcePattern],
    db: SequenceDB,
    contexts: dict,
    min_confidence: float,
) -> list[Rule]:
    """One rule per pattern of length >= 2, splitting off the last item; kept
    when full support / antecedent support clears the confidence floor."""
    if not 0.0 < min_confidence <= 1.0:
        raise ValidationError("min_confidence", "must be in (0, 1]")
    rules = []
    for pattern in patterns:
        if len(pattern.sequence) < 2:
            continue
        antecedent = pattern.sequence[:-1]
        full_support, _ = pattern_support((pattern.context, pattern.sequence), db, contexts)
        antecedent_support, _ = pattern_support((pattern.context, antecedent), db, contexts)
        if antecedent_support == 0:
            continue
        confidence = full_support / antecedent_support
        if confidence >= min_confidence:
            rules.append(
                Rule(
                    context=pattern.context,
                    antecedent=antecedent,
                    consequent=pattern.sequence[-1],
                    confidence=confidence,
                    support_count=full_support,
                )
            )
    rules.sort(key=Rule.canonical_key)
    return rules


@dataclass
class Recommendation:
    id: str
    learner_id: str
    consequent: Item
    source_rule: dict
    state: str = STATE_PROPOSED
    teacher_rating: int | None = None
    teacher_note: str | None = None
    original_consequent: str | None = None  # provenance after an amendment
    materialized_resources: tuple[str, ...] = ()
    transitions: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "learner_id": self.learner_id,
            "consequent": self.consequent.token(),
            "source_rule": self.source_rule,
            "state": self.state,
            "teacher_rating": self.teacher_rating,
            "teacher_note": self.teacher_note,
            "original_consequent": self.original_consequent,
            "materialized_resources": list(self.materialized_resources),
            "transitions": self.transitions,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Recommendation":
        return cls(
            id=d["id"],
            learner_id=d["learner_id"],
            consequent=Item.parse(d["consequent"]),
            source_rule=d["source_rule"],
            state=d["state"],
            teacher_rating=d.get("teacher_rating"),
            teacher_note=d.get("teacher_note"),
            original_consequent=d.get("original_consequent"),
            materialized_resources=tuple(d.get("materialized_resources") or ()),
            transitions=list(d.get("transitions") or ()),
        )


def _materialize(store: Store, item: Item) -> tuple[str, ...]:
    """An attr consequent stands for every resource carrying the attribute."""
    if item.kind != KIND_ATTR:
        return (item.value,)
    return tuple(
        sorted(rid for rid, r in store.resources.items() if item.value in r.attribute_labels())
    )


def propose_recommendations(
    store: Store,
    learner_id: str,
    rules: list[Rule],
    lookback: timedelta,
    reference_date,
    now: datetime | None = None,
    session_gap: timedelta = timedelta(minutes=30),
) -> list[Recommendation]:
    """Proposals for every rule whose context matches the learner, whose
    antecedent shows up in a recent session, and whose consequent was not
    already satisfied after the antecedent in the window. Re-running while
    states are unchanged creates no duplicates."""
    labels = store.resolve_learner_context(learner_id, reference_date)
    if now is None:
        now = datetime.now(timezone.utc)
    start = now - lookback
    events = [
        e for e in store.activity_events() if e.learner_id == learner_id and start <= e.instant <= now
    ]
    resources = {rid: r.attribute_labels() for rid, r in store.resources.items()}
    db = build_sequence_db(events, resources, session_gap=session_gap)
    sessions = db.sessions.get(learner_id, [])

    created = []
    with store.lock:
        open_consequents = {
            rec["consequent"]
            for rec in store.recommendations.values()
            if rec["learner_id"] == learner_id and rec["state"] not in TERMINAL_STATES
        }
        for rule in rules:
            if not rule.context <= labels:
                continue
            if not any(db.session_contains(s, rule.antecedent) for s in sessions):
                continue
            full = rule.antecedent + (rule.consequent,)
            if any(db.session_contains(s, full) for s in sessions):
                continue  # already satisfied
            if rule.consequent.token() in open_consequents:
                continue
            rec = Recommendation(
                id=str(uuid.uuid4()),
                learner_id=learner_id,
                consequent=rule.consequent,
                source_rule=rule.to_dict(),
                materialized_resources=_materialize(store, rule.consequent),
            )
            rec.transitions.append({"state": STATE_PROPOSED, "at": now.isoformat()})
            store.recommendations[rec.id] = rec.to_dict()
            open_consequents.add(rule.consequent.token())
            created.append(rec)
        store.persist_recommendations()
    return created


def review_recommendation(
    store: Store,
    recommendation_id: str,
    decision: str,
    rating: int | None = None,
    note: str | None = None,
    new_consequent: str | None = None,
    now: datetime | None = None,
) -> Recommendation:
    """Advance the state machine atomically (compare-and-set under the store
    lock); concurrent conflicting reviews see ILLEGAL_TRANSITION."""
    if decision not in TRANSITIONS:
        raise ValidationError("decision", f"unknown decision {decision!r}")
    if rating is not None and not 1 <= rating <= 5:
        raise ValidationError("rating", f"rating {rating} outside 1..5")
    if decision == "amend":
        if not new_consequent:
            raise ValidationError("consequent", "amend requires a non-empty consequent")
        amended_item = Item.parse(new_consequent)
    if now is None:
        now = datetime.now(timezone.utc)
    with store.lock:
        raw = store.recommendations.get(recommendation_id)
        if raw is None:
            raise UnknownRecommendationError(f"no recommendation {recommendation_id!r}")
        rec = Recommendation.from_dict(raw)
        next_state = TRANSITIONS[decision].get(rec.state)
        if next_state is None:
            raise IllegalTransitionError(rec.state, decision)
        rec.state = next_state
        if rating is not None:
            rec.teacher_rating = rating
        if note is not None:
            rec.teacher_note = note
        if decision == "amend":
            rec.original_consequent = rec.original_consequent or raw["consequent"]
            rec.consequent = amended_item
            rec.materialized_resources = _materialize(store, amended_item)
        rec.transitions.append({"state": next_state, "at": now.isoformat(), "decision": decision})
        store.recommendations[rec.id] = rec.to_dict()
        store.persist_recommendations()
        return rec


def list_recommendations(
    store: Store, learner_id: str | None = None, state: str | None = None
) -> list[Recommendation]:
    with store.lock:
        records = [Recommendation.from_dict(d) for d in store.recommendations.values()]
    if learner_id is not None:
        records = [r for r in records if r.learner_id == learner_id]
    if state is not None:
        records = [r for r in records if r.state == state]
    records.sort(key=lambda r: (r.transitions[0]["at"] if r.transitions else "", r.id))
    return records


def delivered_recommendations(store: Store, learner_id: str) -> list[Recommendation]:
    """What the learner view may show: delivered items only."""
    if learner_id not in store.users:
        raise UnknownLearnerError(learner_id)
    return list_recommendations(store, learner_id=learner_id, state=STATE_DELIVERED)
