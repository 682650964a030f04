"""Multi-source sequential pattern mining.

A pattern couples a learner-context label set with a sequence whose items
are either a concrete resource id or a resource attribute label. Mining is
projected-database prefix growth per context group, with group-size pruning
on context enumeration and support pruning on sequence growth. The concrete
activity source outranks the resource-attribute source: at equal text an
id item sorts (and extends) before an attr item.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import timedelta
from fractions import Fraction
from typing import Iterable, Mapping

from .errors import LimitExceededError, UnknownResourceError, ValidationError
from .models import ActivityEvent

KIND_ID = "id"
KIND_ATTR = "attr"

_KIND_RANK = {KIND_ID: 0, KIND_ATTR: 1}

DEFAULT_SESSION_GAP = timedelta(minutes=30)
DEFAULT_CANDIDATE_CAP = 1_000_000


@dataclass(frozen=True)
class Item:
    kind: str  # "id" matches one resource, "attr" matches any resource carrying the label
    value: str

    def sort_key(self) -> tuple[str, int]:
        return (self.value, _KIND_RANK[self.kind])

    def token(self) -> str:
        return f"{self.kind}:{self.value}"

    @classmethod
    def parse(cls, token: str) -> "Item":
        kind, sep, value = token.partition(":")
        if not sep or kind not in _KIND_RANK or not value:
            raise ValidationError("item", f"not an item token: {token!r}")
        return cls(kind, value)


def iid(value: str) -> Item:
    return Item(KIND_ID, value)


def attr(value: str) -> Item:
    return Item(KIND_ATTR, value)


def sequence_key(sequence: Iterable[Item]) -> tuple:
    return tuple(item.sort_key() for item in sequence)


@dataclass(frozen=True)
class MultiSourcePattern:
    context: frozenset[str]
    sequence: tuple[Item, ...]
    support_count: int
    context_group_size: int

    def canonical_key(self) -> tuple:
        return (tuple(sorted(self.context)), sequence_key(self.sequence))

    def to_record(self) -> dict:
        return {
            "context": sorted(self.context),
            "sequence": [item.token() for item in self.sequence],
            "support": self.support_count,
            "group": self.context_group_size,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)

    @classmethod
    def from_record(cls, record: dict) -> "MultiSourcePattern":
        return cls(
            context=frozenset(record["context"]),
            sequence=tuple(Item.parse(t) for t in record["sequence"]),
            support_count=record["support"],
            context_group_size=record["group"],
        )


@dataclass
class SequenceDB:
    """Per-learner sessions of resource ids plus the resource attribute map."""

    sessions: dict[str, list[list[str]]] = field(default_factory=dict)
    resource_attrs: dict[str, frozenset[str]] = field(default_factory=dict)

    def learners(self) -> list[str]:
        return sorted(self.sessions)

    def event_matches(self, item: Item, resource_id: str) -> bool:
        if item.kind == KIND_ID:
            return resource_id == item.value
        return item.value in self.resource_attrs.get(resource_id, frozenset())

    def session_contains(self, session: list[str], sequence: tuple[Item, ...]) -> bool:
        """Non-contiguous, order-preserving subsequence match (greedy earliest)."""
        pos = 0
        for item in sequence:
            while pos < len(session) and not self.event_matches(item, session[pos]):
                pos += 1
            if pos == len(session):
                return False
            pos += 1
        return True

    def learner_supports(self, learner: str, sequence: tuple[Item, ...]) -> bool:
        return any(self.session_contains(s, sequence) for s in self.sessions.get(learner, ()))


def build_sequence_db(
    events: Iterable[ActivityEvent],
    resources: Mapping[str, frozenset[str]],
    session_gap: timedelta = DEFAULT_SESSION_GAP,
) -> SequenceDB:
    """Group events per learner and split into sessions at gaps above `session_gap`.

    Order inside a session follows (instant, statement id), so shuffled input
    produces an identical database.
    """
    unknown = sorted({e.resource_id for e in events if e.resource_id not in resources})
    if unknown:
        raise UnknownResourceError(unknown)
    per_learner: dict[str, list[ActivityEvent]] = {}
    for event in events:
        per_learner.setdefault(event.learner_id, []).append(event)
    db = SequenceDB(resource_attrs={rid: frozenset(labels) for rid, labels in resources.items()})
    for learner in sorted(per_learner):
        ordered = sorted(per_learner[learner], key=lambda e: (e.instant, e.statement_id))
        sessions: list[list[str]] = []
        current: list[str] = []
        last = None
        for event in ordered:
            if last is not None and event.instant - last > session_gap:
                sessions.append(current)
                current = []
            current.append(event.resource_id)
            last = event.instant
        if current:
            sessions.append(current)
        db.sessions[learner] = sessions
    return db


@dataclass
class MinerParams:
    min_group_size: int = 1  # absolute floor on the context group
    min_support: float = 0.5  # fraction of the context group
    max_sequence_length: int = 3
    max_context_size: int = 3
    candidate_cap: int = DEFAULT_CANDIDATE_CAP

    def validate(self) -> None:
        if self.min_group_size < 1:
            raise ValidationError("min_group_size", "must be >= 1")
        if not 0.0 < self.min_support <= 1.0:
            raise ValidationError("min_support", "must be in (0, 1]")
        if self.max_sequence_length < 1:
            raise ValidationError("max_sequence_length", "must be >= 1")
        if self.max_context_size < 0:
            raise ValidationError("max_context_size", "must be >= 0")


def min_support_count(min_support: float | Fraction, group_size: int) -> int:
    """Smallest support count c with c / group_size >= min_support.

    The fraction is recovered from the decimal the caller wrote (str round
    trip), so 0.1 of a group of 10 means 1, not the binary-float neighbour.
    """
    frac = min_support if isinstance(min_support, Fraction) else Fraction(str(min_support))
    return max(1, math.ceil(frac * group_size))


def _context_of(contexts: Mapping[str, frozenset[str] | set[str]], learner: str) -> frozenset[str]:
    return frozenset(contexts.get(learner, frozenset()))


def learner_universe(db: SequenceDB, contexts: Mapping[str, frozenset[str] | set[str]]) -> list[str]:
    return sorted(set(db.sessions) | set(contexts))


def context_group(
    context: frozenset[str], db: SequenceDB, contexts: Mapping[str, frozenset[str] | set[str]]
) -> frozenset[str]:
    return frozenset(
        l for l in learner_universe(db, contexts) if context <= _context_of(contexts, l)
    )


def supporting_learners(
    context: frozenset[str],
    sequence: tuple[Item, ...],
    db: SequenceDB,
    contexts: Mapping[str, frozenset[str] | set[str]],
) -> tuple[frozenset[str], frozenset[str]]:
    """(supporters, group) for a candidate pattern, by direct matching."""
    group = context_group(context, db, contexts)
    supporters = frozenset(l for l in group if db.learner_supports(l, sequence))
    return supporters, group


def pattern_support(
    pattern: MultiSourcePattern | tuple[frozenset[str], tuple[Item, ...]],
    db: SequenceDB,
    contexts: Mapping[str, frozenset[str] | set[str]],
) -> tuple[int, int]:
    """(support count, context group size) for a well-formed pattern candidate."""
    if isinstance(pattern, MultiSourcePattern):
        context, sequence = pattern.context, pattern.sequence
    else:
        context, sequence = pattern
    supporters, group = supporting_learners(frozenset(context), tuple(sequence), db, contexts)
    return len(supporters), len(group)


@dataclass
class _Candidate:
    context: frozenset[str]
    group: frozenset[str]
    sequence: tuple[Item, ...]
    supporters: frozenset[str]


class _CandidateBudget:
    def __init__(self, cap: int):
        self.cap = cap
        self.seen = 0

    def charge(self, n: int = 1) -> None:
        self.seen += n
        if self.seen > self.cap:
            raise LimitExceededError(
                f"candidate count exceeded the cap of {self.cap}; tighten the mining parameters"
            )


def _grow_sequences(
    db: SequenceDB,
    group: frozenset[str],
    min_count: int,
    max_length: int,
    budget: _CandidateBudget,
) -> list[tuple[tuple[Item, ...], frozenset[str]]]:
    """PrefixSpan-style growth: keep, per (learner, session), the position after
    the earliest match of the current prefix, and extend with every item whose
    learner support clears `min_count`."""
    members = sorted(group)
    initial = [
        (learner, si, 0)
        for learner in members
        for si in range(len(db.sessions.get(learner, ())))
    ]
    out: list[tuple[tuple[Item, ...], frozenset[str]]] = []

    def extend(prefix: tuple[Item, ...], entries: list[tuple[str, int, int]]) -> None:
        # first match position per (learner, session) for every candidate item
        first_pos: dict[Item, dict[tuple[str, int], int]] = {}
        for learner, si, start in entries:
            session = db.sessions[learner][si]
            seen_here: set[Item] = set()
            for pos in range(start, len(session)):
                rid = session[pos]
                symbols = [iid(rid)]
                symbols.extend(attr(label) for label in sorted(db.resource_attrs.get(rid, ())))
                for item in symbols:
                    if item in seen_here:
                        continue
                    seen_here.add(item)
                    first_pos.setdefault(item, {})[(learner, si)] = pos
        budget.charge(len(first_pos))
        for item in sorted(first_pos, key=Item.sort_key):
            positions = first_pos[item]
            supporters = frozenset(learner for learner, _ in positions)
            if len(supporters) < min_count:
                continue
            grown = prefix + (item,)
            out.append((grown, supporters))
            if len(grown) < max_length:
                extend(grown, [(l, si, pos + 1) for (l, si), pos in sorted(positions.items())])

    extend((), initial)
    return out


def _is_redundant(
    candidate: _Candidate,
    db: SequenceDB,
    holders: dict[str, frozenset[str]],
    params: "MinerParams",
) -> bool:
    """True when a one-step specialization that is itself emittable keeps the
    exact supporter set, so the more specific pattern represents this one.

    Specializations: add one context label (only considered while the grown
    context stays within the size bound and its group clears the group-size
    floor; the support fraction then holds automatically), or replace one
    attr item by a concrete resource id carrying that attribute (thresholds
    carry over unchanged).
    """
    supporters = candidate.supporters
    if len(candidate.context) < params.max_context_size:
        for label, holding in holders.items():
            if label in candidate.context:
                continue
            if len(candidate.group & holding) < params.min_group_size:
                continue
            if supporters <= holding:
                return True
    for position, item in enumerate(candidate.sequence):
        if item.kind != KIND_ATTR:
            continue
        for rid in sorted(db.resource_attrs):
            if item.value not in db.resource_attrs[rid]:
                continue
            specialized = (
                candidate.sequence[:position] + (iid(rid),) + candidate.sequence[position + 1 :]
            )
            if all(db.learner_supports(l, specialized) for l in supporters):
                return True
    return False


def mine_patterns(
    db: SequenceDB,
    contexts: Mapping[str, frozenset[str] | set[str]],
    params: MinerParams,
) -> list[MultiSourcePattern]:
    """All patterns passing the group/support/size thresholds, redundancy-filtered,
    in canonical order (context lexicographic, then sequence with ids before attrs
    at equal text). Deterministic for identical inputs."""
    params.validate()
    budget = _CandidateBudget(params.candidate_cap)
    universe = learner_universe(db, contexts)
    labels = sorted({label for l in universe for label in _context_of(contexts, l)})
    holders = {
        label: frozenset(l for l in universe if label in _context_of(contexts, l)) for label in labels
    }

    candidates: list[_Candidate] = []

    def visit(context: tuple[str, ...], group: frozenset[str], next_label: int) -> None:
        min_count = min_support_count(params.min_support, len(group))
        for sequence, supporters in _grow_sequences(
            db, group, min_count, params.max_sequence_length, budget
        ):
            candidates.append(_Candidate(frozenset(context), group, sequence, supporters))
        if len(context) >= params.max_context_size:
            return
        for i in range(next_label, len(labels)):
            narrowed = group & holders[labels[i]]
            if len(narrowed) >= params.min_group_size:
                visit(context + (labels[i],), narrowed, i + 1)

    all_learners = frozenset(universe)
    if len(all_learners) >= params.min_group_size:
        visit((), all_learners, 0)

    kept = [c for c in candidates if not _is_redundant(c, db, holders, params)]
    patterns = [
        MultiSourcePattern(
            context=c.context,
            sequence=c.sequence,
            support_count=len(c.supporters),
            context_group_size=len(c.group),
        )
        for c in kept
    ]
    patterns.sort(key=MultiSourcePattern.canonical_key)
    return patterns
