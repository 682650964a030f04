"""Dashboard indicators: activity pulse, engagement, effort, skill evolution.

All four are pure functions of store state and the requested window. The
effort and engagement formulas are declared proxies (capped inter-event
time, active-day ratio) and their knobs live in IndicatorConfig so schools
can retune them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta

from .errors import UnknownLearnerError, UnknownSkillError, ValidationError
from .models import ROLE_LEARNER, ActivityEvent
from .store import Store

DAY = timedelta(days=1)


@dataclass
class IndicatorConfig:
    session_gap: timedelta = timedelta(minutes=30)
    effort_gap_cap: timedelta = timedelta(minutes=10)


@dataclass
class IndicatorPoint:
    bucket_start: datetime
    value: float
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"bucket_start": self.bucket_start.isoformat(), "value": self.value}
        out.update(self.extra)
        return out


@dataclass
class IndicatorSeries:
    subject_id: str
    indicator: str
    points: list[IndicatorPoint]

    def to_dict(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "indicator": self.indicator,
            "points": [p.to_dict() for p in self.points],
        }


def _check_window(start: datetime, end: datetime) -> None:
    if end <= start:
        raise ValidationError("window", f"window [{start}, {end}) is empty")


def _require_learner(store: Store, learner_id: str) -> None:
    user = store.users.get(learner_id)
    if user is None or user.role != ROLE_LEARNER:
        raise UnknownLearnerError(learner_id)


def _learner_events(store: Store, learner_id: str, start: datetime, end: datetime) -> list[ActivityEvent]:
    return [
        e for e in store.activity_events() if e.learner_id == learner_id and start <= e.instant < end
    ]


def _bucket_starts(start: datetime, end: datetime, bucket: timedelta) -> list[datetime]:
    out = []
    cursor = start
    while cursor < end:
        out.append(cursor)
        cursor = cursor + bucket
    return out


def activity_pulse(
    store: Store,
    learner_id: str,
    start: datetime,
    end: datetime,
    bucket: timedelta = DAY,
) -> IndicatorSeries:
    """Events per bucket with a radius following a square-root law, scaled so
    the busiest bucket of the window has radius 1 (all-zero window: all 0)."""
    _check_window(start, end)
    _require_learner(store, learner_id)
    events = _learner_events(store, learner_id, start, end)
    starts = _bucket_starts(start, end, bucket)
    counts = [0] * len(starts)
    for event in events:
        index = int((event.instant - start) // bucket)
        counts[index] += 1
    max_count = max(counts, default=0)
    scale = 1.0 / math.sqrt(max_count) if max_count > 0 else 0.0
    points = [
        IndicatorPoint(bucket_start, scale * math.sqrt(count), {"count": count})
        for bucket_start, count in zip(starts, counts)
    ]
    return IndicatorSeries(learner_id, "activity_pulse", points)


def engagement_indicator(store: Store, learner_id: str, start: datetime, end: datetime) -> float:
    """Active-day ratio: day buckets (anchored at the window start) with at
    least one event, over all day buckets of the window."""
    _check_window(start, end)
    if end - start < DAY:
        raise ValidationError("window", "engagement needs a window of at least one day")
    _require_learner(store, learner_id)
    events = _learner_events(store, learner_id, start, end)
    total_days = math.ceil((end - start) / DAY)
    active = {int((e.instant - start) // DAY) for e in events}
    return len(active) / total_days


def effort_indicator(
    store: Store,
    learner_id: str,
    start: datetime,
    end: datetime,
    config: IndicatorConfig | None = None,
) -> float:
    """Time-on-task estimate in minutes: per-session sum of inter-event gaps,
    each capped. A gap above the session threshold opens a new session and
    contributes nothing, mirroring the miner's sessionization rule."""
    _check_window(start, end)
    _require_learner(store, learner_id)
    config = config or IndicatorConfig()
    events = _learner_events(store, learner_id, start, end)
    ordered = sorted(events, key=lambda e: (e.instant, e.statement_id))
    total = timedelta(0)
    for previous, current in zip(ordered, ordered[1:]):
        gap = current.instant - previous.instant
        if gap <= config.session_gap:
            total += min(gap, config.effort_gap_cap)
    return total.total_seconds() / 60.0


def skill_evolution(
    store: Store,
    subject_id: str,
    skill_id: str,
    start: datetime,
    end: datetime,
    bucket: timedelta = DAY,
    subject_kind: str = "learner",
) -> IndicatorSeries:
    """Per-bucket mean of skill scores; the class variant averages the
    per-learner bucket means over enrolled learners with data. Buckets
    without data are omitted, never interpolated."""
    _check_window(start, end)
    known = any(r.skill_id == skill_id for r in store.skill_results.values())
    if not known:
        raise UnknownSkillError(f"no results recorded for skill {skill_id!r}")
    if subject_kind == "learner":
        _require_learner(store, subject_id)
        learner_ids = [subject_id]
    elif subject_kind == "class":
        if subject_id not in store.classes:
            raise ValidationError("class_id", f"unknown class {subject_id!r}")
        learner_ids = sorted(
            e.user_id for e in store.enrollments.values()
            if e.class_id == subject_id and e.role == ROLE_LEARNER
        )
    else:
        raise ValidationError("subject_kind", f"unknown subject kind {subject_kind!r}")

    tz = start.tzinfo
    per_bucket: dict[datetime, dict[str, list[float]]] = {}
    for result in store.skill_results.values():
        if result.skill_id != skill_id or result.user_id not in learner_ids:
            continue
        instant = datetime(result.date.year, result.date.month, result.date.day, tzinfo=tz)
        if not start <= instant < end:
            continue
        bucket_start = start + ((instant - start) // bucket) * bucket
        per_bucket.setdefault(bucket_start, {}).setdefault(result.user_id, []).append(result.score)

    points = []
    for bucket_start in sorted(per_bucket):
        learner_means = [sum(v) / len(v) for _, v in sorted(per_bucket[bucket_start].items())]
        points.append(
            IndicatorPoint(
                bucket_start,
                sum(learner_means) / len(learner_means),
                {"learners_with_data": len(learner_means)},
            )
        )
    return IndicatorSeries(subject_id, f"skill_evolution:{skill_id}", points)
