"""End-to-end walkthrough on synthetic data: roster + statements in, mined
patterns, derived rules, a teacher-reviewed recommendation and indicator
series out.

Run: python3 scripts/demo_pipeline.py [store_dir]
"""

from __future__ import annotations

import json
import random
import sys
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from metal_lrs.indicators import activity_pulse, effort_indicator, engagement_indicator
from metal_lrs.mining import MinerParams, build_sequence_db, mine_patterns
from metal_lrs.models import CurriculumRecord, LearnerRecord, ResourceRecord, UserRecord
from metal_lrs.recommend import derive_rules, propose_recommendations, review_recommendation
from metal_lrs.store import Store

REFERENCE = date(2019, 3, 1)
START = datetime(2019, 2, 1, 9, 0, tzinfo=timezone.utc)

SUBJECTS = ["Mathematics", "History"]


def build_roster(store: Store, rng: random.Random, learners: int = 12) -> None:
    records = []
    for i in range(learners):
        lid = f"L{i:02d}"
        records.append(UserRecord(lid, "learner", email=f"{lid.lower()}@school.example"))
        born = date(2004 + rng.randint(0, 1), rng.randint(1, 12), rng.randint(1, 28))
        records.append(LearnerRecord(lid, born, rng.choice("MF")))
        subject = SUBJECTS[i % 2]
        records.append(CurriculumRecord(lid, "2018-2019", (f"{subject}-grade-9",)))
    for r in range(8):
        subject = SUBJECTS[r % 2]
        records.append(ResourceRecord(f"R-{r:02d}", f"{subject} activity {r}", {"subject": subject}))
    store.apply_bundle(records)


def simulate_activity(store: Store, rng: random.Random) -> None:
    batch = []
    for i, lid in enumerate(store.learner_ids()):
        subject_resources = [f"R-{r:02d}" for r in range(8) if r % 2 == i % 2]
        t = START + timedelta(days=rng.randint(0, 6), minutes=rng.randint(0, 300))
        # a common habit: the first two resources of the track, then one more
        for rid in subject_resources[:2] + [rng.choice(subject_resources)]:
            batch.append(
                {
                    "actor": {"account": {"homePage": "https://vle.example", "name": lid}},
                    "verb": {"id": "http://adlnet.gov/expapi/verbs/experienced"},
                    "object": {"objectType": "Activity", "id": f"res:{rid}"},
                    "timestamp": t.isoformat(),
                }
            )
            t += timedelta(minutes=rng.randint(2, 12))
    store.insert_statements(batch)


def main() -> None:
    store = Store(sys.argv[1] if len(sys.argv) > 1 else None)
    rng = random.Random(2019)
    build_roster(store, rng)
    simulate_activity(store, rng)

    resources = {rid: r.attribute_labels() for rid, r in store.resources.items()}
    db = build_sequence_db(store.activity_events(), resources)
    contexts = {lid: store.resolve_learner_context(lid, REFERENCE) for lid in store.learner_ids()}

    params = MinerParams(min_group_size=3, min_support=0.6, max_sequence_length=3, max_context_size=2)
    patterns = mine_patterns(db, contexts, params)
    print(f"# {len(patterns)} patterns")
    for pattern in patterns[:10]:
        print(pattern.to_json())

    rules = derive_rules(patterns, db, contexts, min_confidence=0.6)
    print(f"\n# {len(rules)} rules (showing 5)")
    for rule in rules[:5]:
        print(json.dumps(rule.to_dict()))

    learner = store.learner_ids()[0]
    proposals = propose_recommendations(
        store, learner, rules, timedelta(days=60), REFERENCE, now=START + timedelta(days=10)
    )
    print(f"\n# {len(proposals)} proposals for {learner}")
    if proposals:
        reviewed = review_recommendation(store, proposals[0].id, "approve", rating=4, note="fits the unit")
        delivered = review_recommendation(store, reviewed.id, "deliver")
        print(f"teacher gate: {delivered.id} -> {delivered.state}")

    window = (START, START + timedelta(days=7))
    pulse = activity_pulse(store, learner, *window)
    print(f"\n# indicators for {learner}")
    print(json.dumps({
        "pulse_counts": [p.extra["count"] for p in pulse.points],
        "pulse_radii": [round(p.value, 3) for p in pulse.points],
        "engagement": engagement_indicator(store, learner, *window),
        "effort_minutes": effort_indicator(store, learner, *window),
    }))


if __name__ == "__main__":
    main()
