from __future__ import annotations

import random
from datetime import timedelta

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metal_lrs.errors import LimitExceededError, UnknownResourceError
from metal_lrs.mining import (
    MinerParams,
    MultiSourcePattern,
    SequenceDB,
    attr,
    build_sequence_db,
    iid,
    mine_patterns,
    min_support_count,
    pattern_support,
)
from metal_lrs.store import Store

from conftest import REFERENCE_DATE, T0, activity_statement, seed_d1
from oracles import oracle_mine, oracle_supporters

D1_CONTEXT = frozenset({"age=14", "sex=M", "Mathematics-grade-9"})
D1_SEQUENCE = (iid("R-15"), iid("R-42"), attr("subject=Mathematics"))


def d1_db(d1_store: Store) -> SequenceDB:
    resources = {rid: r.attribute_labels() for rid, r in d1_store.resources.items()}
    return build_sequence_db(d1_store.activity_events(), resources)


def contexts_of(store: Store) -> dict[str, frozenset[str]]:
    return {lid: store.resolve_learner_context(lid, REFERENCE_DATE) for lid in store.learner_ids()}


class TestBuildSequenceDB:
    def test_empty(self):
        db = build_sequence_db([], {})
        assert db.sessions == {}

    def test_gap_splits_sessions(self, store: Store):
        seed_d1(store)
        store.insert_statements(
            [
                activity_statement("L1", "R-80", T0 + timedelta(hours=5)),
                activity_statement("L1", "R-80", T0 + timedelta(hours=5, minutes=10)),
                activity_statement("L1", "R-15", T0 + timedelta(hours=5, minutes=55)),
            ]
        )
        db = d1_db(store)
        # original 3-event session, then the 10-min pair, then the post-45-min-gap event
        assert db.sessions["L1"] == [["R-15", "R-42", "R-77"], ["R-80", "R-80"], ["R-15"]]

    def test_order_independent(self, d1_store: Store):
        events = d1_store.activity_events()
        resources = {rid: r.attribute_labels() for rid, r in d1_store.resources.items()}
        shuffled = list(events)
        random.Random(7).shuffle(shuffled)
        assert build_sequence_db(shuffled, resources).sessions == build_sequence_db(events, resources).sessions

    def test_unknown_resource_listed(self, d1_store: Store):
        events = d1_store.activity_events()
        with pytest.raises(UnknownResourceError) as err:
            build_sequence_db(events, {})
        assert set(err.value.resource_ids) == {e.resource_id for e in events}


class TestPatternSupport:
    def test_direct_count_empty_context(self, d1_store: Store):
        db = d1_db(d1_store)
        support, group = pattern_support((frozenset(), (iid("R-15"),)), db, contexts_of(d1_store))
        assert (support, group) == (2, 3)

    def test_attr_item_generalizes(self, d1_store: Store):
        db = d1_db(d1_store)
        contexts = contexts_of(d1_store)
        assert pattern_support((D1_CONTEXT, D1_SEQUENCE), db, contexts) == (2, 2)
        specialized = (iid("R-15"), iid("R-42"), iid("R-77"))
        assert pattern_support((D1_CONTEXT, specialized), db, contexts) == (1, 2)

    def test_unknown_context_attribute_empty_group(self, d1_store: Store):
        db = d1_db(d1_store)
        support, group = pattern_support(
            (frozenset({"age=99"}), (iid("R-15"),)), db, contexts_of(d1_store)
        )
        assert (support, group) == (0, 0)

    def test_matches_oracle(self, d1_store: Store):
        db = d1_db(d1_store)
        contexts = contexts_of(d1_store)
        raw_attrs = {rid: set(labels) for rid, labels in db.resource_attrs.items()}
        for context, sequence in [
            (frozenset(), (attr("subject=Mathematics"),)),
            (D1_CONTEXT, D1_SEQUENCE),
            (frozenset({"sex=M"}), (iid("R-15"), attr("subject=Mathematics"))),
        ]:
            supporters, group = oracle_supporters(
                context,
                tuple((i.kind, i.value) for i in sequence),
                db.sessions,
                raw_attrs,
                {k: set(v) for k, v in contexts.items()},
            )
            assert pattern_support((context, sequence), db, contexts) == (len(supporters), len(group))


class TestMinSupportCount:
    @pytest.mark.parametrize(
        "sigma,group,expected",
        [(1.0, 2, 2), (0.5, 5, 3), (0.75, 4, 3), (0.1, 10, 1), (0.34, 3, 2), (1.0, 1, 1)],
    )
    def test_threshold(self, sigma, group, expected):
        assert min_support_count(sigma, group) == expected


class TestMinePatterns:
    def test_d1_reproduces_published_pattern(self, d1_store: Store):
        db = d1_db(d1_store)
        params = MinerParams(min_group_size=2, min_support=1.0, max_sequence_length=3, max_context_size=3)
        patterns = mine_patterns(db, contexts_of(d1_store), params)
        keys = {(p.context, p.sequence): p for p in patterns}
        hit = keys.get((D1_CONTEXT, D1_SEQUENCE))
        assert hit is not None
        assert hit.support_count == 2 and hit.context_group_size == 2
        assert (D1_CONTEXT, (iid("R-15"), iid("R-42"), iid("R-77"))) not in keys

    def test_empty_db(self):
        assert mine_patterns(SequenceDB(), {}, MinerParams()) == []

    def test_single_learner_matches_oracle(self):
        db = SequenceDB(
            sessions={"L1": [["A"]]},
            resource_attrs={"A": frozenset({"subject=Art"}), "B": frozenset({"subject=Art"})},
        )
        contexts = {"L1": frozenset({"sex=F"})}
        params = MinerParams(min_group_size=1, min_support=1.0, max_sequence_length=2, max_context_size=1)
        got = [p.to_record() for p in mine_patterns(db, contexts, params)]
        expected = oracle_mine(
            db.sessions,
            {rid: set(v) for rid, v in db.resource_attrs.items()},
            {k: set(v) for k, v in contexts.items()},
            gamma=1,
            sigma=1.0,
            max_len=2,
            max_ctx=1,
        )
        assert got == expected

    def test_emitted_patterns_reverify_via_pattern_support(self, d1_store: Store):
        db = d1_db(d1_store)
        contexts = contexts_of(d1_store)
        params = MinerParams(min_group_size=1, min_support=0.5, max_sequence_length=3, max_context_size=2)
        for pattern in mine_patterns(db, contexts, params):
            assert pattern_support(pattern, db, contexts) == (
                pattern.support_count,
                pattern.context_group_size,
            )

    def test_canonical_order_and_determinism(self, d1_store: Store):
        db = d1_db(d1_store)
        contexts = contexts_of(d1_store)
        params = MinerParams(min_group_size=1, min_support=0.5, max_sequence_length=2, max_context_size=2)
        first = [p.to_json() for p in mine_patterns(db, contexts, params)]
        second = [p.to_json() for p in mine_patterns(db, contexts, params)]
        assert first == second
        assert first == sorted(
            first,
            key=lambda line: MultiSourcePattern.from_record(__import__("json").loads(line)).canonical_key(),
        )

    def test_candidate_cap(self, d1_store: Store):
        db = d1_db(d1_store)
        params = MinerParams(min_group_size=1, min_support=0.5, candidate_cap=3)
        with pytest.raises(LimitExceededError):
            mine_patterns(db, contexts_of(d1_store), params)

    def test_id_before_attr_at_equal_text(self):
        # a resource id that doubles as an attribute label carried by two
        # other resources; neither concrete id ties the attr supporters
        db = SequenceDB(
            sessions={"L1": [["X", "Y"]], "L2": [["X", "Z"]]},
            resource_attrs={"X": frozenset(), "Y": frozenset({"X"}), "Z": frozenset({"X"})},
        )
        params = MinerParams(min_group_size=1, min_support=1.0, max_sequence_length=1, max_context_size=0)
        patterns = mine_patterns(db, {}, params)
        tokens = [p.sequence[0].token() for p in patterns]
        assert tokens.index("id:X") < tokens.index("attr:X")


def random_instance(rng: random.Random):
    n_learners = rng.randint(1, 8)
    n_resources = rng.randint(1, 6)
    resource_ids = [f"R{i}" for i in range(n_resources)]
    attr_values = [f"subject=S{i}" for i in range(rng.randint(1, 2))] + ["resource-type=quiz"]
    resource_attrs = {
        rid: set(rng.sample(attr_values, rng.randint(0, min(2, len(attr_values))))) for rid in resource_ids
    }
    labels = ["age=14", "age=15", "sex=M", "sex=F"][: rng.randint(1, 4)]
    contexts = {
        f"L{i}": set(rng.sample(labels, rng.randint(0, len(labels)))) for i in range(n_learners)
    }
    sessions: dict[str, list[list[str]]] = {f"L{i}": [] for i in range(n_learners)}
    for _ in range(rng.randint(0, 12)):
        learner = f"L{rng.randrange(n_learners)}"
        if not sessions[learner] or rng.random() < 0.3:
            sessions[learner].append([])
        sessions[learner][-1].append(rng.choice(resource_ids))
    sessions = {l: [s for s in ss if s] for l, ss in sessions.items()}
    params = MinerParams(
        min_group_size=rng.choice([1, 2, 3]),
        min_support=rng.choice([0.5, 0.75, 1.0]),
        max_sequence_length=rng.randint(1, 3),
        max_context_size=rng.randint(0, 3),
    )
    return sessions, resource_attrs, contexts, params


def assert_matches_oracle(sessions, resource_attrs, contexts, params):
    db = SequenceDB(
        sessions={k: [list(s) for s in v] for k, v in sessions.items()},
        resource_attrs={rid: frozenset(v) for rid, v in resource_attrs.items()},
    )
    got = [p.to_record() for p in mine_patterns(db, {k: frozenset(v) for k, v in contexts.items()}, params)]
    expected = oracle_mine(
        sessions,
        resource_attrs,
        contexts,
        gamma=params.min_group_size,
        sigma=params.min_support,
        max_len=params.max_sequence_length,
        max_ctx=params.max_context_size,
    )
    assert got == expected


class TestOracleEquivalence:
    def test_fifty_random_instances(self):
        rng = random.Random(20181101)
        for _ in range(50):
            assert_matches_oracle(*random_instance(rng))


class TestAntiMonotonicity:
    @settings(max_examples=60, deadline=None)
    @given(data=st.data())
    def test_extension_never_gains_support(self, data):
        rng = random.Random(data.draw(st.integers(0, 2**32 - 1)))
        sessions, resource_attrs, contexts, _ = random_instance(rng)
        db = SequenceDB(
            sessions=sessions,
            resource_attrs={rid: frozenset(v) for rid, v in resource_attrs.items()},
        )
        ctx_map = {k: frozenset(v) for k, v in contexts.items()}
        alphabet = [iid(r) for r in resource_attrs] + [
            attr(a) for a in sorted({a for v in resource_attrs.values() for a in v})
        ]
        if not alphabet:
            return
        labels = sorted({l for v in contexts.values() for l in v})
        base_seq = tuple(data.draw(st.lists(st.sampled_from(alphabet), min_size=1, max_size=2)))
        base_ctx = frozenset(data.draw(st.lists(st.sampled_from(labels or ["x=y"]), max_size=2)))
        base_support, _ = pattern_support((base_ctx, base_seq), db, ctx_map)
        extended_seq = base_seq + (data.draw(st.sampled_from(alphabet)),)
        ext_support, _ = pattern_support((base_ctx, extended_seq), db, ctx_map)
        assert ext_support <= base_support
        if labels:
            larger_ctx = base_ctx | {data.draw(st.sampled_from(labels))}
            grown_support, _ = pattern_support((larger_ctx, base_seq), db, ctx_map)
            assert grown_support <= base_support
