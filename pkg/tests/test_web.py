from __future__ import annotations

import threading
from datetime import timedelta

import pytest
from fastapi.testclient import TestClient

from metal_lrs.config import RunConfig
from metal_lrs.store import Store
from metal_lrs.web import create_app

from conftest import REFERENCE_DATE, T0, activity_statement, seed_d1
from oracles import oracle_filter_statements
from test_roster import FULL_BUNDLE

U1 = "11111111-2222-3333-4444-555555555555"


@pytest.fixture
def client():
    store = Store()
    app = create_app(store, RunConfig(reference_date=REFERENCE_DATE))
    with TestClient(app) as c:
        c.app_store = store
        yield c


def statement_body(obj: str = "res:R-15", agent: str = "l1@ex.org") -> dict:
    return {
        "actor": {"mbox": f"mailto:{agent}"},
        "verb": {"id": "http://adlnet.gov/expapi/verbs/experienced"},
        "object": {"objectType": "Activity", "id": obj},
    }


class TestStatementsWrite:
    def test_batch_preserves_order(self, client):
        batch = [statement_body(obj=f"res:R-{i}") for i in range(3)]
        response = client.post("/xapi/statements", json=batch)
        assert response.status_code == 200
        ids = response.json()
        assert len(ids) == 3
        for sid, body in zip(ids, batch):
            fetched = client.get("/xapi/statements", params={"statementId": sid}).json()
            assert fetched["object"]["id"] == body["object"]["id"]

    def test_poisoned_batch_stores_nothing(self, client):
        bad = statement_body()
        del bad["verb"]
        batch = [statement_body(), bad, statement_body()]
        response = client.post("/xapi/statements", json=batch)
        assert response.status_code == 400
        assert response.json()["error"]["index"] == 1
        assert response.json()["error"]["field"] == "verb"
        assert client.app_store.statement_count == 0

    def test_put_with_matching_body_id(self, client):
        body = statement_body()
        body["id"] = U1
        response = client.put("/xapi/statements", params={"statementId": U1}, json=body)
        assert response.status_code == 204
        assert client.get("/xapi/statements", params={"statementId": U1}).json()["id"] == U1

    def test_put_mismatched_id_rejected(self, client):
        body = statement_body()
        body["id"] = U1
        other = U1.replace("1", "9", 1)
        response = client.put("/xapi/statements", params={"statementId": other}, json=body)
        assert response.status_code == 400

    def test_conflict_is_409(self, client):
        body = statement_body()
        body["id"] = U1
        assert client.post("/xapi/statements", json=body).status_code == 200
        different = statement_body(obj="res:R-99")
        different["id"] = U1
        response = client.post("/xapi/statements", json=different)
        assert response.status_code == 409
        assert response.json()["error"]["code"] == "CONFLICT"

    def test_oversized_batch_413(self, client):
        batch = [statement_body(obj=f"res:R-{i}") for i in range(501)]
        assert client.post("/xapi/statements", json=batch).status_code == 413


class TestStatementsRead:
    def test_by_id_single_body(self, client):
        body = statement_body()
        body["id"] = U1
        client.post("/xapi/statements", json=body)
        fetched = client.get("/xapi/statements", params={"statementId": U1}).json()
        assert fetched["id"] == U1
        assert "statements" not in fetched

    def test_statement_id_exclusive_with_filters(self, client):
        response = client.get(
            "/xapi/statements", params={"statementId": U1, "verb": "v:x"}
        )
        assert response.status_code == 400

    def test_filters_match_bruteforce(self, client):
        for i in range(12):
            client.post(
                "/xapi/statements",
                json=statement_body(obj=f"res:R-{i % 3}", agent=f"a{i % 2}@ex.org"),
            )
        everything = client.get("/xapi/statements", params={"limit": 100}).json()["statements"]
        got = client.get(
            "/xapi/statements",
            params={"agent": '{"mbox": "mailto:a0@ex.org"}', "activity": "res:R-0", "limit": 100},
        ).json()["statements"]
        expected = oracle_filter_statements(
            everything,
            agent_idents={("mbox", "mailto:a0@ex.org")},
            activity="res:R-0",
        )
        assert got == expected

    def test_more_token_roundtrip(self, client):
        for i in range(5):
            client.post("/xapi/statements", json=statement_body(obj=f"res:R-{i}"))
        seen = []
        params = {"limit": 2}
        while True:
            page = client.get("/xapi/statements", params=params).json()
            seen += [s["id"] for s in page["statements"]]
            if "more" not in page:
                break
            params = {"limit": 2, "cursor": page["more"]}
        assert len(seen) == len(set(seen)) == 5

    def test_wire_identity_modulo_server_fields(self, client):
        body = statement_body()
        body["id"] = U1
        body["timestamp"] = "2018-11-01T10:00:00+00:00"
        body["context"] = {"extensions": {"ext:k": "v"}}
        client.post("/xapi/statements", json=body)
        fetched = client.get("/xapi/statements", params={"statementId": U1}).json()
        stored = fetched.pop("stored")
        assert stored
        assert fetched == body

    def test_malformed_since_400(self, client):
        assert (
            client.get("/xapi/statements", params={"since": "not-a-time"}).status_code == 400
        )


class TestRosterRoutes:
    def test_import_export_cycle(self, client):
        from metal_lrs.roster import write_bundle_archive

        blob = write_bundle_archive(FULL_BUNDLE)
        response = client.post(
            "/roster/import", content=blob, headers={"content-type": "application/zip"}
        )
        assert response.status_code == 200
        assert response.json()["status"] == "committed"

        listing = client.get("/roster/users", params={"limit": 10}).json()
        assert [r["id"] for r in listing["records"]] == ["L1", "L2", "L3"]

        filtered = client.get("/roster/enrollments", params={"role": "learner"}).json()
        assert len(filtered["records"]) == 3

        export = client.post("/roster/export", json={"salt": "s3cret"})
        assert export.status_code == 200
        assert export.headers["content-type"] == "application/zip"

    def test_rejected_import_is_422(self, client):
        from metal_lrs.roster import write_bundle_archive

        blob = write_bundle_archive(
            {"enrollments": "user_id,class_id,role\nU9,C9,learner\n"}
        )
        response = client.post("/roster/import", content=blob)
        assert response.status_code == 422
        assert response.json()["status"] == "rejected"

    def test_unknown_entity_404(self, client):
        assert client.get("/roster/gadgets").status_code == 404

    def test_unknown_filter_400(self, client):
        assert client.get("/roster/users", params={"shoe_size": "42"}).status_code == 400


class TestIndicatorRoutes:
    def test_learner_series(self, client):
        seed_d1(client.app_store)
        response = client.get(
            "/indicators/learners/L1",
            params={
                "from": "2018-11-01T00:00:00+00:00",
                "to": "2018-11-03T00:00:00+00:00",
                "bucket": "1d",
            },
        )
        assert response.status_code == 200
        body = response.json()
        assert body["pulse"]["points"][0]["count"] == 3
        assert body["engagement"] == 0.5
        assert body["effort_minutes"] == 10.0

    def test_class_series(self, client):
        from conftest import seed_class_fixture

        seed_class_fixture(client.app_store)
        response = client.get(
            "/indicators/classes/C1",
            params={
                "from": "2018-11-01T00:00:00+00:00",
                "to": "2018-11-08T00:00:00+00:00",
                "skill": "SK-frac",
            },
        )
        assert response.status_code == 200
        body = response.json()
        assert [l["learner_id"] for l in body["learners"]] == ["L1", "L2"]
        assert body["skill_evolution"]["points"][0]["value"] == pytest.approx(0.6)

    def test_unknown_learner_404(self, client):
        response = client.get(
            "/indicators/learners/ghost",
            params={"from": "2018-11-01T00:00:00+00:00", "to": "2018-11-02T00:00:00+00:00"},
        )
        assert response.status_code == 404


class TestRecommendationRoutes:
    def seed_pipeline(self, client) -> str:
        store: Store = client.app_store
        seed_d1(store)
        from datetime import date

        from metal_lrs.models import CurriculumRecord, LearnerRecord, UserRecord

        store.apply_bundle(
            [
                UserRecord("L4", "learner", email="l4@ex.org"),
                LearnerRecord("L4", date(2004, 2, 2), "M"),
                CurriculumRecord("L4", "2018-2019", ("Mathematics-grade-9",)),
            ]
        )
        store.insert_statements(
            [
                activity_statement("L4", "R-15", T0),
                activity_statement("L4", "R-42", T0 + timedelta(minutes=5)),
            ]
        )
        # L4's own pending antecedent lowers the rule confidence to 2/3
        response = client.post(
            "/recommendations/propose",
            json={"learner_id": "L4", "min_confidence": 0.6, "lookback_days": 36500},
        )
        assert response.status_code == 200
        created = response.json()["created"]
        assert created, "pipeline should propose at least one recommendation"
        return created[0]["id"]

    def test_propose_review_deliver_cycle(self, client):
        rec_id = self.seed_pipeline(client)
        queue = client.get("/recommendations", params={"learner": "L4", "state": "proposed"}).json()
        assert [r["id"] for r in queue["recommendations"]] == [rec_id]

        approve = client.post(
            f"/recommendations/{rec_id}/decision",
            json={"decision": "approve", "rating": 5, "note": "solid"},
        )
        assert approve.status_code == 200
        assert approve.json()["state"] == "approved"

        deliver = client.post(f"/recommendations/{rec_id}/decision", json={"decision": "deliver"})
        assert deliver.status_code == 200

        visible = client.get("/learners/L4/delivered").json()["recommendations"]
        assert [r["id"] for r in visible] == [rec_id]

    def test_rejected_never_delivered(self, client):
        rec_id = self.seed_pipeline(client)
        assert (
            client.post(f"/recommendations/{rec_id}/decision", json={"decision": "reject"}).status_code
            == 200
        )
        conflict = client.post(f"/recommendations/{rec_id}/decision", json={"decision": "deliver"})
        assert conflict.status_code == 409
        assert conflict.json()["error"]["code"] == "ILLEGAL_TRANSITION"
        assert client.get("/learners/L4/delivered").json()["recommendations"] == []

    def test_concurrent_reviews_one_winner(self, client):
        rec_id = self.seed_pipeline(client)
        results = []

        def act(decision: str):
            response = client.post(
                f"/recommendations/{rec_id}/decision", json={"decision": decision}
            )
            results.append(response.status_code)

        threads = [threading.Thread(target=act, args=(d,)) for d in ("approve", "reject")]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(results) == [200, 409]

    def test_unknown_recommendation_404(self, client):
        assert (
            client.post("/recommendations/missing/decision", json={"decision": "approve"}).status_code
            == 404
        )


class TestAuth:
    def test_token_required_when_configured(self):
        store = Store()
        app = create_app(store, RunConfig(auth_token="hunter2", reference_date=REFERENCE_DATE))
        with TestClient(app) as client:
            assert client.get("/xapi/statements").status_code == 401
            ok = client.get(
                "/xapi/statements", headers={"Authorization": "Bearer hunter2"}
            )
            assert ok.status_code == 200
            assert client.get("/health").status_code == 200

    def test_open_when_unconfigured(self, client):
        assert client.get("/xapi/statements").status_code == 200
