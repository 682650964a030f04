"""HTTP surface: statement endpoint, roster exchange, indicators, recommendations.

Handlers are stateless over the shared store; atomicity guarantees come from
the store itself. Instants on the wire are ISO 8601 with an explicit offset,
statement ids are UUIDs (case-insensitive in, lowercase out).
"""

from __future__ import annotations

from datetime import datetime, timedelta

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from . import statements as stmt
from .config import RunConfig
from .errors import (
    BadFilterError,
    MetalError,
    ValidationError,
)
from .indicators import (
    activity_pulse,
    effort_indicator,
    engagement_indicator,
    skill_evolution,
)
from .mining import build_sequence_db, mine_patterns
from .models import ROLE_LEARNER
from .recommend import (
    delivered_recommendations,
    derive_rules,
    list_recommendations,
    propose_recommendations,
    review_recommendation,
)
from .roster import (
    export_pseudonymized,
    import_csv_bundle,
    list_entities,
    read_bundle_archive,
    write_bundle_archive,
)
from .store import StatementFilter, Store

MAX_BATCH = 500

_STATUS_OF = {
    "VALIDATION": 400,
    "BAD_FILTER": 400,
    "CONFLICT": 409,
    "ILLEGAL_TRANSITION": 409,
    "DUPLICATE": 409,
    "DANGLING_REFERENCE": 422,
    "LIMIT_EXCEEDED": 422,
    "UNKNOWN_LEARNER": 404,
    "UNKNOWN_RECOMMENDATION": 404,
    "UNKNOWN_ENTITY_TYPE": 404,
    "UNKNOWN_SKILL": 404,
    "UNKNOWN_RESOURCE": 422,
}


def _instant_param(value: str | None, name: str) -> datetime | None:
    if value is None:
        return None
    try:
        return stmt.parse_instant(value, name)
    except ValidationError as exc:
        raise BadFilterError(str(exc)) from exc


def _bucket_param(value: str | None) -> timedelta:
    if value is None:
        return timedelta(days=1)
    text = value.strip().lower()
    units = {"d": timedelta(days=1), "h": timedelta(hours=1), "m": timedelta(minutes=1)}
    if text and text[-1] in units and text[:-1].isdigit() and int(text[:-1]) > 0:
        return int(text[:-1]) * units[text[-1]]
    raise BadFilterError(f"bucket must look like 1d, 12h or 30m; got {value!r}")


def create_app(store: Store, config: RunConfig | None = None) -> FastAPI:
    config = config or RunConfig()
    app = FastAPI(title="metal-lrs", docs_url=None, redoc_url=None)
    app.state.store = store
    app.state.config = config

    @app.exception_handler(MetalError)
    async def metal_error_handler(_: Request, exc: MetalError):
        status = _STATUS_OF.get(exc.code, 400)
        return JSONResponse({"error": exc.payload()}, status_code=status)

    @app.middleware("http")
    async def bearer_auth(request: Request, call_next):
        token = app.state.config.auth_token
        if token and request.url.path != "/health":
            header = request.headers.get("authorization", "")
            if header != f"Bearer {token}":
                return JSONResponse(
                    {"error": {"code": "UNAUTHORIZED", "message": "bad or missing bearer token"}},
                    status_code=401,
                )
        return await call_next(request)

    @app.get("/health")
    async def health():
        return {"status": "ok", "statements": store.statement_count}

    # ------------------------------------------------------------------ xAPI

    @app.put("/xapi/statements")
    async def put_statement(request: Request, statementId: str | None = None):
        if statementId is None:
            raise ValidationError("statementId", "PUT requires the statementId parameter")
        body = await request.json()
        store.insert_statement(body, provided_id=statementId)
        return Response(status_code=204)

    @app.post("/xapi/statements")
    async def post_statements(request: Request):
        body = await request.json()
        batch = body if isinstance(body, list) else [body]
        if len(batch) > MAX_BATCH:
            return JSONResponse(
                {"error": {"code": "BATCH_TOO_LARGE", "message": f"batch of {len(batch)} exceeds {MAX_BATCH}"}},
                status_code=413,
            )
        ids = store.insert_statements(batch)
        return ids

    @app.get("/xapi/statements")
    async def get_statements(
        statementId: str | None = None,
        agent: str | None = None,
        verb: str | None = None,
        activity: str | None = None,
        since: str | None = None,
        until: str | None = None,
        limit: int = 50,
        cursor: str | None = None,
    ):
        if statementId is not None:
            others = [agent, verb, activity, since, until, cursor]
            if any(v is not None for v in others):
                raise ValidationError("statementId", "statementId cannot be combined with other filters")
            found = store.get_statement(statementId)
            if found is None:
                return JSONResponse(
                    {"error": {"code": "NOT_FOUND", "message": f"no statement {statementId}"}},
                    status_code=404,
                )
            return found
        filt = StatementFilter(
            agent=stmt.parse_agent_filter(agent) if agent else None,
            verb=verb,
            activity=activity,
            since=_instant_param(since, "since"),
            until=_instant_param(until, "until"),
            limit=limit,
            cursor=cursor,
        )
        page = store.query_statements(filt)
        out = {"statements": page.statements}
        if page.more:
            out["more"] = page.more
        return out

    # ---------------------------------------------------------------- roster

    @app.post("/roster/import")
    async def roster_import(request: Request):
        blob = await request.body()
        files = read_bundle_archive(blob)
        report = import_csv_bundle(store, files)
        status = 200 if report.status == "committed" else 422
        return JSONResponse(report.to_dict(), status_code=status)

    @app.post("/roster/export")
    async def roster_export(request: Request):
        body = await request.json()
        salt = body.get("salt", "")
        entity_types = tuple(body.get("entity_types") or ())
        if entity_types:
            files = export_pseudonymized(store, salt, entity_types)
        else:
            files = export_pseudonymized(store, salt)
        return Response(
            content=write_bundle_archive(files),
            media_type="application/zip",
            headers={"content-disposition": "attachment; filename=roster-export.zip"},
        )

    @app.get("/roster/{entity_type}")
    async def roster_read(entity_type: str, request: Request, limit: int = 100, cursor: str | None = None):
        filters = {
            k: v for k, v in request.query_params.items() if k not in ("limit", "cursor")
        }
        records, more = list_entities(store, entity_type, filters=filters, limit=limit, cursor=cursor)
        out = {"records": records}
        if more:
            out["more"] = more
        return out

    # ------------------------------------------------------------ indicators

    def _window(from_: str | None, to: str | None) -> tuple[datetime, datetime]:
        start = _instant_param(from_, "from")
        end = _instant_param(to, "to")
        if start is None or end is None:
            raise BadFilterError("from and to are required ISO instants")
        return start, end

    @app.get("/indicators/learners/{learner_id}")
    async def learner_indicators(
        learner_id: str,
        request: Request,
        bucket: str | None = None,
        skill: str | None = None,
    ):
        start, end = _window(request.query_params.get("from"), request.query_params.get("to"))
        bucket_size = _bucket_param(bucket)
        pulse = activity_pulse(store, learner_id, start, end, bucket_size)
        out = {
            "learner_id": learner_id,
            "window": {"from": start.isoformat(), "to": end.isoformat()},
            "pulse": pulse.to_dict(),
            "effort_minutes": effort_indicator(store, learner_id, start, end),
        }
        if end - start >= timedelta(days=1):
            out["engagement"] = engagement_indicator(store, learner_id, start, end)
        if skill:
            out["skill_evolution"] = skill_evolution(
                store, learner_id, skill, start, end, bucket_size
            ).to_dict()
        return out

    @app.get("/indicators/classes/{class_id}")
    async def class_indicators(
        class_id: str,
        request: Request,
        bucket: str | None = None,
        skill: str | None = None,
    ):
        start, end = _window(request.query_params.get("from"), request.query_params.get("to"))
        bucket_size = _bucket_param(bucket)
        if class_id not in store.classes:
            return JSONResponse(
                {"error": {"code": "UNKNOWN_CLASS", "message": f"no class {class_id!r}"}},
                status_code=404,
            )
        learner_ids = sorted(
            e.user_id
            for e in store.enrollments.values()
            if e.class_id == class_id and e.role == ROLE_LEARNER
        )
        learners = []
        for lid in learner_ids:
            entry = {
                "learner_id": lid,
                "pulse": activity_pulse(store, lid, start, end, bucket_size).to_dict(),
            }
            if end - start >= timedelta(days=1):
                entry["engagement"] = engagement_indicator(store, lid, start, end)
            learners.append(entry)
        out = {
            "class_id": class_id,
            "window": {"from": start.isoformat(), "to": end.isoformat()},
            "learners": learners,
        }
        if skill:
            out["skill_evolution"] = skill_evolution(
                store, class_id, skill, start, end, bucket_size, subject_kind="class"
            ).to_dict()
        return out

    # -------------------------------------------------------- recommendations

    @app.get("/recommendations")
    async def get_recommendations(learner: str | None = None, state: str | None = None):
        return {"recommendations": [r.to_dict() for r in list_recommendations(store, learner, state)]}

    @app.post("/recommendations/propose")
    async def propose(request: Request):
        body = await request.json()
        learner_id = body.get("learner_id")
        if not learner_id:
            raise ValidationError("learner_id", "missing required field")
        cfg: RunConfig = app.state.config
        min_confidence = float(body.get("min_confidence", cfg.min_confidence))
        lookback = timedelta(days=int(body.get("lookback_days", cfg.lookback_days)))
        resources = {rid: r.attribute_labels() for rid, r in store.resources.items()}
        db = build_sequence_db(store.activity_events(), resources, cfg.session_gap())
        contexts = {
            lid: store.resolve_learner_context(lid, cfg.reference_date)
            for lid in store.learner_ids()
        }
        patterns = mine_patterns(db, contexts, cfg.miner_params())
        rules = derive_rules(patterns, db, contexts, min_confidence)
        created = propose_recommendations(
            store, learner_id, rules, lookback, cfg.reference_date, session_gap=cfg.session_gap()
        )
        return {"created": [r.to_dict() for r in created]}

    @app.post("/recommendations/{recommendation_id}/decision")
    async def decide(recommendation_id: str, request: Request):
        body = await request.json()
        decision = body.get("decision")
        if not decision:
            raise ValidationError("decision", "missing required field")
        updated = review_recommendation(
            store,
            recommendation_id,
            decision,
            rating=body.get("rating"),
            note=body.get("note"),
            new_consequent=body.get("consequent"),
        )
        return updated.to_dict()

    @app.get("/learners/{learner_id}/delivered")
    async def learner_delivered(learner_id: str):
        return {"recommendations": [r.to_dict() for r in delivered_recommendations(store, learner_id)]}

    return app
