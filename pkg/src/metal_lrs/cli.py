"""Single executable for the whole pipeline: serve, import, mine, report, export.

Machine-readable results go to stdout, structured logs to stderr. Exit codes:
0 success, 1 domain error (the module error is printed verbatim as JSON),
2 usage error. Flags beat METAL_* environment variables, which beat the
JSON config file passed via --config.
"""

from __future__ import annotations

import json
import logging
import sys
from datetime import date
from pathlib import Path

import click

from .config import RunConfig, load_config_file
from .errors import MetalError
from .gaze import feature_report, parse_fixation_log
from .indicators import activity_pulse, effort_indicator, engagement_indicator, skill_evolution
from .mining import build_sequence_db, mine_patterns
from .recommend import derive_rules
from .roster import (
    export_pseudonymized,
    import_csv_bundle,
    read_bundle_archive,
    write_bundle_archive,
)
from .statements import parse_instant
from .store import Store

logger = logging.getLogger("metal")


class _JsonLogFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        return json.dumps(
            {"level": record.levelname.lower(), "logger": record.name, "message": record.getMessage()}
        )


def _setup_logging() -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_JsonLogFormatter())
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(logging.INFO)


def _emit(payload: object) -> None:
    click.echo(json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False))


def _fail(error: MetalError) -> None:
    logger.error("command failed: %s", error)
    _emit({"error": error.payload()})
    sys.exit(1)


def _apply_config_file(ctx: click.Context, _param: click.Parameter, value: str | None):
    if value:
        data = load_config_file(value)
        defaults = dict(data)
        for command in ("serve", "import-roster", "import-statements", "mine", "indicators", "gaze", "export"):
            defaults.setdefault(command, {}).update(data)
        ctx.default_map = defaults
    return value


def _open_store(ctx: click.Context) -> Store:
    return Store(ctx.obj["store_path"])


def _run_config(ctx: click.Context, **overrides) -> RunConfig:
    merged = {**ctx.obj["config_fields"], **{k: v for k, v in overrides.items() if v is not None}}
    return RunConfig(**merged)


@click.group(context_settings={"auto_envvar_prefix": "METAL"})
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    is_eager=True,
    callback=_apply_config_file,
    help="JSON config file; flags and METAL_* variables override it.",
)
@click.option("--store", "store_path", type=click.Path(file_okay=False), default=None, help="Store directory (omit for in-memory).")
@click.option("--reference-date", default=None, help="Reference date for learner ages (ISO date, default today).")
@click.pass_context
def main(ctx: click.Context, config_path: str | None, store_path: str | None, reference_date: str | None):
    """Learning record store, pattern miner and analytics toolbox."""
    _setup_logging()
    ctx.ensure_object(dict)
    ctx.obj["store_path"] = store_path
    fields: dict = {"store_path": store_path}
    if reference_date:
        fields["reference_date"] = date.fromisoformat(reference_date)
    ctx.obj["config_fields"] = fields


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8771, show_default=True, type=int)
@click.option("--auth-token", default=None, help="Static bearer token; unset leaves the API open.")
@click.option("--min-group-size", type=int, default=None)
@click.option("--min-support", type=float, default=None)
@click.option("--max-sequence-length", type=int, default=None)
@click.option("--max-context-size", type=int, default=None)
@click.option("--session-gap-minutes", type=float, default=None)
@click.option("--min-confidence", type=float, default=None)
@click.option("--lookback-days", type=int, default=None)
@click.pass_context
def serve(ctx, host, port, auth_token, **miner):
    """Run the HTTP services over one store."""
    import uvicorn

    from .web import create_app

    try:
        config = _run_config(ctx, host=host, port=port, auth_token=auth_token, **miner)
        store = _open_store(ctx)
    except MetalError as exc:
        _fail(exc)
    logger.info("serving on %s:%s (store=%s)", host, port, ctx.obj["store_path"] or "memory")
    uvicorn.run(create_app(store, config), host=host, port=port, log_config=None)


@main.command("import-statements")
@click.argument("source", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def import_statements(ctx, source):
    """Insert a JSON array or JSONL file of statements as one atomic batch."""
    text = Path(source).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("["):
        batch = json.loads(text)
    else:
        batch = [json.loads(line) for line in text.splitlines() if line.strip()]
    store = _open_store(ctx)
    try:
        ids = store.insert_statements(batch)
    except MetalError as exc:
        _fail(exc)
    logger.info("stored %d statements", len(ids))
    _emit({"stored": ids})


@main.command("import-roster")
@click.argument("source", type=click.Path(exists=True))
@click.pass_context
def import_roster(ctx, source):
    """Import a roster bundle from a directory of CSV files or a zip archive."""
    path = Path(source)
    if path.is_dir():
        files = {p.name: p.read_text(encoding="utf-8") for p in sorted(path.glob("*.csv"))}
    else:
        files = read_bundle_archive(path.read_bytes())
    store = _open_store(ctx)
    try:
        report = import_csv_bundle(store, files)
    except MetalError as exc:
        _fail(exc)
    _emit(report.to_dict())
    if report.status != "committed":
        logger.error("bundle rejected with %d errors", report.error_count)
        sys.exit(1)
    logger.info("bundle committed")


@main.command()
@click.option("--bundle", "bundle_path", type=click.Path(exists=True), default=None,
              help="Mine a pseudonymized export bundle (zip or directory) instead of the store.")
@click.option("--min-group-size", type=int, default=None)
@click.option("--min-support", type=float, default=None)
@click.option("--max-sequence-length", type=int, default=None)
@click.option("--max-context-size", type=int, default=None)
@click.option("--session-gap-minutes", type=float, default=None)
@click.option("--candidate-cap", type=int, default=None)
@click.option("--seed", type=int, default=None, help="Accepted for interface symmetry; mining is deterministic.")
@click.option("--rules/--no-rules", default=False, help="Also derive last-item rules.")
@click.option("--min-confidence", type=float, default=None)
@click.pass_context
def mine(ctx, bundle_path, seed, rules, min_confidence, **miner):
    """Mine multi-source patterns from the store (or an export bundle);
    one JSON record per line."""
    try:
        config = _run_config(ctx, min_confidence=min_confidence, **miner)
        if bundle_path is not None:
            path = Path(bundle_path)
            if path.is_dir():
                files = {p.name: p.read_text(encoding="utf-8") for p in sorted(path.glob("*.csv"))}
            else:
                files = read_bundle_archive(path.read_bytes())
            store = Store()
            report = import_csv_bundle(store, files)
            if report.status != "committed":
                _emit(report.to_dict())
                logger.error("bundle rejected with %d errors", report.error_count)
                sys.exit(1)
        else:
            store = _open_store(ctx)
        resources = {rid: r.attribute_labels() for rid, r in store.resources.items()}
        db = build_sequence_db(store.activity_events(), resources, config.session_gap())
        contexts = {
            lid: store.resolve_learner_context(lid, config.reference_date)
            for lid in store.learner_ids()
        }
        patterns = mine_patterns(db, contexts, config.miner_params())
        for pattern in patterns:
            click.echo(pattern.to_json())
        if rules:
            for rule in derive_rules(patterns, db, contexts, config.min_confidence):
                _emit({"rule": rule.to_dict()})
        logger.info("mined %d patterns from %d learners", len(patterns), len(contexts))
    except MetalError as exc:
        _fail(exc)


@main.command()
@click.option("--learner", "learner_id", default=None)
@click.option("--class", "class_id", default=None)
@click.option("--from", "from_", required=True, help="Window start, ISO instant with offset.")
@click.option("--to", required=True, help="Window end, ISO instant with offset.")
@click.option("--bucket-days", type=int, default=1, show_default=True)
@click.option("--skill", default=None)
@click.pass_context
def indicators(ctx, learner_id, class_id, from_, to, bucket_days, skill):
    """Indicator report for one learner or one class."""
    from datetime import timedelta

    if bool(learner_id) == bool(class_id):
        raise click.UsageError("exactly one of --learner or --class is required")
    try:
        store = _open_store(ctx)
        start = parse_instant(from_, "from")
        end = parse_instant(to, "to")
        bucket = timedelta(days=bucket_days)
        if learner_id:
            out = {
                "learner_id": learner_id,
                "pulse": activity_pulse(store, learner_id, start, end, bucket).to_dict(),
                "effort_minutes": effort_indicator(store, learner_id, start, end),
            }
            if end - start >= timedelta(days=1):
                out["engagement"] = engagement_indicator(store, learner_id, start, end)
            if skill:
                out["skill_evolution"] = skill_evolution(store, learner_id, skill, start, end, bucket).to_dict()
        else:
            out = {"class_id": class_id}
            if skill:
                out["skill_evolution"] = skill_evolution(
                    store, class_id, skill, start, end, bucket, subject_kind="class"
                ).to_dict()
        _emit(out)
    except MetalError as exc:
        _fail(exc)


@main.command()
@click.argument("log_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--permutations", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--exact", is_flag=True, default=False, help="Enumerate all assignments instead of sampling.")
@click.pass_context
def gaze(ctx, log_file, permutations, seed, exact):
    """Scanpath features and recall association tests from a fixation CSV."""
    try:
        config = _run_config(ctx, permutations=permutations, seed=seed)
        with open(log_file, encoding="utf-8", newline="") as fh:
            trials = parse_fixation_log(fh)
        report = feature_report(trials, config.permutations, config.seed, exact)
        for entry in report:
            _emit(entry)
        logger.info("analyzed %d trials", len(trials))
    except MetalError as exc:
        _fail(exc)


@main.command()
@click.option("--salt", required=True, help="Keyed-digest secret; same salt, same pseudonyms.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--entities", default=None, help="Comma-separated subset of entity types.")
@click.pass_context
def export(ctx, salt, out_path, entities):
    """Pseudonymized roster export to a zip archive or a directory."""
    try:
        store = _open_store(ctx)
        if entities:
            files = export_pseudonymized(store, salt, tuple(e.strip() for e in entities.split(",")))
        else:
            files = export_pseudonymized(store, salt)
    except MetalError as exc:
        _fail(exc)
    target = Path(out_path)
    if target.suffix == ".zip":
        target.write_bytes(write_bundle_archive(files))
    else:
        target.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (target / f"{name}.csv").write_text(text, encoding="utf-8")
    logger.info("exported %d files to %s", len(files), target)
    _emit({"exported": sorted(files), "target": str(target)})


if __name__ == "__main__":
    main()
