"""REST backend for the steward console.

State lives in a data directory as append-only JSON-lines logs plus
snapshot files; the served partition is always link(stored pairs, stored
unlink rules). At most one mutating operation runs at a time; reads are
lock-free against immutable snapshots.
"""

from __future__ import annotations

import datetime as _dt
import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, File, Request, UploadFile
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import evalharness, explainers, gnn, linker, matcher, proxygraph
from .linker import Partition, UnlinkRule
from .matcher import MatchClass, PairScore
from .records import AnonymousValueList, RecordSet, parse_records, parse_schema, serialize_records


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message
        super().__init__(message)


@dataclass
class Job:
    job_id: str
    kind: str
    status: str = "pending"  # pending | running | done | failed
    progress: float = 0.0
    error: str | None = None

    def to_json(self) -> dict:
        doc = {"job_id": self.job_id, "kind": self.kind, "status": self.status,
               "progress": self.progress}
        if self.error:
            doc["error"] = self.error
        return doc


@dataclass
class Store:
    """All server state plus its on-disk layout."""

    data_dir: Path
    anon: AnonymousValueList = field(default_factory=AnonymousValueList.default)
    records: RecordSet | None = None
    scores: list[PairScore] | None = None
    rules: list[UnlinkRule] = field(default_factory=list)
    partition: Partition | None = None
    codec: proxygraph.FeatureCodec | None = None
    graph: proxygraph.EntityGraph | None = None
    params: gnn.GcnParams | None = None
    blocking: matcher.BlockingConfig = field(default_factory=lambda: evalharness.DEFAULT_BLOCKING)
    thresholds: matcher.Thresholds = field(default_factory=lambda: evalharness.DEFAULT_THRESHOLDS)
    weights: matcher.WeightTable | None = None
    explanation_cache: dict = field(default_factory=dict)
    jobs: dict[str, Job] = field(default_factory=dict)
    mutation_lock: threading.Lock = field(default_factory=threading.Lock)

    # -- persistence --------------------------------------------------------

    def load(self) -> None:
        d = self.data_dir
        schema_file = d / "schema.json"
        if not schema_file.exists():
            return
        schema = parse_schema(json.loads(schema_file.read_text()))
        self.records = parse_records((d / "records.jsonl").read_bytes(), "jsonl", schema)
        self.weights = matcher.default_weight_table(schema)
        if (d / "pairs.jsonl").exists():
            self.scores = matcher.read_pair_scores((d / "pairs.jsonl").read_bytes())
        if (d / "unlinks.jsonl").exists():
            self.rules = linker.read_unlink_log((d / "unlinks.jsonl").read_bytes())
        if self.scores is not None:
            self._relink()
        if (d / "model.json").exists() and self.partition is not None:
            self.codec = proxygraph.FeatureCodec(self.records.schema)
            self.graph = proxygraph.build_graph(self.partition, self.records, self.codec)
            self.params = gnn.load_model((d / "model.json").read_bytes(), self.codec.fingerprint())

    def save_dataset(self) -> None:
        self.data_dir.mkdir(parents=True, exist_ok=True)
        from .records import schema_to_json
        (self.data_dir / "schema.json").write_text(json.dumps(schema_to_json(self.records.schema)))
        (self.data_dir / "records.jsonl").write_bytes(serialize_records(self.records, "jsonl"))

    def append_rule(self, rule: UnlinkRule) -> None:
        with (self.data_dir / "unlinks.jsonl").open("ab") as f:
            f.write((json.dumps(rule.to_json(), sort_keys=True) + "\n").encode("utf-8"))

    def _relink(self) -> None:
        self.partition = linker.link(self.scores, self.rules, set(self.records.index),
                                     self.records, self.anon)

    # -- stages -------------------------------------------------------------

    def run_match(self) -> None:
        self.scores = matcher.run_matching(self.records, self.blocking, self.weights,
                                           self.thresholds, self.anon)
        (self.data_dir / "pairs.jsonl").write_bytes(matcher.write_pair_scores(self.scores))
        self._relink()
        (self.data_dir / "partition.json").write_text(json.dumps(self.partition.to_json()))
        self.graph = None
        self.params = None
        self.explanation_cache.clear()

    def run_train(self, cfg: gnn.TrainConfig = gnn.TrainConfig()) -> None:
        self.codec = proxygraph.FeatureCodec(self.records.schema)
        self.graph = proxygraph.build_graph(self.partition, self.records, self.codec)
        pairs = proxygraph.make_training_set(self.scores, list(self.records.index),
                                             seed=cfg.seed)
        self.params = gnn.train(self.graph, pairs, cfg)
        (self.data_dir / "model.json").write_bytes(
            gnn.save_model(self.params, self.codec.fingerprint()))
        self.explanation_cache.clear()

    def scorer(self):
        ps = matcher.PairScorer(self.records, self.weights, self.thresholds, self.anon)
        return lambda a, b: ps.score(a, b).total

    # -- guards -------------------------------------------------------------

    def need_dataset(self) -> RecordSet:
        if self.records is None:
            raise ApiError(409, "no_dataset", "no dataset loaded; POST /datasets first")
        return self.records

    def need_partition(self) -> Partition:
        self.need_dataset()
        if self.partition is None:
            raise ApiError(409, "not_matched", "matching has not run; POST /jobs/match first")
        return self.partition

    def need_model(self) -> gnn.GcnParams:
        self.need_partition()
        if self.params is None or self.graph is None:
            raise ApiError(409, "model_not_trained",
                           "proxy model not trained; POST /jobs/train first")
        return self.params


def create_app(data_dir: Path, serve_ui_from: Path | None = None) -> FastAPI:
    store = Store(data_dir=Path(data_dir))
    store.data_dir.mkdir(parents=True, exist_ok=True)
    store.load()
    app = FastAPI(title="xem")
    app.state.store = store

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status,
                            content={"error": {"code": exc.code, "message": exc.message}})

    def _mutation():
        if not store.mutation_lock.acquire(blocking=False):
            raise ApiError(409, "busy", "another mutating operation is in flight")
        return store.mutation_lock

    # -- read endpoints -----------------------------------------------------

    @app.get("/entities")
    def list_entities(min_size: int = 1, sort: str = "size_desc",
                      limit: int = 50, page_token: int = 0):
        p = store.need_partition()
        items = [e for e in p.entities if len(e.members) >= min_size]
        if sort == "size_desc":
            items.sort(key=lambda e: (-len(e.members), e.entity_id))
        elif sort == "id":
            items.sort(key=lambda e: e.entity_id)
        else:
            raise ApiError(400, "bad_sort", f"unknown sort: {sort}")
        page = items[page_token:page_token + limit]
        next_token = page_token + limit if page_token + limit < len(items) else None
        return {
            "items": [{"entity_id": e.entity_id, "size": len(e.members),
                       "representative": e.representative} for e in page],
            "next_page_token": next_token,
            "total": len(items),
        }

    @app.get("/entities/{entity_id}")
    def entity_detail(entity_id: str):
        p = store.need_partition()
        e = p.by_id(entity_id)
        if e is None:
            raise ApiError(404, "not_found", f"unknown entity: {entity_id}")
        members = sorted(e.members)
        totals = [s.to_json() for s in store.scores or []
                  if s.pair[0] in e.members and s.pair[1] in e.members]
        return {
            "entity_id": e.entity_id,
            "representative": e.representative,
            "members": [
                {"record_id": m, "attributes": store.records[m].attributes}
                for m in members
            ],
            "edges": [{"member": a, "representative": b} for a, b in e.edges],
            "pair_scores": totals,
        }

    @app.get("/records/{record_id}")
    def record_detail(record_id: str):
        rs = store.need_dataset()
        if record_id not in rs.index:
            raise ApiError(404, "not_found", f"unknown record: {record_id}")
        r = rs[record_id]
        return {"record_id": r.record_id, "source_id": r.source_id,
                "attributes": r.attributes}

    @app.get("/records")
    def query_records(attribute: str | None = None, contains: str | None = None,
                      limit: int = 50):
        rs = store.need_dataset()
        out = []
        for r in rs.records:
            if attribute and contains:
                v = r.get(attribute)
                if v is None or contains.casefold() not in v:
                    continue
            out.append({"record_id": r.record_id, "attributes": r.attributes})
            if len(out) >= limit:
                break
        return {"items": out}

    # -- explanations -------------------------------------------------------

    @app.post("/explain")
    def explain(body: dict):
        a, b = body.get("a"), body.get("b")
        if not a or not b or a == b:
            raise ApiError(400, "bad_pair", "body must name two distinct records a and b")
        rs = store.need_dataset()
        for rid in (a, b):
            if rid not in rs.index:
                raise ApiError(404, "not_found", f"unknown record: {rid}")
        store.need_model()
        pair = (a, b) if a < b else (b, a)
        seed = int(body.get("seed", 0))
        cache_key = (pair, seed, store.codec.fingerprint())
        if cache_key in store.explanation_cache:
            return store.explanation_cache[cache_key]
        mask = explainers.explain_pair_mask(store.params, store.graph, *pair,
                                           explainers.MaskConfig(seed=seed))
        attribution = explainers.attribute_contributions(
            store.scorer(), rs[pair[0]], rs[pair[1]], rs.attribute_names, seed=seed)
        body_out = {
            "a": pair[0], "b": pair[1],
            "proxy_probability": mask.p_orig,
            "fidelity": mask.fidelity,
            "mask_rollup": mask.rollup,
            "top_attributes": [{"attribute": n, "score": s}
                               for n, s in mask.top_attributes(3)],
            "attribution": attribution.to_json(),
        }
        store.explanation_cache[cache_key] = body_out
        return body_out

    @app.post("/entities/{entity_id}/report")
    def entity_report(entity_id: str):
        p = store.need_partition()
        store.need_model()
        e = p.by_id(entity_id)
        if e is None:
            raise ApiError(404, "not_found", f"unknown entity: {entity_id}")
        try:
            report = explainers.build_explanation_report(
                e, p, store.records, store.scores, store.params, store.graph,
                store.scorer(), store.anon)
        except explainers.StalenessError as exc:
            raise ApiError(409, "stale_model", str(exc))
        return report.to_json()

    # -- mutations ----------------------------------------------------------

    @app.post("/unlink")
    def unlink(body: dict):
        a, b = body.get("a"), body.get("b")
        author = body.get("author", "")
        rs = store.need_dataset()
        store.need_partition()
        for rid in (a, b):
            if not rid or rid not in rs.index:
                raise ApiError(404, "not_found", f"unknown record: {rid}")
        pair = matcher.canonical_pair(a, b)
        lock = _mutation()
        try:
            already = any(r.pair == pair for r in store.rules)
            if not already:
                is_match_edge = any(
                    s.pair == pair and s.match_class is MatchClass.MATCH
                    for s in store.scores or [])
                if not is_match_edge:
                    raise ApiError(422, "not_a_match_edge",
                                   f"({pair[0]}, {pair[1]}) is not a direct Match edge")
                rule = UnlinkRule(pair, author,
                                  _dt.datetime.now(_dt.timezone.utc).isoformat())
                store.rules.append(rule)
                store.append_rule(rule)
                store._relink()
                (store.data_dir / "partition.json").write_text(
                    json.dumps(store.partition.to_json()))
            ea = store.partition.entity_of(a)
            eb = store.partition.entity_of(b)
            separating = ea is None or eb is None or ea.entity_id != eb.entity_id
            return {
                "separating": separating,
                "already_applied": already,
                "new_partition_summary": {
                    "entities": len(store.partition.entities),
                    "entity_of_a": ea.entity_id if ea else None,
                    "entity_of_b": eb.entity_id if eb else None,
                },
            }
        finally:
            lock.release()

    @app.post("/datasets")
    def upload_dataset(records: UploadFile = File(...), schema: UploadFile = File(...)):
        lock = _mutation()
        try:
            schema_doc = parse_schema(json.loads(schema.file.read()))
            fmt = "csv" if (records.filename or "").endswith(".csv") else "jsonl"
            try:
                rs = parse_records(records.file.read(), fmt, schema_doc)
            except ValueError as exc:
                raise ApiError(400, "bad_dataset", str(exc))
            store.records = rs
            store.weights = matcher.default_weight_table(rs.schema)
            store.scores = None
            store.partition = None
            store.graph = None
            store.params = None
            store.rules = []
            store.explanation_cache.clear()
            unlinks = store.data_dir / "unlinks.jsonl"
            if unlinks.exists():
                unlinks.unlink()
            store.save_dataset()
            return {"records": len(rs)}
        finally:
            lock.release()

    def _run_job(job: Job, fn) -> None:
        job.status = "running"
        try:
            fn()
            job.progress = 1.0
            job.status = "done"
        except Exception as exc:  # surfaced via GET /jobs/{id}
            job.status = "failed"
            job.error = str(exc)
        finally:
            store.mutation_lock.release()

    @app.post("/jobs/{kind}")
    def start_job(kind: str):
        if kind not in ("match", "train"):
            raise ApiError(404, "not_found", f"unknown job kind: {kind}")
        store.need_dataset()
        if kind == "train":
            store.need_partition()
            if store.scores is None:
                raise ApiError(409, "not_matched", "run the match job first")
        _mutation()  # released by _run_job
        job = Job(job_id=uuid.uuid4().hex[:12], kind=kind)
        store.jobs[job.job_id] = job
        fn = store.run_match if kind == "match" else store.run_train
        threading.Thread(target=_run_job, args=(job, fn), daemon=True).start()
        return job.to_json()

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        job = store.jobs.get(job_id)
        if job is None:
            raise ApiError(404, "not_found", f"unknown job: {job_id}")
        return job.to_json()

    if serve_ui_from is not None and serve_ui_from.exists():
        app.mount("/", StaticFiles(directory=serve_ui_from, html=True), name="ui")

    return app
