"""Annotation job lifecycle and execution.

A job binds a context query to one executor (classifier or anomaly scorer)
and one attribute.  Running jobs receive measurements either through a
broker subscription or through a per-job tokenized ingest endpoint; both
paths funnel into :meth:`JobEngine.handle_update`, which invokes the
executor and forwards results to the warehouse as machine annotations.

Machine annotations carry the *measurement* timestamp, so replaying a
stream yields one annotation per distinct measurement; ``producedAt`` on
the returned result is wall-clock and is the only path-dependent field.
"""

from __future__ import annotations

import json
import logging
import math
import secrets
import threading
from dataclasses import dataclass, field
from datetime import datetime

from .broker import ContextBroker, ContextQuery
from .errors import (
    AuthorizationError,
    ConflictError,
    NotFoundError,
    ProtocolError,
    StateError,
    ValidationError,
)
from .executors import (
    KIND_ANOMALY,
    KIND_CLASSIFICATION,
    AnomalyModel,
    ClassifierModel,
    ExecutorConfig,
    classify,
    score_anomaly,
    train_anomaly,
    train_classifier,
)
from .storage import Database
from .timeutil import format_iso, parse_iso, utc_now
from .warehouse import WarehouseStore, machine_annotator

log = logging.getLogger(__name__)

# Reserved label for normal-behavior training samples of anomaly jobs.
NORMAL_TAG = "urn:oc:tag:normal"
_NORMAL_ALIASES = frozenset({"", "normal", NORMAL_TAG})

# Anomaly jobs annotate with the tag of this name from their domain.
ANOMALY_TAG_NAME = "anomalous"

STATUS_CREATED = "created"
STATUS_TRAINED = "trained"
STATUS_RUNNING = "running"
STATUS_STOPPED = "stopped"


@dataclass
class TrainingSample:
    tag: str | None
    value: float

    @classmethod
    def from_dict(cls, data: dict) -> "TrainingSample":
        if not isinstance(data, dict) or "value" not in data:
            raise ValidationError(f"training sample needs a value field: {data!r}")
        return cls(tag=data.get("tag"), value=data["value"])


@dataclass
class AnnotationResult:
    asset_urn: str
    attribute: str
    input_value: float
    tag: str
    note: float | str
    produced_at: datetime
    job_id: int

    def to_dict(self) -> dict:
        return {
            "assetUrn": self.asset_urn,
            "attribute": self.attribute,
            "inputValue": self.input_value,
            "tag": self.tag,
            "note": self.note,
            "producedAt": format_iso(self.produced_at),
            "jobId": self.job_id,
        }


@dataclass
class AnnotationJob:
    id: int
    kind: str
    query: ContextQuery
    attribute: str
    tag_domain: str
    executor: ExecutorConfig
    status: str = STATUS_CREATED
    ingest_token: str = field(default_factory=lambda: secrets.token_urlsafe(16))
    created_at: datetime = field(default_factory=utc_now)
    updated_at: datetime = field(default_factory=utc_now)
    counters: dict = field(
        default_factory=lambda: {"processed": 0, "skipped": 0, "annotated": 0, "duplicates": 0}
    )
    model: ClassifierModel | AnomalyModel | None = None
    anomaly_tag: str | None = None  # resolved designated tag, anomaly jobs only
    subscription_id: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "query": self.query.to_dict(),
            "attribute": self.attribute,
            "tagDomain": self.tag_domain,
            "executorParams": self.executor.to_dict(),
            "status": self.status,
            "ingestToken": self.ingest_token,
            "createdAt": format_iso(self.created_at),
            "updatedAt": format_iso(self.updated_at),
            "counters": dict(self.counters),
        }


class JobEngine:
    """Owns all jobs; one engine per service instance.

    Job ids come from a persistent counter and are never reused.  Running
    jobs are resubscribed against the (volatile) broker on startup.
    """

    def __init__(
        self,
        broker: ContextBroker,
        warehouse: WarehouseStore,
        db: Database | None = None,
        notify_base: str = "http://127.0.0.1:8000",
    ) -> None:
        self._broker = broker
        self._warehouse = warehouse
        self._db = db
        self._notify_base = notify_base.rstrip("/")
        self._lock = threading.RLock()
        self._jobs: dict[int, AnnotationJob] = {}
        self._job_locks: dict[int, threading.Lock] = {}
        self._next_id = 1
        if db is not None:
            self._init_tables()
            self._load()
        warehouse.register_domain_ref_checker(self._uses_domain)

    def _uses_domain(self, domain_urn: str) -> bool:
        with self._lock:
            return any(job.tag_domain == domain_urn for job in self._jobs.values())

    # -- lifecycle ---------------------------------------------------------

    def create_job(
        self,
        kind: str,
        query: ContextQuery,
        attribute: str,
        tag_domain: str,
        executor: ExecutorConfig | None = None,
    ) -> AnnotationJob:
        if not attribute or not isinstance(attribute, str):
            raise ValidationError("job attribute must be a non-empty string")
        executor = executor or ExecutorConfig(kind=kind)
        if executor.kind != kind:
            raise ValidationError(
                f"executor kind {executor.kind!r} does not match job kind {kind!r}"
            )
        if tag_domain not in self._warehouse.domains:
            raise ValidationError(f"unknown tag domain: {tag_domain}")
        anomaly_tag = None
        if kind == KIND_ANOMALY:
            # resolved up front so a detection can never fail to annotate
            for tag in self._warehouse.domain_tags(tag_domain):
                if tag.name == ANOMALY_TAG_NAME:
                    anomaly_tag = tag.urn
                    break
            if anomaly_tag is None:
                raise ValidationError(
                    f"anomaly jobs need a tag named {ANOMALY_TAG_NAME!r} in {tag_domain}"
                )
        with self._lock:
            job = AnnotationJob(
                id=self._next_id,
                kind=kind,
                query=query,
                attribute=attribute,
                tag_domain=tag_domain,
                executor=executor,
                anomaly_tag=anomaly_tag,
            )
            self._next_id += 1
            self._jobs[job.id] = job
            self._job_locks[job.id] = threading.Lock()
            self._persist(job)
            self._persist_next_id()
            return job

    def train_job(self, job_id: int, samples: list[TrainingSample]) -> AnnotationJob:
        job = self.get_job(job_id)
        if not samples:
            raise ValidationError("training needs at least one sample")
        for sample in samples:
            if isinstance(sample.value, bool) or not isinstance(sample.value, (int, float)):
                raise ValidationError(f"training value must be a number, got {sample.value!r}")
            if not math.isfinite(sample.value):
                raise ValidationError(f"training value must be finite, got {sample.value!r}")
        if job.kind == KIND_CLASSIFICATION:
            pairs = [(self._resolve_tag(job, s.tag), float(s.value)) for s in samples]
            model = train_classifier(pairs)
        else:
            for sample in samples:
                if sample.tag is not None and sample.tag not in _NORMAL_ALIASES:
                    raise ValidationError(
                        f"anomaly training accepts only the reserved normal tag, got {sample.tag!r}"
                    )
            if len(samples) < 2:
                raise ValidationError("anomaly training needs at least 2 samples")
            model = train_anomaly([float(s.value) for s in samples], job.executor)
        with self._job_lock(job_id):
            if job.status not in (STATUS_CREATED, STATUS_STOPPED):
                raise StateError(f"cannot train job in status {job.status}")
            job.model = model
            job.status = STATUS_TRAINED
            job.updated_at = utc_now()
            self._persist(job)
        return job

    def _resolve_tag(self, job: AnnotationJob, label: str | None) -> str:
        """Accept a tag URN of the job's domain, or a bare tag name in it."""
        if not label:
            raise ValidationError("classification samples need a tag")
        domain_tags = self._warehouse.domain_tags(job.tag_domain)
        for tag in domain_tags:
            if tag.urn == label or tag.name == label:
                return tag.urn
        raise ValidationError(f"tag {label!r} is not in domain {job.tag_domain}")

    def start_job(self, job_id: int) -> AnnotationJob:
        with self._job_lock(job_id):
            job = self.get_job(job_id)
            if job.status not in (STATUS_TRAINED, STATUS_STOPPED) or job.model is None:
                raise StateError(f"cannot start job in status {job.status}")
            subscription = self._broker.subscribe(
                job.query, f"{self._notify_base}/notify/{job.id}"
            )
            job.subscription_id = subscription.id
            job.status = STATUS_RUNNING
            job.updated_at = utc_now()
            self._persist(job)
            return job

    def stop_job(self, job_id: int) -> AnnotationJob:
        with self._job_lock(job_id):
            job = self.get_job(job_id)
            if job.status != STATUS_RUNNING:
                raise StateError(f"cannot stop job in status {job.status}")
            self._drop_subscription(job)
            job.status = STATUS_STOPPED
            job.updated_at = utc_now()
            self._persist(job)
            return job

    def _drop_subscription(self, job: AnnotationJob) -> None:
        if job.subscription_id is not None:
            try:
                self._broker.unsubscribe(job.subscription_id)
            except NotFoundError:
                pass
            job.subscription_id = None

    def get_job(self, job_id: int) -> AnnotationJob:
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise NotFoundError(f"unknown job: {job_id}")
            return job

    def list_jobs(self) -> list[AnnotationJob]:
        with self._lock:
            return [self._jobs[i] for i in sorted(self._jobs)]

    def delete_job(self, job_id: int) -> None:
        with self._job_lock(job_id):
            job = self.get_job(job_id)
            self._drop_subscription(job)
            with self._lock:
                del self._jobs[job_id]
                del self._job_locks[job_id]
            if self._db is not None:
                self._db.execute("DELETE FROM jobs WHERE id = ?", (job_id,))
        # warehouse annotations are retained: provenance outlives the job

    # -- execution ---------------------------------------------------------

    def _job_lock(self, job_id: int) -> threading.Lock:
        with self._lock:
            lock = self._job_locks.get(job_id)
            if lock is None:
                raise NotFoundError(f"unknown job: {job_id}")
            return lock

    def handle_update(
        self,
        job_id: int,
        asset_urn: str,
        attribute: str,
        value,
        timestamp: datetime | None = None,
        location: tuple[float, float] | None = None,
    ) -> AnnotationResult | None:
        with self._job_lock(job_id):
            job = self.get_job(job_id)
            if job.status != STATUS_RUNNING:
                return None  # stopped jobs are inert, late notifications included
            if attribute != job.attribute:
                job.counters["skipped"] += 1
                self._persist(job)
                return None
            if (
                isinstance(value, bool)
                or not isinstance(value, (int, float))
                or not math.isfinite(value)
            ):
                job.counters["skipped"] += 1
                log.warning("job %d skipped non-numeric value %r from %s", job_id, value, asset_urn)
                self._persist(job)
                return None
            timestamp = timestamp or utc_now()
            job.counters["processed"] += 1
            if job.kind == KIND_CLASSIFICATION:
                outcome = classify(job.model, float(value))
                tag_urn, note = outcome.tag, outcome.confidence
            else:
                score = score_anomaly(job.model, float(value))
                if not score.anomalous:
                    self._persist(job)
                    return None
                tag_urn, note = job.anomaly_tag, score.score
            result = AnnotationResult(
                asset_urn=asset_urn,
                attribute=attribute,
                input_value=float(value),
                tag=tag_urn,
                note=note,
                produced_at=utc_now(),
                job_id=job.id,
            )
            try:
                self._warehouse.annotate(
                    asset_urn,
                    tag_urn,
                    machine_annotator(job.id),
                    note,
                    timestamp=timestamp,
                    location=location,
                )
                job.counters["annotated"] += 1
            except ConflictError:
                job.counters["duplicates"] += 1
            self._persist(job)
            return result

    def process_notification(self, job_id: int, body) -> list[AnnotationResult]:
        """Consume one NGSI-shaped notification body for a job.

        Every attribute of every entity in ``data`` goes through
        handle_update; non-matching attributes count as skipped there.
        """
        job = self.get_job(job_id)
        entities = self._parse_notification(body)
        results = []
        for entity in entities:
            asset_urn = entity["id"]
            for name, payload in entity.items():
                if name in ("id", "type"):
                    continue
                value, timestamp, location = self._parse_attribute(name, payload)
                result = self.handle_update(
                    job.id, asset_urn, name, value, timestamp=timestamp, location=location
                )
                if result is not None:
                    results.append(result)
        return results

    @staticmethod
    def _parse_notification(body) -> list[dict]:
        if not isinstance(body, dict) or not isinstance(body.get("data"), list):
            raise ProtocolError("notification body must be an object with a data array")
        for entity in body["data"]:
            if not isinstance(entity, dict) or not isinstance(entity.get("id"), str):
                raise ProtocolError(f"notification entity needs a string id: {entity!r}")
        return body["data"]

    @staticmethod
    def _parse_attribute(name: str, payload) -> tuple[object, datetime | None, tuple | None]:
        if not isinstance(payload, dict) or "value" not in payload:
            raise ProtocolError(f"attribute {name!r} must be an object with a value")
        metadata = payload.get("metadata") or {}
        if not isinstance(metadata, dict):
            raise ProtocolError(f"attribute {name!r} metadata must be an object")
        timestamp = None
        if "timestamp" in metadata:
            try:
                timestamp = parse_iso(metadata["timestamp"])
            except ValidationError as exc:
                raise ProtocolError(str(exc)) from exc
        location = None
        loc = metadata.get("location")
        if isinstance(loc, dict) and "lat" in loc and "lon" in loc:
            location = (loc["lat"], loc["lon"])
        return payload["value"], timestamp, location

    def manual_ingest(self, token: str, body) -> list[AnnotationResult]:
        job = None
        with self._lock:
            for candidate in self._jobs.values():
                if secrets.compare_digest(candidate.ingest_token, token or ""):
                    job = candidate
                    break
        if job is None:
            raise AuthorizationError("unknown ingest token")
        return self.process_notification(job.id, body)

    # -- persistence -------------------------------------------------------

    def _init_tables(self) -> None:
        self._db.execute("CREATE TABLE IF NOT EXISTS jobs (id INTEGER PRIMARY KEY, state TEXT)")
        self._db.execute("CREATE TABLE IF NOT EXISTS kv (key TEXT PRIMARY KEY, value TEXT)")

    def _load(self) -> None:
        for (value,) in self._db.query("SELECT value FROM kv WHERE key = 'jobs_next_id'"):
            self._next_id = int(value)
        for _, state in self._db.query("SELECT id, state FROM jobs ORDER BY id"):
            job = self._job_from_state(json.loads(state))
            self._jobs[job.id] = job
            self._job_locks[job.id] = threading.Lock()
        for job in self._jobs.values():
            if job.status == STATUS_RUNNING:
                # broker state is volatile; re-establish the live subscription
                subscription = self._broker.subscribe(
                    job.query, f"{self._notify_base}/notify/{job.id}"
                )
                job.subscription_id = subscription.id

    def _persist(self, job: AnnotationJob) -> None:
        if self._db is not None:
            self._db.execute(
                "INSERT OR REPLACE INTO jobs (id, state) VALUES (?, ?)",
                (job.id, json.dumps(self._job_state(job))),
            )

    def _persist_next_id(self) -> None:
        if self._db is not None:
            self._db.execute(
                "INSERT OR REPLACE INTO kv (key, value) VALUES ('jobs_next_id', ?)",
                (str(self._next_id),),
            )

    @staticmethod
    def _job_state(job: AnnotationJob) -> dict:
        state = job.to_dict()
        state["anomalyTag"] = job.anomaly_tag
        state["model"] = job.model.to_dict() if job.model is not None else None
        return state

    @staticmethod
    def _job_from_state(state: dict) -> AnnotationJob:
        kind = state["kind"]
        model = None
        if state.get("model") is not None:
            if kind == KIND_CLASSIFICATION:
                model = ClassifierModel.from_dict(state["model"])
            else:
                model = AnomalyModel.from_dict(state["model"])
        return AnnotationJob(
            id=state["id"],
            kind=kind,
            query=ContextQuery.from_dict(state.get("query")),
            attribute=state["attribute"],
            tag_domain=state["tagDomain"],
            executor=ExecutorConfig.from_dict(kind, state.get("executorParams")),
            status=state["status"],
            ingest_token=state["ingestToken"],
            created_at=parse_iso(state["createdAt"]),
            updated_at=parse_iso(state["updatedAt"]),
            counters=dict(state["counters"]),
            model=model,
            anomaly_tag=state.get("anomalyTag"),
        )
