"""Knowledge warehouse: tag taxonomy, annotations, and discovery queries.

The graph has four owned node kinds (tag domains, tags, services,
experiments) plus annotations, which are edges from externally-referenced
asset URNs to tags.  Assets themselves are never stored.  Per-asset tag
aggregates are maintained incrementally and pushed to an optional discovery
webhook, debounced.

Annotator identities are strings: ``machine:<jobId>`` or ``user:<userId>``.
Machine annotations are born unreviewed, direct user annotations confirmed.
"""

from __future__ import annotations

import json
import logging
import math
import re
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Iterable

from .errors import (
    AuthorizationError,
    ConflictError,
    NotFoundError,
    ValidationError,
)
from .storage import Database
from .timeutil import format_iso, parse_iso, utc_now

log = logging.getLogger(__name__)

_DOMAIN_URN_RE = re.compile(r"^urn:oc:tagDomain:[^:\s]+$")
_TAG_URN_RE = re.compile(r"^urn:oc:tagDomain:[^:\s]+:[^:\s]+$")

VALIDATION_UNREVIEWED = "unreviewed"
VALIDATION_CONFIRMED = "confirmed"
VALIDATION_REJECTED = "rejected"


def machine_annotator(job_id: int) -> str:
    return f"machine:{job_id}"


def user_annotator(user_id: str) -> str:
    return f"user:{user_id}"


def annotator_kind(annotator: str) -> str:
    if isinstance(annotator, str):
        if annotator.startswith("machine:") and annotator[len("machine:"):].isdigit():
            return "machine"
        if annotator.startswith("user:") and len(annotator) > len("user:"):
            return "user"
    raise ValidationError(f"annotator must be 'machine:<jobId>' or 'user:<userId>', got {annotator!r}")


@dataclass
class Tag:
    urn: str
    name: str
    domain_urn: str
    seq: int  # global insertion order, breaks suggestion ties

    def to_dict(self) -> dict:
        return {"urn": self.urn, "name": self.name, "domain": self.domain_urn}


@dataclass
class TagDomain:
    urn: str
    name: str
    description: str = ""
    tag_urns: list[str] = field(default_factory=list)


@dataclass
class Service:
    urn: str
    name: str
    linked_domains: set[str] = field(default_factory=set)


@dataclass
class Experiment:
    urn: str
    name: str
    linked_domains: set[str] = field(default_factory=set)


@dataclass
class Annotation:
    id: str
    asset_urn: str
    tag_urn: str
    annotator: str
    note: float | int | str
    timestamp: datetime
    location: tuple[float, float] | None = None
    validation: str = VALIDATION_UNREVIEWED
    reviewed_by: str | None = None

    def key(self) -> tuple:
        return (self.asset_urn, self.tag_urn, self.annotator, self.timestamp)

    def to_dict(self) -> dict:
        out = {
            "id": self.id,
            "assetUrn": self.asset_urn,
            "tagUrn": self.tag_urn,
            "annotator": self.annotator,
            "note": self.note,
            "timestamp": format_iso(self.timestamp),
            "validation": self.validation,
        }
        if self.location is not None:
            out["location"] = {"lat": self.location[0], "lon": self.location[1]}
        if self.reviewed_by is not None:
            out["reviewedBy"] = self.reviewed_by
        return out


@dataclass
class AssetMatch:
    asset_urn: str
    tag_counts: dict[str, int]
    total: int

    def to_dict(self) -> dict:
        return {
            "assetUrn": self.asset_urn,
            "tags": {urn: count for urn, count in sorted(self.tag_counts.items())},
            "total": self.total,
        }


def _check_note(note) -> None:
    if isinstance(note, bool) or not isinstance(note, (int, float, str)):
        raise ValidationError(f"note must be a number or string, got {note!r}")
    if isinstance(note, (int, float)) and not math.isfinite(note):
        raise ValidationError(f"numeric note must be finite, got {note!r}")


def _check_location(location: tuple[float, float] | None) -> None:
    if location is None:
        return
    lat, lon = location
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        raise ValidationError(f"location out of range: {location}")


class WarehouseStore:
    def __init__(
        self,
        db: Database | None = None,
        discovery_webhook: str | None = None,
        discovery_debounce: float = 2.0,
        webhook_transport: Callable[[str, object], int] | None = None,
    ) -> None:
        self._db = db
        self._lock = threading.RLock()
        self.domains: dict[str, TagDomain] = {}
        self.tags: dict[str, Tag] = {}
        self.services: dict[str, Service] = {}
        self.experiments: dict[str, Experiment] = {}
        self.annotations: dict[str, Annotation] = {}
        self._by_key: dict[tuple, str] = {}
        self._counts: dict[tuple[str, str], int] = {}  # (asset, tag) -> non-rejected count
        self._latest: dict[tuple[str, str], datetime] = {}
        self._seq = 0
        self._domain_ref_checkers: list[Callable[[str], bool]] = []

        self._webhook = discovery_webhook
        self._debounce = discovery_debounce
        self._webhook_transport = webhook_transport
        self._push_timer: threading.Timer | None = None
        self._dirty = False
        self.stats = {"discovery_pushes": 0, "discovery_failures": 0}

        if db is not None:
            self._init_tables()
            self._load()

    def register_domain_ref_checker(self, checker: Callable[[str], bool]) -> None:
        """Hook for other components (jobs) to veto domain deletion."""
        self._domain_ref_checkers.append(checker)

    # -- taxonomy ----------------------------------------------------------

    def create_tag_domain(
        self,
        urn: str,
        name: str,
        description: str = "",
        tags: Iterable[tuple[str, str]] = (),
    ) -> TagDomain:
        if not _DOMAIN_URN_RE.match(urn or ""):
            raise ValidationError(f"domain URN must look like urn:oc:tagDomain:<domain>, got {urn!r}")
        with self._lock:
            if urn in self.domains:
                raise ConflictError(f"duplicate tag domain: {urn}")
            domain = TagDomain(urn=urn, name=name or urn.rsplit(":", 1)[-1], description=description)
            self.domains[urn] = domain
            self._persist_domain(domain)
            for tag_urn, tag_name in tags:
                self.add_tag(urn, tag_urn, tag_name)
            return domain

    def add_tag(self, domain_urn: str, urn: str, name: str) -> Tag:
        with self._lock:
            domain = self.domains.get(domain_urn)
            if domain is None:
                raise NotFoundError(f"unknown tag domain: {domain_urn}")
            if urn in self.tags:
                raise ConflictError(f"duplicate tag: {urn}")
            if not _TAG_URN_RE.match(urn or "") or not urn.startswith(domain_urn + ":"):
                raise ValidationError(
                    f"tag URN must extend its domain URN by one segment: {urn!r} under {domain_urn!r}"
                )
            name = name or urn.rsplit(":", 1)[-1]
            if any(self.tags[t].name == name for t in domain.tag_urns):
                raise ConflictError(f"duplicate tag name {name!r} in {domain_urn}")
            tag = Tag(urn=urn, name=name, domain_urn=domain_urn, seq=self._seq)
            self._seq += 1
            self.tags[urn] = tag
            domain.tag_urns.append(urn)
            self._persist_tag(tag)
            return tag

    def get_tag_domain(self, urn: str) -> TagDomain:
        with self._lock:
            domain = self.domains.get(urn)
            if domain is None:
                raise NotFoundError(f"unknown tag domain: {urn}")
            return domain

    def list_tag_domains(self) -> list[TagDomain]:
        with self._lock:
            return sorted(self.domains.values(), key=lambda d: d.urn)

    def domain_tags(self, urn: str) -> list[Tag]:
        """Tags of a domain in insertion order."""
        domain = self.get_tag_domain(urn)
        with self._lock:
            return [self.tags[t] for t in domain.tag_urns]

    def get_tag(self, urn: str) -> Tag:
        with self._lock:
            tag = self.tags.get(urn)
            if tag is None:
                raise NotFoundError(f"unknown tag: {urn}")
            return tag

    def delete_tag(self, urn: str) -> None:
        with self._lock:
            tag = self.get_tag(urn)
            if any(a.tag_urn == urn for a in self.annotations.values()):
                raise ConflictError(f"tag {urn} has annotations")
            self.domains[tag.domain_urn].tag_urns.remove(urn)
            del self.tags[urn]
            if self._db is not None:
                self._db.execute("DELETE FROM wh_tags WHERE urn = ?", (urn,))

    def delete_tag_domain(self, urn: str) -> None:
        with self._lock:
            domain = self.get_tag_domain(urn)
            for checker in self._domain_ref_checkers:
                if checker(urn):
                    raise ConflictError(f"tag domain {urn} is referenced by a job")
            for holder in list(self.services.values()) + list(self.experiments.values()):
                if urn in holder.linked_domains:
                    raise ConflictError(f"tag domain {urn} is linked by {holder.urn}")
            annotated = {a.tag_urn for a in self.annotations.values()}
            if annotated & set(domain.tag_urns):
                raise ConflictError(f"tag domain {urn} has annotated tags")
            for tag_urn in list(domain.tag_urns):
                del self.tags[tag_urn]
                if self._db is not None:
                    self._db.execute("DELETE FROM wh_tags WHERE urn = ?", (tag_urn,))
            del self.domains[urn]
            if self._db is not None:
                self._db.execute("DELETE FROM wh_domains WHERE urn = ?", (urn,))

    def _create_link_holder(self, kind: str, urn: str, name: str, linked: Iterable[str]):
        if not urn or not urn.startswith("urn:"):
            raise ValidationError(f"{kind} URN must be a URN, got {urn!r}")
        linked = set(linked)
        with self._lock:
            registry = self.services if kind == "service" else self.experiments
            if urn in registry:
                raise ConflictError(f"duplicate {kind}: {urn}")
            for domain_urn in linked:
                if domain_urn not in self.domains:
                    raise NotFoundError(f"unknown tag domain: {domain_urn}")
            cls = Service if kind == "service" else Experiment
            holder = cls(urn=urn, name=name, linked_domains=linked)
            registry[urn] = holder
            self._persist_link_holder(kind, holder)
            return holder

    def create_service(self, urn: str, name: str, linked_domains: Iterable[str] = ()) -> Service:
        return self._create_link_holder("service", urn, name, linked_domains)

    def create_experiment(self, urn: str, name: str, linked_domains: Iterable[str] = ()) -> Experiment:
        return self._create_link_holder("experiment", urn, name, linked_domains)

    def list_services(self) -> list[Service]:
        with self._lock:
            return sorted(self.services.values(), key=lambda s: s.urn)

    def list_experiments(self) -> list[Experiment]:
        with self._lock:
            return sorted(self.experiments.values(), key=lambda e: e.urn)

    def delete_service(self, urn: str) -> None:
        with self._lock:
            if urn not in self.services:
                raise NotFoundError(f"unknown service: {urn}")
            del self.services[urn]
            if self._db is not None:
                self._db.execute("DELETE FROM wh_services WHERE urn = ?", (urn,))

    def delete_experiment(self, urn: str) -> None:
        with self._lock:
            if urn not in self.experiments:
                raise NotFoundError(f"unknown experiment: {urn}")
            del self.experiments[urn]
            if self._db is not None:
                self._db.execute("DELETE FROM wh_experiments WHERE urn = ?", (urn,))

    # -- annotations -------------------------------------------------------

    def annotate(
        self,
        asset_urn: str,
        tag_urn: str,
        annotator: str,
        note: float | int | str,
        timestamp: datetime | None = None,
        location: tuple[float, float] | None = None,
    ) -> Annotation:
        kind = annotator_kind(annotator)
        _check_note(note)
        _check_location(location)
        if not asset_urn:
            raise ValidationError("asset URN must be non-empty")
        timestamp = timestamp or utc_now()
        with self._lock:
            if tag_urn not in self.tags:
                raise NotFoundError(f"unknown tag: {tag_urn}")
            annotation = Annotation(
                id=uuid.uuid4().hex,
                asset_urn=asset_urn,
                tag_urn=tag_urn,
                annotator=annotator,
                note=note,
                timestamp=timestamp,
                location=location,
                validation=VALIDATION_UNREVIEWED if kind == "machine" else VALIDATION_CONFIRMED,
            )
            if annotation.key() in self._by_key:
                raise ConflictError(
                    f"duplicate annotation for {asset_urn} / {tag_urn} at {format_iso(timestamp)}"
                )
            self.annotations[annotation.id] = annotation
            self._by_key[annotation.key()] = annotation.id
            self._bump_aggregate(annotation, +1)
            self._persist_annotation(annotation)
        self._mark_dirty()
        return annotation

    def get_annotation(self, annotation_id: str) -> Annotation:
        with self._lock:
            annotation = self.annotations.get(annotation_id)
            if annotation is None:
                raise NotFoundError(f"unknown annotation: {annotation_id}")
            return annotation

    def get_annotations(
        self,
        asset_urn: str,
        interval: tuple[datetime, datetime] | None = None,
        tag_domain: str | None = None,
    ) -> list[Annotation]:
        """Annotations of one asset, timestamp-ascending; unknown assets are
        simply empty (assets are external)."""
        if interval is not None and interval[0] > interval[1]:
            raise ValidationError("interval start is after its end")
        with self._lock:
            if tag_domain is not None and tag_domain not in self.domains:
                raise NotFoundError(f"unknown tag domain: {tag_domain}")
            out = []
            for annotation in self.annotations.values():
                if annotation.asset_urn != asset_urn:
                    continue
                if interval is not None and not (interval[0] <= annotation.timestamp <= interval[1]):
                    continue
                if tag_domain is not None and self.tags[annotation.tag_urn].domain_urn != tag_domain:
                    continue
                out.append(annotation)
        out.sort(key=lambda a: (a.timestamp, a.id))
        return out

    def list_annotations(self, newest_first: bool = True, limit: int | None = None) -> list[Annotation]:
        """Global annotation feed, newest first by default."""
        with self._lock:
            out = sorted(
                self.annotations.values(),
                key=lambda a: (a.timestamp, a.id),
                reverse=newest_first,
            )
        return out[:limit] if limit else out

    def find_assets(
        self,
        tag_urns: Iterable[str],
        bbox: tuple[float, float, float, float] | None = None,
        interval: tuple[datetime, datetime] | None = None,
        include_rejected: bool = False,
    ) -> list[AssetMatch]:
        """Assets carrying at least one matching annotation per requested tag
        (conjunctive), ordered by descending total count then ascending URN."""
        requested = list(dict.fromkeys(tag_urns))
        if not requested:
            raise ValidationError("find_assets needs at least one tag URN")
        if interval is not None and interval[0] > interval[1]:
            raise ValidationError("interval start is after its end")
        if bbox is not None:
            lat_min, lon_min, lat_max, lon_max = bbox
            if lat_min > lat_max or lon_min > lon_max:
                raise ValidationError(f"invalid bbox: {bbox}")
        with self._lock:
            for urn in requested:
                if urn not in self.tags:
                    raise NotFoundError(f"unknown tag: {urn}")
            per_asset: dict[str, dict[str, int]] = {}
            for annotation in self.annotations.values():
                if annotation.tag_urn not in requested:
                    continue
                if not include_rejected and annotation.validation == VALIDATION_REJECTED:
                    continue
                if interval is not None and not (interval[0] <= annotation.timestamp <= interval[1]):
                    continue
                if bbox is not None:
                    if annotation.location is None:
                        continue
                    lat, lon = annotation.location
                    if not (bbox[0] <= lat <= bbox[2] and bbox[1] <= lon <= bbox[3]):
                        continue
                counts = per_asset.setdefault(annotation.asset_urn, {})
                counts[annotation.tag_urn] = counts.get(annotation.tag_urn, 0) + 1
        matches = [
            AssetMatch(asset_urn=asset, tag_counts=counts, total=sum(counts.values()))
            for asset, counts in per_asset.items()
            if all(counts.get(urn, 0) >= 1 for urn in requested)
        ]
        matches.sort(key=lambda m: (-m.total, m.asset_urn))
        return matches

    def review_annotation(self, annotation_id: str, verdict: str, user_id: str) -> Annotation:
        if verdict not in (VALIDATION_CONFIRMED, VALIDATION_REJECTED):
            raise ValidationError(f"verdict must be confirmed or rejected, got {verdict!r}")
        with self._lock:
            annotation = self.get_annotation(annotation_id)
            was_rejected = annotation.validation == VALIDATION_REJECTED
            annotation.validation = verdict
            annotation.reviewed_by = user_id
            now_rejected = verdict == VALIDATION_REJECTED
            if was_rejected != now_rejected:
                self._bump_aggregate(annotation, +1 if was_rejected else -1)
                self._refresh_latest(annotation.asset_urn, annotation.tag_urn)
            self._persist_annotation(annotation)
        self._mark_dirty()
        return annotation

    def delete_annotation(self, annotation_id: str, requester: str) -> None:
        """Deletion is reserved for the annotation's creator."""
        with self._lock:
            annotation = self.get_annotation(annotation_id)
            if requester != annotation.annotator:
                raise AuthorizationError(
                    f"only the creator ({annotation.annotator}) may delete this annotation"
                )
            del self.annotations[annotation_id]
            del self._by_key[annotation.key()]
            if annotation.validation != VALIDATION_REJECTED:
                self._bump_aggregate(annotation, -1)
            self._refresh_latest(annotation.asset_urn, annotation.tag_urn)
            if self._db is not None:
                self._db.execute("DELETE FROM wh_annotations WHERE id = ?", (annotation_id,))
        self._mark_dirty()

    def suggest_tags(self, domain_urn: str) -> list[Tag]:
        """Domain tags ordered by descending non-rejected usage, ties by
        insertion order."""
        with self._lock:
            tags = self.domain_tags(domain_urn)
            usage: dict[str, int] = {t.urn: 0 for t in tags}
            for (_, tag_urn), count in self._counts.items():
                if tag_urn in usage:
                    usage[tag_urn] += count
        return sorted(tags, key=lambda t: (-usage[t.urn], t.seq))

    # -- aggregates & discovery export ------------------------------------

    def _bump_aggregate(self, annotation: Annotation, delta: int) -> None:
        key = (annotation.asset_urn, annotation.tag_urn)
        count = self._counts.get(key, 0) + delta
        if count <= 0:
            self._counts.pop(key, None)
            self._latest.pop(key, None)
        else:
            self._counts[key] = count
            if delta > 0:
                existing = self._latest.get(key)
                if existing is None or annotation.timestamp > existing:
                    self._latest[key] = annotation.timestamp

    def _refresh_latest(self, asset_urn: str, tag_urn: str) -> None:
        key = (asset_urn, tag_urn)
        stamps = [
            a.timestamp
            for a in self.annotations.values()
            if a.asset_urn == asset_urn
            and a.tag_urn == tag_urn
            and a.validation != VALIDATION_REJECTED
        ]
        if stamps:
            self._latest[key] = max(stamps)
        else:
            self._latest.pop(key, None)

    def recompute_aggregates(self) -> tuple[dict, dict]:
        """From-scratch aggregate computation, for audits and tests."""
        counts: dict[tuple[str, str], int] = {}
        latest: dict[tuple[str, str], datetime] = {}
        with self._lock:
            for annotation in self.annotations.values():
                if annotation.validation == VALIDATION_REJECTED:
                    continue
                key = (annotation.asset_urn, annotation.tag_urn)
                counts[key] = counts.get(key, 0) + 1
                if key not in latest or annotation.timestamp > latest[key]:
                    latest[key] = annotation.timestamp
        return counts, latest

    def discovery_export(self) -> list[dict]:
        """Aggregated per-asset tag summary (non-rejected only)."""
        with self._lock:
            per_asset: dict[str, list[tuple[str, int, datetime]]] = {}
            for (asset, tag_urn), count in self._counts.items():
                per_asset.setdefault(asset, []).append((tag_urn, count, self._latest[(asset, tag_urn)]))
        out = []
        for asset in sorted(per_asset):
            entries = sorted(per_asset[asset], key=lambda e: (-e[1], e[0]))
            out.append(
                {
                    "assetUrn": asset,
                    "tags": [
                        {"urn": urn, "count": count, "latest": format_iso(latest)}
                        for urn, count, latest in entries
                    ],
                }
            )
        return out

    def _mark_dirty(self) -> None:
        if self._webhook is None:
            return
        with self._lock:
            self._dirty = True
            if self._push_timer is None:
                self._push_timer = threading.Timer(self._debounce, self._push_export)
                self._push_timer.daemon = True
                self._push_timer.start()

    def _push_export(self) -> None:
        with self._lock:
            self._push_timer = None
            if not self._dirty:
                return
            self._dirty = False
        payload = self.discovery_export()
        transport = self._webhook_transport
        try:
            if transport is not None:
                status = transport(self._webhook, payload)
            else:
                import requests

                status = requests.post(self._webhook, json=payload, timeout=5.0).status_code
            if 200 <= status < 300:
                self.stats["discovery_pushes"] += 1
            else:
                self.stats["discovery_failures"] += 1
        except Exception as exc:
            self.stats["discovery_failures"] += 1
            log.warning("discovery export push failed: %s", exc)

    def flush_discovery(self) -> None:
        with self._lock:
            timer = self._push_timer
            if timer is not None:
                timer.cancel()
                self._push_timer = None
        self._push_export()

    # -- integrity ---------------------------------------------------------

    def audit(self) -> list[str]:
        """Full-scan consistency check; returns human-readable violations."""
        problems = []
        with self._lock:
            for tag in self.tags.values():
                domain = self.domains.get(tag.domain_urn)
                if domain is None:
                    problems.append(f"tag {tag.urn} references missing domain {tag.domain_urn}")
                elif tag.urn not in domain.tag_urns:
                    problems.append(f"tag {tag.urn} missing from its domain's tag list")
                if not tag.urn.startswith(tag.domain_urn + ":"):
                    problems.append(f"tag {tag.urn} URN does not extend {tag.domain_urn}")
            for domain in self.domains.values():
                for tag_urn in domain.tag_urns:
                    if tag_urn not in self.tags:
                        problems.append(f"domain {domain.urn} lists missing tag {tag_urn}")
            for holder in list(self.services.values()) + list(self.experiments.values()):
                for domain_urn in holder.linked_domains:
                    if domain_urn not in self.domains:
                        problems.append(f"{holder.urn} links missing domain {domain_urn}")
            for annotation in self.annotations.values():
                if annotation.tag_urn not in self.tags:
                    problems.append(
                        f"annotation {annotation.id} references missing tag {annotation.tag_urn}"
                    )
            counts, latest = self.recompute_aggregates()
            if counts != self._counts:
                problems.append("aggregate counts diverge from recomputation")
            if latest != self._latest:
                problems.append("aggregate latest timestamps diverge from recomputation")
        return problems

    # -- persistence -------------------------------------------------------

    def _init_tables(self) -> None:
        self._db.execute(
            "CREATE TABLE IF NOT EXISTS wh_domains (urn TEXT PRIMARY KEY, name TEXT, description TEXT)"
        )
        self._db.execute(
            "CREATE TABLE IF NOT EXISTS wh_tags ("
            " urn TEXT PRIMARY KEY, domain TEXT, name TEXT, seq INTEGER)"
        )
        self._db.execute(
            "CREATE TABLE IF NOT EXISTS wh_services (urn TEXT PRIMARY KEY, name TEXT, domains TEXT)"
        )
        self._db.execute(
            "CREATE TABLE IF NOT EXISTS wh_experiments (urn TEXT PRIMARY KEY, name TEXT, domains TEXT)"
        )
        self._db.execute(
            "CREATE TABLE IF NOT EXISTS wh_annotations ("
            " id TEXT PRIMARY KEY, asset TEXT, tag TEXT, annotator TEXT, note TEXT,"
            " ts TEXT, lat REAL, lon REAL, validation TEXT, reviewed_by TEXT)"
        )

    def _load(self) -> None:
        for urn, name, description in self._db.query("SELECT urn, name, description FROM wh_domains"):
            self.domains[urn] = TagDomain(urn=urn, name=name, description=description or "")
        for urn, domain, name, seq in self._db.query(
            "SELECT urn, domain, name, seq FROM wh_tags ORDER BY seq"
        ):
            self.tags[urn] = Tag(urn=urn, name=name, domain_urn=domain, seq=seq)
            self.domains[domain].tag_urns.append(urn)
            self._seq = max(self._seq, seq + 1)
        for urn, name, domains in self._db.query("SELECT urn, name, domains FROM wh_services"):
            self.services[urn] = Service(urn=urn, name=name, linked_domains=set(json.loads(domains)))
        for urn, name, domains in self._db.query("SELECT urn, name, domains FROM wh_experiments"):
            self.experiments[urn] = Experiment(urn=urn, name=name, linked_domains=set(json.loads(domains)))
        for row in self._db.query(
            "SELECT id, asset, tag, annotator, note, ts, lat, lon, validation, reviewed_by"
            " FROM wh_annotations"
        ):
            ann_id, asset, tag, annotator, note, ts, lat, lon, validation, reviewed_by = row
            annotation = Annotation(
                id=ann_id,
                asset_urn=asset,
                tag_urn=tag,
                annotator=annotator,
                note=json.loads(note),
                timestamp=parse_iso(ts),
                location=(lat, lon) if lat is not None else None,
                validation=validation,
                reviewed_by=reviewed_by,
            )
            self.annotations[ann_id] = annotation
            self._by_key[annotation.key()] = ann_id
            if annotation.validation != VALIDATION_REJECTED:
                self._bump_aggregate(annotation, +1)

    def _persist_domain(self, domain: TagDomain) -> None:
        if self._db is not None:
            self._db.execute(
                "INSERT OR REPLACE INTO wh_domains (urn, name, description) VALUES (?, ?, ?)",
                (domain.urn, domain.name, domain.description),
            )

    def _persist_tag(self, tag: Tag) -> None:
        if self._db is not None:
            self._db.execute(
                "INSERT OR REPLACE INTO wh_tags (urn, domain, name, seq) VALUES (?, ?, ?, ?)",
                (tag.urn, tag.domain_urn, tag.name, tag.seq),
            )

    def _persist_link_holder(self, kind: str, holder) -> None:
        if self._db is not None:
            table = "wh_services" if kind == "service" else "wh_experiments"
            self._db.execute(
                f"INSERT OR REPLACE INTO {table} (urn, name, domains) VALUES (?, ?, ?)",
                (holder.urn, holder.name, json.dumps(sorted(holder.linked_domains))),
            )

    def _persist_annotation(self, annotation: Annotation) -> None:
        if self._db is not None:
            lat, lon = annotation.location if annotation.location else (None, None)
            self._db.execute(
                "INSERT OR REPLACE INTO wh_annotations"
                " (id, asset, tag, annotator, note, ts, lat, lon, validation, reviewed_by)"
                " VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                (
                    annotation.id,
                    annotation.asset_urn,
                    annotation.tag_urn,
                    annotation.annotator,
                    json.dumps(annotation.note),
                    format_iso(annotation.timestamp),
                    lat,
                    lon,
                    annotation.validation,
                    annotation.reviewed_by,
                ),
            )
