"""Minimal NGSI-flavored context broker.

Stores the latest attribute values per entity, evaluates query-filtered
subscriptions on every update, and pushes webhook notifications over HTTP
POST.  Delivery is asynchronous on a dedicated worker thread so a slow or
dead callback never blocks ingest; failed deliveries are retried twice
(200 ms, then 1 s) and then dropped with a counted failure.

Only the latest value per attribute lives here; history belongs to the
series store, wired in through update hooks.
"""

from __future__ import annotations

import logging
import math
import queue
import re
import threading
import time
import uuid
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Iterable
from urllib.parse import urlparse

import requests

from .errors import NotFoundError, ProtocolError, ValidationError
from .timeutil import utc_now

log = logging.getLogger(__name__)

_URN_RE = re.compile(r"^urn:[A-Za-z0-9][A-Za-z0-9-]*:\S+$")

# transport(url, json_payload) -> HTTP status code; raises on connection failure
Transport = Callable[[str, dict], int]


def http_transport(timeout: float = 5.0) -> Transport:
    def send(url: str, payload: dict) -> int:
        response = requests.post(url, json=payload, timeout=timeout)
        return response.status_code

    return send


@dataclass
class AttributeValue:
    value: float | int | str
    timestamp: datetime
    location: tuple[float, float] | None = None  # (lat, lon)

    def validate(self) -> None:
        if isinstance(self.value, bool) or not isinstance(self.value, (int, float, str)):
            raise ValidationError(f"attribute value must be a number or string, got {self.value!r}")
        if isinstance(self.value, (int, float)) and not math.isfinite(self.value):
            raise ValidationError(f"attribute value must be finite, got {self.value!r}")
        if self.location is not None:
            lat, lon = self.location
            if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                raise ValidationError(f"location out of range: {self.location}")


@dataclass
class ContextEntity:
    id: str
    entity_type: str
    attributes: dict[str, AttributeValue] = field(default_factory=dict)
    version: int = 0
    last_location: tuple[float, float] | None = None


class ContextQuery:
    """Selection predicate over entities/updates.

    All present fields must match; an empty query matches everything.  The
    id pattern is anchored (full match).  The attrs filter matches when the
    entity (or the update) carries at least one of the named attributes.
    bbox is (latMin, lonMin, latMax, lonMax).
    """

    def __init__(
        self,
        id_pattern: str | None = None,
        entity_type: str | None = None,
        attrs: Iterable[str] | None = None,
        bbox: tuple[float, float, float, float] | None = None,
    ) -> None:
        self.id_pattern = id_pattern
        self.entity_type = entity_type
        self.attrs = frozenset(attrs) if attrs is not None else None
        self.bbox = tuple(bbox) if bbox is not None else None
        if id_pattern is not None:
            try:
                self._compiled = re.compile(id_pattern)
            except re.error as exc:
                raise ValidationError(f"invalid idPattern: {exc}") from exc
        else:
            self._compiled = None
        if self.bbox is not None:
            lat_min, lon_min, lat_max, lon_max = self.bbox
            if lat_min > lat_max or lon_min > lon_max:
                raise ValidationError(f"invalid bbox: {self.bbox}")

    def _location_matches(self, location: tuple[float, float] | None) -> bool:
        if self.bbox is None:
            return True
        if location is None:
            return False
        lat_min, lon_min, lat_max, lon_max = self.bbox
        return lat_min <= location[0] <= lat_max and lon_min <= location[1] <= lon_max

    def _base_matches(self, entity: ContextEntity) -> bool:
        if self._compiled is not None and not self._compiled.fullmatch(entity.id):
            return False
        if self.entity_type is not None and entity.entity_type != self.entity_type:
            return False
        return True

    def matches_entity(self, entity: ContextEntity) -> bool:
        if not self._base_matches(entity):
            return False
        if self.attrs is not None and not (self.attrs & entity.attributes.keys()):
            return False
        return self._location_matches(entity.last_location)

    def matches_update(self, entity: ContextEntity, updated: dict[str, AttributeValue]) -> bool:
        """Evaluated against the post-update entity state; bbox prefers the
        update's own location over the entity's last known one."""
        if not self._base_matches(entity):
            return False
        if self.attrs is not None and not (self.attrs & updated.keys()):
            return False
        update_location = next(
            (av.location for av in updated.values() if av.location is not None), None
        )
        return self._location_matches(update_location or entity.last_location)

    def to_dict(self) -> dict:
        out: dict = {}
        if self.id_pattern is not None:
            out["idPattern"] = self.id_pattern
        if self.entity_type is not None:
            out["entityType"] = self.entity_type
        if self.attrs is not None:
            out["attrs"] = sorted(self.attrs)
        if self.bbox is not None:
            out["bbox"] = list(self.bbox)
        return out

    @classmethod
    def from_dict(cls, data: dict | None) -> "ContextQuery":
        data = data or {}
        bbox = data.get("bbox")
        return cls(
            id_pattern=data.get("idPattern"),
            entity_type=data.get("entityType") or data.get("type"),
            attrs=data.get("attrs"),
            bbox=tuple(bbox) if bbox else None,
        )


@dataclass
class Subscription:
    id: str
    query: ContextQuery
    callback_url: str
    created_at: datetime


def attribute_to_wire(attr: AttributeValue) -> dict:
    from .timeutil import format_iso

    metadata: dict = {"timestamp": format_iso(attr.timestamp)}
    if attr.location is not None:
        metadata["location"] = {"lat": attr.location[0], "lon": attr.location[1]}
    return {"value": attr.value, "metadata": metadata}


def entity_to_wire(entity: ContextEntity, attrs: dict[str, AttributeValue] | None = None) -> dict:
    out: dict = {"id": entity.id, "type": entity.entity_type}
    for name, attr in (attrs if attrs is not None else entity.attributes).items():
        out[name] = attribute_to_wire(attr)
    return out


class ContextBroker:
    def __init__(
        self,
        transport: Transport | None = None,
        retry_backoffs: tuple[float, ...] = (0.2, 1.0),
        request_timeout: float = 5.0,
    ) -> None:
        self._transport = transport or http_transport(request_timeout)
        self._retry_backoffs = retry_backoffs
        self._lock = threading.RLock()
        self._entities: dict[str, ContextEntity] = {}
        self._subscriptions: dict[str, Subscription] = {}
        self._update_hooks: list[Callable[[str, str, dict[str, AttributeValue]], None]] = []
        self.stats = {
            "updates": 0,
            "notifications_delivered": 0,
            "notifications_dropped": 0,
            "delivery_attempts": 0,
            "hook_errors": 0,
        }
        self._queue: queue.Queue = queue.Queue()
        self._worker = threading.Thread(target=self._delivery_loop, daemon=True)
        self._worker.start()

    # -- ingest ------------------------------------------------------------

    def add_update_hook(self, hook: Callable[[str, str, dict[str, AttributeValue]], None]) -> None:
        """Synchronous per-update callback (history sink); errors are counted,
        never propagated to the caller."""
        self._update_hooks.append(hook)

    def update_entity(
        self, entity_id: str, entity_type: str, attrs: dict[str, AttributeValue]
    ) -> int:
        if not entity_id or not _URN_RE.match(entity_id):
            raise ProtocolError(f"malformed entity URN: {entity_id!r}")
        if not attrs:
            raise ValidationError("update carries no attributes")
        now = utc_now()
        for name, attr in attrs.items():
            if not name:
                raise ValidationError("attribute name must be non-empty")
            if attr.timestamp is None:
                attr.timestamp = now
            attr.validate()

        with self._lock:
            entity = self._entities.get(entity_id)
            if entity is None:
                entity = ContextEntity(id=entity_id, entity_type=entity_type or "entity")
                self._entities[entity_id] = entity
            if entity_type:
                entity.entity_type = entity_type
            entity.attributes.update(attrs)
            for attr in attrs.values():
                if attr.location is not None:
                    entity.last_location = attr.location
            entity.version += 1
            version = entity.version
            self.stats["updates"] += 1
            matching = [
                sub for sub in self._subscriptions.values()
                if sub.query.matches_update(entity, attrs)
            ]
            payloads = [
                (sub, {"subscriptionId": sub.id, "data": [entity_to_wire(entity, attrs)]})
                for sub in matching
            ]

        for hook in self._update_hooks:
            try:
                hook(entity_id, entity.entity_type, attrs)
            except Exception:
                self.stats["hook_errors"] += 1
                log.exception("update hook failed for %s", entity_id)
        for sub, payload in payloads:
            self._queue.put((sub, payload))
        return version

    # -- read side ---------------------------------------------------------

    def query_entities(self, query: ContextQuery) -> list[ContextEntity]:
        with self._lock:
            matches = [e for e in self._entities.values() if query.matches_entity(e)]
            snapshot = [
                ContextEntity(
                    id=e.id,
                    entity_type=e.entity_type,
                    attributes=dict(e.attributes),
                    version=e.version,
                    last_location=e.last_location,
                )
                for e in matches
            ]
        snapshot.sort(key=lambda e: e.id)
        return snapshot

    def get_entity(self, entity_id: str) -> ContextEntity:
        with self._lock:
            entity = self._entities.get(entity_id)
            if entity is None:
                raise NotFoundError(f"unknown entity: {entity_id}")
            return ContextEntity(
                id=entity.id,
                entity_type=entity.entity_type,
                attributes=dict(entity.attributes),
                version=entity.version,
                last_location=entity.last_location,
            )

    # -- subscriptions -----------------------------------------------------

    def subscribe(self, query: ContextQuery, callback_url: str) -> Subscription:
        parsed = urlparse(callback_url)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise ValidationError(f"invalid callback URL: {callback_url!r}")
        sub = Subscription(
            id=uuid.uuid4().hex,
            query=query,
            callback_url=callback_url,
            created_at=utc_now(),
        )
        with self._lock:
            self._subscriptions[sub.id] = sub
        return sub

    def unsubscribe(self, subscription_id: str) -> None:
        with self._lock:
            if subscription_id not in self._subscriptions:
                raise NotFoundError(f"unknown subscription: {subscription_id}")
            del self._subscriptions[subscription_id]

    def list_subscriptions(self) -> list[Subscription]:
        with self._lock:
            return sorted(self._subscriptions.values(), key=lambda s: s.created_at)

    # -- delivery ----------------------------------------------------------

    def _delivery_loop(self) -> None:
        while True:
            item = self._queue.get()
            if item is None:
                self._queue.task_done()
                return
            sub, payload = item
            try:
                self._deliver(sub, payload)
            finally:
                self._queue.task_done()

    def _deliver(self, sub: Subscription, payload: dict) -> None:
        for attempt, backoff in enumerate((0.0,) + self._retry_backoffs):
            if backoff:
                time.sleep(backoff)
            self.stats["delivery_attempts"] += 1
            try:
                status = self._transport(sub.callback_url, payload)
            except Exception as exc:
                log.warning(
                    "notify %s attempt %d failed: %s", sub.callback_url, attempt + 1, exc
                )
                continue
            if 200 <= status < 300:
                self.stats["notifications_delivered"] += 1
                return
            log.warning(
                "notify %s attempt %d got status %d", sub.callback_url, attempt + 1, status
            )
        self.stats["notifications_dropped"] += 1

    def flush(self) -> None:
        """Block until all queued notifications are delivered or dropped."""
        self._queue.join()

    def close(self) -> None:
        self.flush()
        self._queue.put(None)
        self._worker.join(timeout=5.0)
