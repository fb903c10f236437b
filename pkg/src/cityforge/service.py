"""Wires broker, jobs, warehouse, series store and analytics into one
process, plus the uvicorn runner behind `serve`.

Broker notifications addressed at this instance's own /notify/{jobId}
endpoint are dispatched in-process instead of over a socket, so a job's
subscription works before (and without) the HTTP server being reachable.
"""

from __future__ import annotations

import logging
import math
import os
import re
import socket
import threading
from urllib.parse import urlparse

from .broker import AttributeValue, ContextBroker, http_transport
from .errors import CityForgeError, ProtocolError
from .jobs import JobEngine
from .series import SeriesStore
from .storage import Database
from .warehouse import WarehouseStore

log = logging.getLogger(__name__)

_NOTIFY_RE = re.compile(r"/notify/(\d+)$")


class CityForge:
    def __init__(
        self,
        data_dir: str | None = None,
        notify_base: str = "http://127.0.0.1:8000",
        discovery_webhook: str | None = None,
        discovery_debounce: float = 2.0,
        transport=None,
    ) -> None:
        self.notify_base = notify_base.rstrip("/")
        self.db = None
        if data_dir is not None:
            os.makedirs(data_dir, exist_ok=True)
            self.db = Database(os.path.join(data_dir, "cityforge.db"))
        self.series = SeriesStore(self.db)
        self.warehouse = WarehouseStore(
            self.db,
            discovery_webhook=discovery_webhook,
            discovery_debounce=discovery_debounce,
        )
        self.broker = ContextBroker(transport=transport or self._make_transport())
        self.broker.add_update_hook(self._history_sink)
        self.jobs = JobEngine(self.broker, self.warehouse, self.db, self.notify_base)

    def _make_transport(self):
        fallback = http_transport()
        own_host = urlparse(self.notify_base).netloc

        def send(url: str, payload: dict) -> int:
            parsed = urlparse(url)
            match = _NOTIFY_RE.search(parsed.path)
            if match and parsed.netloc == own_host:
                try:
                    self.jobs.process_notification(int(match.group(1)), payload)
                    return 204
                except CityForgeError as exc:
                    log.warning("local notification dispatch failed: %s", exc)
                    return exc.http_status
            return fallback(url, payload)

        return send

    def _history_sink(self, entity_id: str, entity_type: str, attrs: dict) -> None:
        for name, attr in attrs.items():
            if isinstance(attr.value, bool) or not isinstance(attr.value, (int, float)):
                continue
            if not math.isfinite(attr.value):
                continue
            self.series.record_point(entity_id, name, attr.timestamp, attr.value)

    def close(self) -> None:
        self.broker.close()
        self.warehouse.flush_discovery()
        if self.db is not None:
            self.db.close()


def port_is_free(host: str, port: int) -> bool:
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
        return True
    except OSError:
        return False
    finally:
        probe.close()


def serve(
    host: str = "127.0.0.1",
    port: int = 8000,
    data_dir: str | None = None,
    discovery_webhook: str | None = None,
    console_dir: str | None = None,
) -> None:
    """Run the full service; raises OSError when the port is taken."""
    import uvicorn

    from .api import build_app

    if not port_is_free(host, port):
        raise OSError(f"port {port} on {host} is already in use")
    service = CityForge(
        data_dir=data_dir,
        notify_base=f"http://{host}:{port}",
        discovery_webhook=discovery_webhook,
    )
    app = build_app(service, console_dir=console_dir)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        service.close()
