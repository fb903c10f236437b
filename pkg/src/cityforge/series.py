"""Historical series store, the analytics data sink.

The broker keeps only latest values; every numeric update lands here as one
``(timestamp, value)`` point per (asset, attribute) series.  Timestamps are
unique within a series with last-writer-wins on duplicates.
"""

from __future__ import annotations

import math
import threading
from datetime import datetime

from .errors import ValidationError
from .storage import Database
from .timeutil import format_iso, parse_iso

Point = tuple[datetime, float]


class SeriesStore:
    def __init__(self, db: Database | None = None) -> None:
        self._db = db
        self._lock = threading.RLock()
        self._series: dict[tuple[str, str], dict[datetime, float]] = {}
        if db is not None:
            db.execute(
                "CREATE TABLE IF NOT EXISTS series_points ("
                " asset TEXT, attr TEXT, ts TEXT, value REAL,"
                " PRIMARY KEY (asset, attr, ts))"
            )
            for asset, attr, ts, value in db.query(
                "SELECT asset, attr, ts, value FROM series_points"
            ):
                self._series.setdefault((asset, attr), {})[parse_iso(ts)] = value

    def record_point(self, asset_urn: str, attribute: str, timestamp: datetime, value: float) -> None:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ValidationError(f"series value must be a finite number, got {value!r}")
        if not asset_urn or not attribute:
            raise ValidationError("asset_urn and attribute must be non-empty")
        with self._lock:
            self._series.setdefault((asset_urn, attribute), {})[timestamp] = float(value)
            if self._db is not None:
                self._db.execute(
                    "INSERT INTO series_points (asset, attr, ts, value) VALUES (?, ?, ?, ?)"
                    " ON CONFLICT (asset, attr, ts) DO UPDATE SET value = excluded.value",
                    (asset_urn, attribute, format_iso(timestamp), float(value)),
                )

    def get_series(
        self,
        asset_urn: str,
        attribute: str,
        start: datetime | None = None,
        end: datetime | None = None,
    ) -> list[Point]:
        """Sorted points, optionally restricted to the half-open [start, end)."""
        with self._lock:
            points = self._series.get((asset_urn, attribute), {})
            selected = [
                (ts, value)
                for ts, value in points.items()
                if (start is None or ts >= start) and (end is None or ts < end)
            ]
        selected.sort(key=lambda p: p[0])
        return selected

    def list_series(self) -> list[tuple[str, str, int]]:
        """(asset, attribute, point count) triples, sorted."""
        with self._lock:
            out = [(a, attr, len(pts)) for (a, attr), pts in self._series.items()]
        out.sort()
        return out
