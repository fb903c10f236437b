"""UTC time helpers: ISO-8601 parsing/formatting and a monotonic wall clock.

All timestamps in the system are timezone-aware UTC datetimes; the wire and
CSV formats use ISO-8601 with a trailing ``Z``.  Python 3.10's
``fromisoformat`` does not accept ``Z``, hence the parse shim.
"""

from __future__ import annotations

import threading
from datetime import datetime, timedelta, timezone

from .errors import ValidationError

UTC = timezone.utc


def utc_now() -> datetime:
    return datetime.now(tz=UTC)


def parse_iso(text: str) -> datetime:
    """Parse an ISO-8601 instant; naive values are taken as UTC."""
    if not isinstance(text, str) or not text:
        raise ValidationError(f"invalid timestamp: {text!r}")
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise ValidationError(f"invalid timestamp: {text!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=UTC)
    return dt.astimezone(UTC)


def format_iso(dt: datetime) -> str:
    """Render a UTC instant as ``YYYY-MM-DDTHH:MM:SS[.ffffff]Z``."""
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=UTC)
    dt = dt.astimezone(UTC)
    text = dt.isoformat()
    return text[:-6] + "Z" if text.endswith("+00:00") else text


def epoch_seconds(dt: datetime) -> float:
    return dt.timestamp()


def from_epoch(seconds: float) -> datetime:
    return datetime.fromtimestamp(seconds, tz=UTC)


class MonotonicClock:
    """Wall clock whose readings strictly increase within a process.

    Machine annotations are keyed partly by timestamp; two results produced
    in the same microsecond must still get distinct instants.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._last = utc_now()

    def now(self) -> datetime:
        with self._lock:
            current = utc_now()
            if current <= self._last:
                current = self._last + timedelta(microseconds=1)
            self._last = current
            return current


produced_clock = MonotonicClock()
