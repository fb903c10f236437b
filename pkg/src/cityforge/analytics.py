"""Time-series analytics: alignment, correlation, profiles, gap detection.

Everything here is a pure function over time-ordered ``(timestamp, value)``
sequences; storage and HTTP live elsewhere.  Bucketing and calendar math are
strictly UTC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, datetime
from typing import Callable, Sequence

from .errors import ValidationError
from .timeutil import from_epoch

Point = tuple[datetime, float]

WEEKDAY_NAMES = {"MON": 0, "TUE": 1, "WED": 2, "THU": 3, "FRI": 4, "SAT": 5, "SUN": 6}


def parse_weekday_filter(text: str | None) -> set[int] | None:
    """Map a weekday selector to Python weekday numbers (Mon=0).

    Accepts a name (``SAT``), a number, ``WEEKDAYS`` (Mon-Fri), ``WEEKEND``,
    or ``ALL``/empty for no filter.
    """
    if text is None or text.strip() == "" or text.strip().upper() == "ALL":
        return None
    token = text.strip().upper()
    if token == "WEEKDAYS":
        return {0, 1, 2, 3, 4}
    if token == "WEEKEND":
        return {5, 6}
    if token in WEEKDAY_NAMES:
        return {WEEKDAY_NAMES[token]}
    if token.isdigit() and 0 <= int(token) <= 6:
        return {int(token)}
    raise ValidationError(f"unknown weekday filter: {text!r}")


@dataclass(frozen=True)
class AlignedPair:
    bucket_start: datetime
    a: float
    b: float


@dataclass(frozen=True)
class DailyCorrelation:
    day: date
    r: float | None
    pair_count: int


_AGGREGATORS: dict[str, Callable[[list[float]], float]] = {
    "mean": lambda vs: math.fsum(vs) / len(vs),
    "last": lambda vs: vs[-1],
    "min": min,
    "max": max,
}


def _bucketize(points: Sequence[Point], bucket_seconds: int, aggregator: str) -> dict[int, float]:
    agg = _AGGREGATORS.get(aggregator)
    if agg is None:
        raise ValidationError(f"unknown aggregator: {aggregator!r}")
    buckets: dict[int, list[float]] = {}
    for ts, value in points:
        buckets.setdefault(int(ts.timestamp() // bucket_seconds), []).append(value)
    return {idx: agg(values) for idx, values in buckets.items()}


def align(
    series_a: Sequence[Point],
    series_b: Sequence[Point],
    bucket_seconds: int = 600,
    aggregator: str = "mean",
) -> list[AlignedPair]:
    """Per-bucket aggregate of each series, inner-joined on bucket."""
    if bucket_seconds <= 0:
        raise ValidationError("bucket_seconds must be > 0")
    a_buckets = _bucketize(series_a, bucket_seconds, aggregator)
    b_buckets = _bucketize(series_b, bucket_seconds, aggregator)
    common = sorted(a_buckets.keys() & b_buckets.keys())
    return [
        AlignedPair(from_epoch(idx * bucket_seconds), a_buckets[idx], b_buckets[idx])
        for idx in common
    ]


def _pair_values(pairs: Sequence) -> tuple[list[float], list[float]]:
    xs, ys = [], []
    for pair in pairs:
        if isinstance(pair, AlignedPair):
            xs.append(pair.a)
            ys.append(pair.b)
        else:
            xs.append(float(pair[0]))
            ys.append(float(pair[1]))
    return xs, ys


def pearson(pairs: Sequence) -> float | None:
    """Two-pass sample Pearson coefficient.

    Returns None (the undefined marker) for fewer than 2 pairs or when either
    side has zero variance; an undefined r is never reported as 0.
    """
    xs, ys = _pair_values(pairs)
    n = len(xs)
    if n < 2:
        return None
    mean_x = math.fsum(xs) / n
    mean_y = math.fsum(ys) / n
    cov = math.fsum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    var_x = math.fsum((x - mean_x) ** 2 for x in xs)
    var_y = math.fsum((y - mean_y) ** 2 for y in ys)
    if var_x == 0.0 or var_y == 0.0:
        return None
    r = cov / math.sqrt(var_x * var_y)
    return max(-1.0, min(1.0, r))


def daily_pearson(
    series_a: Sequence[Point],
    series_b: Sequence[Point],
    bucket_seconds: int = 600,
    min_pairs: int = 20,
) -> list[DailyCorrelation]:
    """Pearson per UTC calendar day over aligned buckets.

    Days with fewer than ``min_pairs`` pairs, or zero variance on either
    side, carry the undefined marker.
    """
    pairs = align(series_a, series_b, bucket_seconds)
    by_day: dict[date, list[AlignedPair]] = {}
    for pair in pairs:
        by_day.setdefault(pair.bucket_start.date(), []).append(pair)
    out = []
    for day in sorted(by_day):
        day_pairs = by_day[day]
        r = pearson(day_pairs) if len(day_pairs) >= min_pairs else None
        out.append(DailyCorrelation(day=day, r=r, pair_count=len(day_pairs)))
    return out


def hourly_profile(
    points: Sequence[Point],
    weekdays: set[int] | None = None,
) -> list[float | None]:
    """Mean value per hour of day (UTC), optionally restricted to weekdays.

    Hours with no data carry None.  Raises when the filter leaves no points.
    """
    buckets: dict[int, list[float]] = {}
    for ts, value in points:
        if weekdays is not None and ts.weekday() not in weekdays:
            continue
        buckets.setdefault(ts.hour, []).append(value)
    if not buckets:
        raise ValidationError("no data for the requested weekday filter")
    return [
        math.fsum(buckets[h]) / len(buckets[h]) if h in buckets else None
        for h in range(24)
    ]


def detect_gaps(
    points: Sequence[Point],
    max_gap_seconds: float,
) -> list[tuple[datetime, datetime]]:
    """Intervals between consecutive points longer than ``max_gap_seconds``.

    Series edges are not gaps; an empty or single-point series yields none.
    """
    if max_gap_seconds <= 0:
        raise ValidationError("max_gap_seconds must be > 0")
    ordered = sorted(points, key=lambda p: p[0])
    gaps = []
    for (prev_ts, _), (next_ts, _) in zip(ordered, ordered[1:]):
        if (next_ts - prev_ts).total_seconds() > max_gap_seconds:
            gaps.append((prev_ts, next_ts))
    return gaps


def seasonal_ratio(
    points: Sequence[Point],
    period_a: tuple[datetime, datetime],
    period_b: tuple[datetime, datetime],
) -> float | None:
    """mean(values in A) / mean(values in B) over half-open [start, end) periods."""
    def period_values(period: tuple[datetime, datetime]) -> list[float]:
        start, end = period
        if start > end:
            raise ValidationError("period start is after its end")
        return [v for ts, v in points if start <= ts < end]

    values_a = period_values(period_a)
    values_b = period_values(period_b)
    if not values_a or not values_b:
        raise ValidationError("seasonal_ratio requires data in both periods")
    mean_a = math.fsum(values_a) / len(values_a)
    mean_b = math.fsum(values_b) / len(values_b)
    if mean_b == 0.0:
        return None
    return mean_a / mean_b
