"""Deterministic multi-stream city dataset generator.

All daily shapes are piecewise-cosine interpolations through anchor points
(hour, level); parking anchors are fractions of capacity.  PCG64 seeded per
stream via SeedSequence spawning, so adding streams or faults never shifts
another stream's draws and identical configs yield byte-identical CSVs.
"""

from __future__ import annotations

import csv
import json
import math
import os
from datetime import date, timedelta

import numpy as np

from ..timeutil import format_iso, from_epoch
from .config import STREAMS, CityConfig

# Parking availability, fraction of capacity.  Peak just after 03:00 with a
# steep approach and shallow decay so hourly binning keeps the maximum in
# bin 3; troughs mid-bin at 10:30 and 17:30.
PARKING_WEEKDAY = [
    (0.0, 0.90), (1.5, 0.88), (3.0, 0.9833), (6.5, 0.94),
    (10.5, 0.6667), (13.0, 0.7917), (17.5, 0.6333), (21.0, 0.8333),
]
# Saturday mornings stay emptier (paper-scale contrast ~96 vs ~80 spots).
PARKING_SATURDAY = [
    (0.0, 0.90), (1.5, 0.88), (3.0, 0.9833), (6.5, 0.95),
    (10.5, 0.80), (13.0, 0.78), (17.5, 0.65), (21.0, 0.8333),
]
# Sundays fill earlier (dip at 09:00) and stay occupied until evening.
PARKING_SUNDAY = [
    (0.0, 0.90), (1.5, 0.88), (3.0, 0.9833), (6.5, 0.90),
    (9.0, 0.3333), (13.0, 0.40), (17.5, 0.55), (21.0, 0.8333),
]

TRAFFIC_ANCHORS = [
    (0.0, 150.0), (4.0, 80.0), (8.5, 1800.0), (13.0, 1000.0),
    (18.5, 1900.0), (22.0, 400.0),
]

EFIELD_BASELINE = {"efield1": 0.9, "efield2": 1.6, "efield3": 1.2}
EFIELD_SPAN = {"efield1": 1.0, "efield2": 1.4, "efield3": 1.2}

# Weather chain on {0..11}: hold, drift one step (biased back toward 3), or
# redraw around mild.  The chain steps every WEATHER_SUBSTEP_SECONDS and is
# sampled at the configured rate; stickiness lives at the native resolution,
# while consecutive emitted (hourly) samples stay nearly decorrelated so the
# spurious per-day correlation against the commuter template keeps its
# sampling floor (24 pairs/day leave |r| quantiles around 0.15 even for
# independent draws).
WEATHER_STAY = 0.45
WEATHER_DRIFT = 0.25
WEATHER_DRIFT_INWARD = 0.65
WEATHER_REDRAW_MEAN = 3.2
WEATHER_REDRAW_STD = 2.2
WEATHER_SUBSTEP_SECONDS = 600

SUMMER_START = (6, 15)   # ramp down begins
SUMMER_PLATEAU = (7, 1)
SUMMER_END = (8, 31)     # ramp up begins
SCHOOL_START = (9, 15)


def cosine_template(anchors: list[tuple[float, float]], hour: float) -> float:
    """Piecewise-cosine interpolation with 24 h wraparound."""
    hour = hour % 24.0
    extended = list(anchors) + [(anchors[0][0] + 24.0, anchors[0][1])]
    if hour < extended[0][0]:
        hour += 24.0
    for (h0, v0), (h1, v1) in zip(extended, extended[1:]):
        if h0 <= hour <= h1:
            span = h1 - h0
            s = 0.0 if span == 0 else (hour - h0) / span
            return v0 + (v1 - v0) * (1.0 - math.cos(math.pi * s)) / 2.0
    return extended[-1][1]


def parking_anchors(weekday: int) -> list[tuple[float, float]]:
    if weekday == 5:
        return PARKING_SATURDAY
    if weekday == 6:
        return PARKING_SUNDAY
    return PARKING_WEEKDAY


def seasonal_factor(day: date, summer_scale: float) -> float:
    """1.0 during the school year, summer_scale at high summer, cosine ramps
    between; encodes the paper-scale winter/summer contrast."""

    def doy(month_day):
        return date(day.year, month_day[0], month_day[1]).timetuple().tm_yday

    d = day.timetuple().tm_yday
    down0, down1 = doy(SUMMER_START), doy(SUMMER_PLATEAU)
    up0, up1 = doy(SUMMER_END), doy(SCHOOL_START)
    if d <= down0 or d >= up1:
        return 1.0
    if down1 <= d <= up0:
        return summer_scale
    if d < down1:
        s = (d - down0) / (down1 - down0)
    else:
        s = 1.0 - (d - up0) / (up1 - up0)
    return 1.0 + (summer_scale - 1.0) * (1.0 - math.cos(math.pi * s)) / 2.0


def _timestamps(config: CityConfig, sampling_key: str):
    step = config.sampling_seconds[sampling_key]
    start = int(config.range_start.timestamp())
    count = config.days * 86400 // step
    return [start + k * step for k in range(count)]


def _spawn_rngs(seed: int) -> dict[str, np.random.Generator]:
    names = ["parking", "efield1", "efield2", "efield3", "traffic", "weather", "faults"]
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {name: np.random.Generator(np.random.PCG64(child)) for name, child in zip(names, children)}


def _generate_parking(config: CityConfig, rng: np.random.Generator) -> list[tuple[int, float]]:
    out = []
    cap = config.parking_capacity
    summer = 1.0 / config.winter_parking_factor
    for epoch in _timestamps(config, "parking"):
        moment = from_epoch(epoch)
        hour = moment.hour + moment.minute / 60.0 + moment.second / 3600.0
        level = cosine_template(parking_anchors(moment.weekday()), hour)
        value = cap * level * seasonal_factor(moment.date(), summer)
        value += rng.normal(0.0, config.noise_std["parking"])
        out.append((epoch, float(min(cap, max(0, int(math.floor(value + 0.5)))))))
    return out


def _generate_efield(
    config: CityConfig, stream: str, parking: list[tuple[int, float]], rng: np.random.Generator
) -> list[tuple[int, float]]:
    # Occupancy drives the field level, so the inverse coupling to parking
    # availability holds by construction.
    cap = config.parking_capacity
    by_epoch = dict(parking)
    out = []
    for epoch in _timestamps(config, "efield"):
        spots = by_epoch.get(epoch)
        if spots is None:
            # differing sampling grids: fall back to the template-free mean
            spots = cap * 0.8
        occupancy = 1.0 - spots / cap
        value = (
            EFIELD_BASELINE[stream]
            + config.coupling_efield_parking * occupancy * EFIELD_SPAN[stream]
            + rng.normal(0.0, config.noise_std["efield"])
        )
        out.append((epoch, round(value, 4)))
    return out


def _generate_traffic(config: CityConfig, rng: np.random.Generator) -> list[tuple[int, float]]:
    out = []
    summer = 1.0 / config.winter_traffic_factor
    for epoch in _timestamps(config, "traffic"):
        moment = from_epoch(epoch)
        hour = moment.hour + moment.minute / 60.0
        value = cosine_template(TRAFFIC_ANCHORS, hour) * seasonal_factor(moment.date(), summer)
        value += rng.normal(0.0, config.noise_std["traffic"])
        out.append((epoch, float(max(0, int(math.floor(value + 0.5))))))
    return out


def _weather_step(state: int, rng: np.random.Generator) -> int:
    u = rng.random()
    if u < WEATHER_STAY:
        return state
    if u < WEATHER_STAY + WEATHER_DRIFT:
        if state == 0:
            return 1
        if state == 11:
            return 10
        if state == 3:
            return state + (1 if rng.random() < 0.5 else -1)
        toward = 1 if state < 3 else -1
        return state + (toward if rng.random() < WEATHER_DRIFT_INWARD else -toward)
    draw = int(math.floor(rng.normal(WEATHER_REDRAW_MEAN, WEATHER_REDRAW_STD) + 0.5))
    return min(11, max(0, draw))


def _generate_weather(config: CityConfig, rng: np.random.Generator) -> list[tuple[int, float]]:
    out = []
    state = 3
    sampling = config.sampling_seconds["weather"]
    substeps = max(1, sampling // WEATHER_SUBSTEP_SECONDS)
    for epoch in _timestamps(config, "weather"):
        out.append((epoch, float(state)))
        for _ in range(substeps):
            state = _weather_step(state, rng)
    return out


def _apply_faults(
    config: CityConfig, series: dict[str, list[tuple[int, float]]], rng: np.random.Generator
) -> None:
    for fault in config.faults:
        spec = STREAMS[fault.stream]
        start = int(fault.start.timestamp())
        end = int(fault.end.timestamp())
        points = series[fault.stream]
        if fault.kind == "gap":
            series[fault.stream] = [(t, v) for t, v in points if not start <= t < end]
            continue
        anchor = None
        replaced = []
        for t, v in points:
            if start <= t < end:
                if fault.kind == "zeroFlatline":
                    v = 0.0
                elif fault.kind == "lowVariability":
                    if anchor is None:
                        anchor = v
                    std = config.noise_std.get(spec.sampling_key, 0.0)
                    v = anchor + rng.normal(0.0, std * 0.02)
                elif fault.kind == "spike":
                    v = v + fault.magnitude
                if spec.integer:
                    v = float(int(math.floor(v + 0.5)))
                    v = max(0.0, v)
                    if fault.stream == "parking":
                        v = min(float(config.parking_capacity), v)
                else:
                    v = round(v, 4)
            replaced.append((t, v))
        series[fault.stream] = replaced


def _format_value(stream: str, value: float) -> str:
    if STREAMS[stream].integer:
        return str(int(value))
    return f"{value:.4f}"


def generate(config: CityConfig, out_dir: str) -> dict:
    """Write one CSV per stream family plus faults.json and the resolved
    config; returns a summary with paths and per-stream point counts."""
    os.makedirs(out_dir, exist_ok=True)
    rngs = _spawn_rngs(config.seed)

    series: dict[str, list[tuple[int, float]]] = {}
    series["parking"] = _generate_parking(config, rngs["parking"])
    for stream in ("efield1", "efield2", "efield3"):
        series[stream] = _generate_efield(config, stream, series["parking"], rngs[stream])
    series["traffic"] = _generate_traffic(config, rngs["traffic"])
    series["weather"] = _generate_weather(config, rngs["weather"])
    _apply_faults(config, series, rngs["faults"])

    by_file: dict[str, list[tuple[int, str, str, str]]] = {}
    counts: dict[str, int] = {}
    for stream, points in series.items():
        spec = STREAMS[stream]
        counts[stream] = len(points)
        rows = by_file.setdefault(spec.filename, [])
        for epoch, value in points:
            rows.append((epoch, spec.asset_urn, spec.attribute, _format_value(stream, value)))

    files = {}
    for filename, rows in sorted(by_file.items()):
        rows.sort(key=lambda r: (r[0], r[1]))
        path = os.path.join(out_dir, filename)
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["timestamp", "asset_urn", "attribute", "value"])
            for epoch, asset, attribute, value in rows:
                writer.writerow([format_iso(from_epoch(epoch)), asset, attribute, value])
        files[filename] = path

    manifest_path = os.path.join(out_dir, "faults.json")
    with open(manifest_path, "w") as handle:
        json.dump([fault.to_dict() for fault in config.faults], handle, indent=2)
        handle.write("\n")
    config_path = os.path.join(out_dir, "city.json")
    with open(config_path, "w") as handle:
        json.dump(config.to_dict(), handle, indent=2)
        handle.write("\n")

    return {"files": files, "points": counts, "manifest": manifest_path, "config": config_path}
