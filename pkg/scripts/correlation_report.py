#!/usr/bin/env python3
"""Offline analytics report over a generated dataset.

Reads (or first generates) a dataset directory and prints the correlation,
profile, and gap structure straight from the library, no server involved.
"""

import argparse
import csv
import os
import statistics
import sys

from cityforge import analytics
from cityforge.errors import CityForgeError
from cityforge.simulator import CityConfig, generate
from cityforge.timeutil import parse_iso

PARKING = ("urn:oc:entity:santander:parking:p-total", "availableSpots")
EFIELD2 = ("urn:oc:entity:santander:efield:efield2", "fieldStrength")
TRAFFIC = ("urn:oc:entity:santander:traffic:t01", "vehiclesPerHour")
WEATHER = ("urn:oc:entity:santander:weather:w01", "weatherCode")


def load_points(directory):
    series = {}
    for name in sorted(os.listdir(directory)):
        if not name.endswith(".csv"):
            continue
        with open(os.path.join(directory, name), newline="") as handle:
            reader = csv.reader(handle)
            next(reader)
            for iso, asset, attribute, text in reader:
                series.setdefault((asset, attribute), []).append((parse_iso(iso), float(text)))
    for points in series.values():
        points.sort(key=lambda p: p[0])
    return series


def correlation_block(title, series_a, series_b, bucket):
    print(f"\n{title}")
    rs = []
    for day in analytics.daily_pearson(series_a, series_b, bucket):
        bar = "#" * int(abs(day.r or 0.0) * 30)
        shown = "undefined" if day.r is None else f"{day.r:+.3f}"
        print(f"  {day.day}  r={shown:>9}  n={day.pair_count:<4} {bar}")
        if day.r is not None:
            rs.append(day.r)
    if rs:
        print(f"  median {statistics.median(rs):+.3f}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dir", help="existing dataset directory; omit to generate a fresh one")
    parser.add_argument("--out", default="./dataset", help="where to generate when --dir is omitted")
    parser.add_argument("--days", type=int, default=14)
    parser.add_argument("--seed", type=int, default=8)
    args = parser.parse_args()

    directory = args.dir
    if directory is None:
        directory = args.out
        generate(CityConfig(seed=args.seed, days=args.days), directory)
        print(f"generated {args.days} days (seed {args.seed}) in {directory}")
    series = load_points(directory)

    correlation_block("parking availability ~ e-field 2 (10 min buckets)",
                      series[PARKING], series[EFIELD2], 600)
    correlation_block("weather ~ traffic (hourly buckets)",
                      series[WEATHER], series[TRAFFIC], 3600)

    def profile_or_blank(points, days):
        try:
            return analytics.hourly_profile(points, analytics.parse_weekday_filter(days))
        except CityForgeError:
            return [None] * 24  # range too short to contain that weekday

    parking = series[PARKING]
    weekday = profile_or_blank(parking, "WEEKDAYS")
    saturday = profile_or_blank(parking, "SAT")
    print("\nparking availability by hour (weekday vs saturday)")
    for hour in range(24):
        wd = "" if weekday[hour] is None else f"{weekday[hour]:6.1f}"
        sa = "" if saturday[hour] is None else f"{saturday[hour]:6.1f}"
        marker = " <- weekday dip" if hour in (10, 17) else ""
        print(f"  {hour:02d}h  weekday {wd}  saturday {sa}{marker}")

    print("\ncoverage gaps (spacing above each stream's sampling interval)")
    any_gap = False
    for (asset, attribute), points in sorted(series.items()):
        spacing = min(
            (b - a).total_seconds() for a, b in zip([p[0] for p in points], [p[0] for p in points][1:])
        )
        for start, end in analytics.detect_gaps(points, spacing):
            any_gap = True
            print(f"  {asset.split(':')[-1]:>8} {attribute}: {start.isoformat()} .. "
                  f"{end.isoformat()} ({(end - start).total_seconds() / 3600:.1f} h)")
    if not any_gap:
        print("  none")
    return 0


if __name__ == "__main__":
    sys.exit(main())
