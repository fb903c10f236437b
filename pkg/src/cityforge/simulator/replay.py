"""Replay generated CSVs against a running broker, preserving order."""

from __future__ import annotations

import csv
import glob
import logging
import math
import os
import re
import time
from dataclasses import dataclass, field

import requests

from ..errors import ValidationError
from ..timeutil import format_iso, parse_iso

log = logging.getLogger(__name__)

_INT_RE = re.compile(r"^-?\d+$")


@dataclass
class ReplayReport:
    sent: int = 0
    skipped: int = 0
    errors: int = 0
    aborted: bool = False
    message: str = ""
    per_asset: dict = field(default_factory=dict)
    per_asset_version: dict = field(default_factory=dict)  # broker's view, when reported

    def to_dict(self) -> dict:
        return {
            "sent": self.sent,
            "skipped": self.skipped,
            "errors": self.errors,
            "aborted": self.aborted,
            "message": self.message,
            "perAsset": dict(self.per_asset),
            "perAssetVersion": dict(self.per_asset_version),
        }


def _entity_type_of(asset_urn: str) -> str:
    parts = asset_urn.split(":")
    return parts[-2] if len(parts) >= 2 else "asset"


def load_rows(paths: list[str]) -> tuple[list[tuple], int]:
    """Parse CSVs into (epoch, seq, asset, attribute, value, iso) tuples;
    malformed rows are counted, not fatal."""
    rows = []
    skipped = 0
    seq = 0
    for path in paths:
        with open(path, newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header != ["timestamp", "asset_urn", "attribute", "value"]:
                raise ValidationError(f"unexpected CSV header in {path}: {header!r}")
            for raw in reader:
                seq += 1
                try:
                    iso, asset, attribute, text = raw
                    moment = parse_iso(iso)
                    value = int(text) if _INT_RE.match(text) else float(text)
                except (ValueError, ValidationError):
                    skipped += 1
                    continue
                rows.append((moment.timestamp(), seq, asset, attribute, value, format_iso(moment)))
    rows.sort(key=lambda r: (r[0], r[1]))  # global time order, ties stay stable
    return rows, skipped


def replay(
    paths: list[str],
    broker_url: str,
    speed: float = math.inf,
    post=None,
    timeout: float = 10.0,
) -> ReplayReport:
    """POST every row as a broker update at 1/speed of original pacing.

    ``post(url, body) -> status`` is injectable; the default uses a requests
    session.  A connection failure aborts with a partial report.
    """
    if not speed > 0:
        raise ValidationError("speed must be > 0")
    if os.path.isdir(paths[0]) if paths else False:
        raise ValidationError("replay expects CSV file paths, not a directory")

    rows, skipped = load_rows(paths)
    report = ReplayReport(skipped=skipped)
    base = broker_url.rstrip("/")

    session = None
    if post is None:
        session = requests.Session()

        def post(url, body):
            response = session.post(url, json=body, timeout=timeout)
            version = None
            if response.ok:
                try:
                    version = response.json().get("version")
                except ValueError:
                    pass
            return response.status_code, version

    previous = None
    try:
        for epoch, _, asset, attribute, value, iso in rows:
            if previous is not None and math.isfinite(speed):
                delay = (epoch - previous) / speed
                if delay > 0:
                    time.sleep(delay)
            previous = epoch
            url = f"{base}/v2/entities/{asset}/attrs?type={_entity_type_of(asset)}"
            body = {attribute: {"value": value, "metadata": {"timestamp": iso}}}
            try:
                outcome = post(url, body)
            except requests.ConnectionError as exc:
                report.aborted = True
                report.message = f"broker unreachable: {exc}"
                return report
            status, version = outcome if isinstance(outcome, tuple) else (outcome, None)
            if 200 <= status < 300:
                report.sent += 1
                report.per_asset[asset] = report.per_asset.get(asset, 0) + 1
                if version is not None:
                    report.per_asset_version[asset] = version
            else:
                report.errors += 1
                log.warning("replay update rejected (%s) for %s", status, asset)
        return report
    finally:
        if session is not None:
            session.close()


def dataset_files(directory: str) -> list[str]:
    files = sorted(glob.glob(os.path.join(directory, "*.csv")))
    if not files:
        raise ValidationError(f"no CSV files in {directory}")
    return files
