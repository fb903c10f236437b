#!/usr/bin/env python3
"""End-to-end demo against a real server.

Boots the service in a subprocess, sets up a tag taxonomy and two annotation
jobs (parking-load classifier, e-field anomaly watch), generates two days of
city data with an injected spike, replays it over HTTP, then prints what the
jobs and the warehouse made of it.
"""

import argparse
import atexit
import socket
import subprocess
import sys
import tempfile
import time
from datetime import datetime, timedelta, timezone

import requests

from cityforge.simulator import CityConfig, FaultSpec, generate
from cityforge.simulator.replay import dataset_files, replay

UTC = timezone.utc


def free_port() -> int:
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()
    return port


def wait_for(url: str, seconds: float = 15.0) -> None:
    deadline = time.monotonic() + seconds
    while time.monotonic() < deadline:
        try:
            if requests.get(url, timeout=1).status_code == 200:
                return
        except requests.RequestException:
            pass
        time.sleep(0.1)
    raise SystemExit(f"service at {url} did not come up in {seconds}s")


def post(base: str, path: str, body) -> dict:
    response = requests.post(base + path, json=body, timeout=10)
    if response.status_code >= 400:
        raise SystemExit(f"POST {path} failed: {response.status_code} {response.text}")
    return response.json() if response.content else {}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--days", type=int, default=2)
    parser.add_argument("--seed", type=int, default=8)
    parser.add_argument("--keep-serving", action="store_true",
                        help="leave the server running after the demo")
    args = parser.parse_args()

    port = free_port()
    base = f"http://127.0.0.1:{port}"
    server = subprocess.Popen(
        [sys.executable, "-m", "cityforge.cli", "serve", "--port", str(port)],
        stdout=subprocess.DEVNULL,
    )
    if not args.keep_serving:
        atexit.register(server.terminate)
    wait_for(base + "/")
    print(f"service up at {base}")

    load_domain = "urn:oc:tagDomain:parkingLoad"
    post(base, "/warehouse/tagDomains", {
        "urn": load_domain, "name": "parking load",
        "tags": [{"urn": f"{load_domain}:{n}"} for n in ("empty", "busy", "full")],
    })
    health_domain = "urn:oc:tagDomain:fieldHealth"
    post(base, "/warehouse/tagDomains", {
        "urn": health_domain, "name": "e-field health",
        "tags": [{"urn": f"{health_domain}:anomalous", "name": "anomalous"}],
    })

    classifier = post(base, "/jobs", {
        "kind": "classification",
        "query": {"idPattern": r"urn:oc:entity:santander:parking:.*"},
        "attribute": "availableSpots", "tagDomain": load_domain,
    })
    post(base, f"/jobs/{classifier['id']}/train", [
        {"tag": "empty", "value": 110.0},
        {"tag": "busy", "value": 60.0},
        {"tag": "full", "value": 5.0},
    ])
    post(base, f"/jobs/{classifier['id']}/start", {})

    watcher = post(base, "/jobs", {
        "kind": "anomalyDetection",
        "query": {"idPattern": r"urn:oc:entity:santander:efield:efield1"},
        "attribute": "fieldStrength", "tagDomain": health_domain,
        "executorParams": {"zThreshold": 4.0},
    })
    # train on a plausible normal band; the replayed spike should stand out
    post(base, f"/jobs/{watcher['id']}/train",
         [{"tag": "normal", "value": 1.0 + 0.05 * i} for i in range(20)])
    post(base, f"/jobs/{watcher['id']}/start", {})

    start = datetime(2017, 11, 15, tzinfo=UTC)
    spike = FaultSpec("spike", "efield1",
                      start + timedelta(days=1, hours=9),
                      start + timedelta(days=1, hours=10), magnitude=40.0)
    dataset = tempfile.mkdtemp(prefix="cityforge-demo-")
    generate(CityConfig(seed=args.seed, days=args.days, faults=[spike]), dataset)
    print(f"dataset ({args.days} days, 1 spike fault) in {dataset}")

    report = replay(dataset_files(dataset), base)
    print(f"replayed {report.sent} updates, {report.errors} rejected")

    for job_id, label in ((classifier["id"], "classifier"), (watcher["id"], "anomaly watch")):
        counters = requests.get(f"{base}/jobs/{job_id}", timeout=10).json()["counters"]
        print(f"{label}: processed {counters['processed']}, "
              f"annotated {counters['annotated']}, skipped {counters['skipped']}")

    print("\nmost recent annotations:")
    for entry in requests.get(f"{base}/warehouse/annotations?limit=5", timeout=10).json():
        print(f"  {entry['timestamp']}  {entry['assetUrn'].split(':')[-1]:>8}  "
              f"{entry['tagUrn'].split(':')[-1]:<9} note={entry['note']}")

    print("\nsuggested parking-load tags (by usage):")
    for tag in requests.get(f"{base}/warehouse/tagDomains/{load_domain}/suggest", timeout=10).json():
        print(f"  {tag['urn']}")

    pearson = requests.get(f"{base}/analytics/pearson", params={
        "assetA": "urn:oc:entity:santander:parking:p-total", "attrA": "availableSpots",
        "assetB": "urn:oc:entity:santander:efield:efield2", "attrB": "fieldStrength",
        "perDay": "true",
    }, timeout=10).json()
    print("\ndaily parking ~ efield2 correlation:")
    for day in pearson["daily"]:
        bar = "#" * int(abs(day["r"] or 0) * 30)
        print(f"  {day['day']}  r={day['r']:+.3f}  {bar}")

    if args.keep_serving:
        print(f"\nserver still running (pid {server.pid}) at {base}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
