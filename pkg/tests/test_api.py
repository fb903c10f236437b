"""Wire-format checks for the HTTP layer.

Domain behavior is covered by the module tests; here we pin status
codes, payload shapes and the uniform ``{"error": ...}`` envelope as
seen by an actual HTTP client.
"""

from fastapi.testclient import TestClient

from cityforge.api import build_app

DOMAIN = "urn:oc:tagDomain:light"
TAGS = [
    {"urn": DOMAIN + ":night", "name": "night"},
    {"urn": DOMAIN + ":sunlight", "name": "sunlight"},
    {"urn": DOMAIN + ":overcast", "name": "overcast"},
]
SAMPLES = [
    {"tag": "night", "value": 0.0},
    {"tag": "sunlight", "value": 100.0},
    {"tag": "overcast", "value": 300.0},
]
ASSET = "urn:oc:entity:santander:light:n1"


def make_domain(client):
    resp = client.post(
        "/warehouse/tagDomains",
        json={"urn": DOMAIN, "name": "light", "description": "ambient light", "tags": TAGS},
    )
    assert resp.status_code == 201
    return resp.json()


def make_running_job(client):
    make_domain(client)
    resp = client.post(
        "/jobs",
        json={
            "kind": "classification",
            "query": {"idPattern": r"urn:oc:entity:santander:light:.*"},
            "attribute": "illuminance",
            "tagDomain": DOMAIN,
        },
    )
    assert resp.status_code == 201
    job = resp.json()
    assert client.post(f"/jobs/{job['id']}/train", json=SAMPLES).status_code == 200
    assert client.post(f"/jobs/{job['id']}/start").status_code == 200
    return job


def post_reading(client, value, entity_id=ASSET, attr="illuminance", timestamp=None):
    payload = {"value": value}
    if timestamp:
        payload["metadata"] = {"timestamp": timestamp}
    return client.post(f"/v2/entities/{entity_id}/attrs?type=light", json={attr: payload})


# -- liveness and error envelope -------------------------------------------

def test_liveness_and_stats_shape(client):
    body = client.get("/").json()
    assert body["service"] == "cityforge"
    assert body["status"] == "ok"
    assert isinstance(body["version"], str)

    post_reading(client, 70.0)
    stats = client.get("/stats").json()
    assert set(stats) == {"broker", "warehouse", "jobs", "series"}
    assert stats["broker"]["updates"] == 1
    assert stats["jobs"] == 0
    assert stats["series"] == [{"assetUrn": ASSET, "attribute": "illuminance", "points": 1}]


def test_malformed_json_body_is_400(client):
    resp = client.post(
        "/v2/entities/e/attrs", content=b"{nope", headers={"content-type": "application/json"}
    )
    assert resp.status_code == 400
    assert "error" in resp.json()


def test_error_envelope_is_uniform(client):
    for resp in (
        client.get("/v2/entities/urn:oc:entity:santander:light:missing"),
        client.get("/jobs/999"),
        client.get("/warehouse/annotations/nope"),
        client.delete("/v2/subscriptions/nope"),
    ):
        assert resp.status_code == 404
        body = resp.json()
        assert set(body) == {"error"}
        assert isinstance(body["error"], str) and body["error"]


# -- broker routes ---------------------------------------------------------

def test_entity_update_and_fetch(client):
    assert post_reading(client, 70.0, timestamp="2017-11-15T10:00:00Z").json() == {"version": 1}
    assert post_reading(client, 80.0, timestamp="2017-11-15T10:05:00Z").json() == {"version": 2}
    body = client.get(f"/v2/entities/{ASSET}").json()
    assert body["id"] == ASSET
    assert body["type"] == "light"
    assert body["illuminance"]["value"] == 80.0
    assert body["illuminance"]["metadata"]["timestamp"] == "2017-11-15T10:05:00Z"


def test_entity_update_rejections(client):
    resp = client.post(f"/v2/entities/{ASSET}/attrs", json={})
    assert resp.status_code == 400
    resp = client.post(f"/v2/entities/{ASSET}/attrs", json={"illuminance": 70.0})
    assert resp.status_code == 400  # attribute payloads must be objects
    resp = client.post("/v2/entities/not-a-urn/attrs", json={"illuminance": {"value": 1.0}})
    assert resp.status_code == 400


def test_entity_query_filters(client):
    post_reading(client, 10.0, "urn:oc:entity:santander:light:n1")
    post_reading(client, 20.0, "urn:oc:entity:santander:light:n2")
    client.post(
        "/v2/entities/urn:oc:entity:santander:parking:p1/attrs?type=parking",
        json={"occupancy": {"value": 5, "metadata": {"location": {"lat": 43.4, "lon": -3.8}}}},
    )

    ids = [e["id"] for e in client.get("/v2/entities").json()]
    assert len(ids) == 3
    ids = [e["id"] for e in client.get("/v2/entities?idPattern=.*light.*").json()]
    assert ids == ["urn:oc:entity:santander:light:n1", "urn:oc:entity:santander:light:n2"]
    ids = [e["id"] for e in client.get("/v2/entities?type=parking").json()]
    assert ids == ["urn:oc:entity:santander:parking:p1"]
    ids = [e["id"] for e in client.get("/v2/entities?attrs=occupancy,battery").json()]
    assert ids == ["urn:oc:entity:santander:parking:p1"]
    ids = [e["id"] for e in client.get("/v2/entities?bbox=43.0,-4.0,44.0,-3.0").json()]
    assert ids == ["urn:oc:entity:santander:parking:p1"]

    assert client.get("/v2/entities?bbox=1,2,3").status_code == 400
    assert client.get("/v2/entities?bbox=a,b,c,d").status_code == 400
    assert client.get("/v2/entities?idPattern=[").status_code == 400


def test_subscription_routes(client):
    resp = client.post(
        "/v2/subscriptions",
        json={"query": {"idPattern": ".*light.*"}, "callbackUrl": "http://example.org/hook"},
    )
    assert resp.status_code == 201
    sub_id = resp.json()["id"]

    subs = client.get("/v2/subscriptions").json()
    assert len(subs) == 1
    assert subs[0]["id"] == sub_id
    assert subs[0]["query"] == {"idPattern": ".*light.*"}
    assert subs[0]["callbackUrl"] == "http://example.org/hook"
    assert "createdAt" in subs[0]

    resp = client.delete(f"/v2/subscriptions/{sub_id}")
    assert resp.status_code == 204
    assert resp.content == b""
    assert client.get("/v2/subscriptions").json() == []

    resp = client.post("/v2/subscriptions", json={"callbackUrl": "ftp://bad"})
    assert resp.status_code == 400


# -- job routes ------------------------------------------------------------

def test_job_lifecycle_over_http(client):
    job = make_running_job(client)
    assert job["status"] == "created"
    assert len(job["ingestToken"]) == 22
    assert job["counters"] == {"processed": 0, "skipped": 0, "annotated": 0, "duplicates": 0}

    post_reading(client, 75.0, timestamp="2017-11-15T10:00:00Z")
    fetched = client.get(f"/jobs/{job['id']}").json()
    assert fetched["status"] == "running"
    assert fetched["counters"]["processed"] == 1
    assert fetched["counters"]["annotated"] == 1

    feed = client.get("/warehouse/annotations").json()
    assert len(feed) == 1
    assert feed[0]["assetUrn"] == ASSET
    assert feed[0]["tagUrn"] == DOMAIN + ":sunlight"
    assert feed[0]["annotator"] == f"machine:{job['id']}"
    assert feed[0]["timestamp"] == "2017-11-15T10:00:00Z"

    assert client.post(f"/jobs/{job['id']}/stop").json()["status"] == "stopped"
    assert client.delete(f"/jobs/{job['id']}").status_code == 204
    assert client.get(f"/jobs/{job['id']}").status_code == 404
    assert client.get("/jobs").json() == []


def test_job_create_validation(client):
    make_domain(client)
    base = {"query": {}, "attribute": "illuminance", "tagDomain": DOMAIN}
    assert client.post("/jobs", json=dict(base)).status_code == 400
    assert client.post("/jobs", json=dict(base, kind="clustering")).status_code == 400
    assert client.post("/jobs", json=dict(base, kind="classification", attribute="")).status_code == 400
    assert client.post("/jobs", json=[1, 2]).status_code == 400


def test_job_transition_conflicts_are_409(client):
    make_domain(client)
    resp = client.post(
        "/jobs",
        json={"kind": "classification", "query": {}, "attribute": "illuminance", "tagDomain": DOMAIN},
    )
    job_id = resp.json()["id"]
    assert client.post(f"/jobs/{job_id}/start").status_code == 409  # untrained
    assert client.post(f"/jobs/{job_id}/stop").status_code == 409
    assert client.post(f"/jobs/{job_id}/train", json={"tag": "night"}).status_code == 400
    assert client.post(f"/jobs/{job_id}/train", json=SAMPLES).status_code == 200
    assert client.post(f"/jobs/{job_id}/start").status_code == 200
    assert client.post(f"/jobs/{job_id}/train", json=SAMPLES).status_code == 409  # running


def test_manual_ingest_route(client):
    job = make_running_job(client)
    body = {
        "data": [
            {
                "id": ASSET,
                "type": "light",
                "illuminance": {
                    "value": 260.0,
                    "metadata": {"timestamp": "2017-11-15T09:00:00Z"},
                },
            }
        ]
    }
    resp = client.post(f"/ingest/{job['ingestToken']}", json=body)
    assert resp.status_code == 200
    results = resp.json()["results"]
    assert len(results) == 1
    assert results[0]["tag"] == DOMAIN + ":overcast"
    assert results[0]["jobId"] == job["id"]
    assert results[0]["assetUrn"] == ASSET

    assert client.post("/ingest/wrong-token", json=body).status_code == 401


def test_notify_route_is_loopback_only(service):
    app = build_app(service)
    local = TestClient(app)
    remote = TestClient(app, client=("203.0.113.9", 41000))

    job = make_running_job(local)
    body = {"data": [{"id": ASSET, "illuminance": {"value": 75.0}}]}

    resp = remote.post(f"/notify/{job['id']}", json=body)
    assert resp.status_code == 401
    assert local.get(f"/jobs/{job['id']}").json()["counters"]["processed"] == 0

    resp = local.post(f"/notify/{job['id']}", json=body)
    assert resp.status_code == 204
    assert local.get(f"/jobs/{job['id']}").json()["counters"]["processed"] == 1
    assert local.post("/notify/999", json=body).status_code == 404


# -- warehouse routes ------------------------------------------------------

def test_tag_domain_routes(client):
    body = make_domain(client)
    assert body["urn"] == DOMAIN
    assert [t["urn"] for t in body["tags"]] == [t["urn"] for t in TAGS]
    assert body["tags"][0] == {"urn": DOMAIN + ":night", "name": "night", "domain": DOMAIN}

    assert client.get("/warehouse/tagDomains").json() == [body]
    assert client.get(f"/warehouse/tagDomains/{DOMAIN}").json() == body

    resp = client.post(f"/warehouse/tagDomains/{DOMAIN}/tags", json={"urn": DOMAIN + ":dusk"})
    assert resp.status_code == 201
    assert resp.json()["name"] == "dusk"  # defaulted from the URN tail
    tags = client.get(f"/warehouse/tagDomains/{DOMAIN}/tags").json()
    assert [t["urn"] for t in tags][-1] == DOMAIN + ":dusk"

    resp = client.delete(f"/warehouse/tagDomains/urn:oc:tagDomain:other/tags/{DOMAIN}:dusk")
    assert resp.status_code == 400  # tag belongs to a different domain
    assert client.delete(f"/warehouse/tagDomains/{DOMAIN}/tags/{DOMAIN}:dusk").status_code == 204

    suggestions = client.get(f"/warehouse/tagDomains/{DOMAIN}/suggest").json()
    assert [t["urn"] for t in suggestions] == [t["urn"] for t in TAGS]

    assert client.delete(f"/warehouse/tagDomains/{DOMAIN}").status_code == 204
    assert client.get(f"/warehouse/tagDomains/{DOMAIN}").status_code == 404


def test_tag_domain_body_validation(client):
    resp = client.post("/warehouse/tagDomains", json={"urn": DOMAIN, "tags": "night"})
    assert resp.status_code == 400
    resp = client.post("/warehouse/tagDomains", json={"urn": DOMAIN, "tags": [{"name": "x"}]})
    assert resp.status_code == 400
    resp = client.post("/warehouse/tagDomains", json={"urn": "not-a-urn"})
    assert resp.status_code == 400


def test_service_and_experiment_routes(client):
    make_domain(client)
    resp = client.post(
        "/warehouse/services",
        json={"urn": "urn:oc:service:lights", "name": "lights", "linkedDomains": [DOMAIN]},
    )
    assert resp.status_code == 201
    assert resp.json() == {
        "urn": "urn:oc:service:lights",
        "name": "lights",
        "linkedDomains": [DOMAIN],
    }
    assert len(client.get("/warehouse/services").json()) == 1

    resp = client.post(
        "/warehouse/experiments",
        json={"urn": "urn:oc:experiment:e1", "name": "e1", "linkedDomains": ["urn:oc:tagDomain:no"]},
    )
    assert resp.status_code == 404  # can only link existing domains

    assert client.post(
        "/warehouse/experiments", json={"urn": "urn:oc:experiment:e1", "name": "e1"}
    ).status_code == 201
    assert client.delete("/warehouse/experiments/urn:oc:experiment:e1").status_code == 204
    assert client.delete("/warehouse/services/urn:oc:service:lights").status_code == 204
    assert client.get("/warehouse/services").json() == []


def test_annotation_routes(client):
    make_domain(client)
    resp = client.post(
        "/warehouse/annotations",
        json={
            "assetUrn": ASSET,
            "tagUrn": DOMAIN + ":night",
            "annotator": "user:alice",
            "note": "manual check",
            "timestamp": "2017-11-15T22:00:00Z",
            "location": {"lat": 43.46, "lon": -3.80},
        },
    )
    assert resp.status_code == 201
    ann = resp.json()
    assert ann["validation"] == "confirmed"  # user annotations are born confirmed
    assert ann["location"] == {"lat": 43.46, "lon": -3.8}
    assert client.get(f"/warehouse/annotations/{ann['id']}").json() == ann

    resp = client.post(f"/warehouse/annotations/{ann['id']}/review", json={"verdict": "rejected"})
    assert resp.status_code == 400  # review needs a userId
    resp = client.post(
        f"/warehouse/annotations/{ann['id']}/review",
        json={"verdict": "rejected", "userId": "bob"},
    )
    assert resp.json()["validation"] == "rejected"
    assert resp.json()["reviewedBy"] == "bob"

    assert client.delete(f"/warehouse/annotations/{ann['id']}").status_code == 400
    resp = client.delete(f"/warehouse/annotations/{ann['id']}?requester=user:mallory")
    assert resp.status_code == 401
    resp = client.delete(f"/warehouse/annotations/{ann['id']}?requester=user:alice")
    assert resp.status_code == 204
    assert client.get(f"/warehouse/annotations/{ann['id']}").status_code == 404


def test_annotation_feed_is_newest_first_with_limit(client):
    make_domain(client)
    for hour in range(5):
        client.post(
            "/warehouse/annotations",
            json={
                "assetUrn": ASSET,
                "tagUrn": DOMAIN + ":night",
                "annotator": "user:alice",
                "timestamp": f"2017-11-15T0{hour}:00:00Z",
            },
        )
    feed = client.get("/warehouse/annotations?limit=2").json()
    assert [a["timestamp"] for a in feed] == ["2017-11-15T04:00:00Z", "2017-11-15T03:00:00Z"]
    assert client.get("/warehouse/annotations?limit=abc").status_code == 400


def test_asset_annotation_feed_interval(client):
    make_domain(client)
    for hour in (1, 2, 3):
        client.post(
            "/warehouse/annotations",
            json={
                "assetUrn": ASSET,
                "tagUrn": DOMAIN + ":night",
                "annotator": "user:alice",
                "timestamp": f"2017-11-15T0{hour}:00:00Z",
            },
        )
    url = f"/warehouse/assets/{ASSET}/annotations"
    assert len(client.get(url).json()) == 3
    resp = client.get(url + "?from=2017-11-15T02:00:00Z&to=2017-11-15T03:00:00Z")
    assert [a["timestamp"] for a in resp.json()] == [
        "2017-11-15T02:00:00Z",
        "2017-11-15T03:00:00Z",
    ]
    assert client.get(url + "?from=2017-11-15T02:00:00Z").status_code == 400
    assert client.get(url + "?domain=urn:oc:tagDomain:parking").status_code == 404
    client.post("/warehouse/tagDomains", json={"urn": "urn:oc:tagDomain:parking"})
    assert client.get(url + "?domain=urn:oc:tagDomain:parking").json() == []


def test_find_assets_route(client):
    make_domain(client)
    client.post(
        "/warehouse/annotations",
        json={"assetUrn": ASSET, "tagUrn": DOMAIN + ":night", "annotator": "user:alice"},
    )
    assert client.get("/warehouse/assets").status_code == 400  # tags is required

    matches = client.get(f"/warehouse/assets?tags={DOMAIN}:night").json()
    assert matches == [{"assetUrn": ASSET, "tags": {DOMAIN + ":night": 1}, "total": 1}]
    assert client.get(f"/warehouse/assets?tags={DOMAIN}:night,{DOMAIN}:sunlight").json() == []
    assert client.get(f"/warehouse/assets?tags={DOMAIN}:night&includeRejected=true").json() == matches
    assert client.get(f"/warehouse/assets?tags={DOMAIN}:night&includeRejected=banana").status_code == 400


def test_discovery_export_route(client):
    make_domain(client)
    assert client.get("/warehouse/discovery/export").json() == []
    client.post(
        "/warehouse/annotations",
        json={
            "assetUrn": ASSET,
            "tagUrn": DOMAIN + ":night",
            "annotator": "user:alice",
            "timestamp": "2017-11-15T22:00:00Z",
        },
    )
    export = client.get("/warehouse/discovery/export").json()
    assert export == [
        {
            "assetUrn": ASSET,
            "tags": [
                {"urn": DOMAIN + ":night", "count": 1, "latest": "2017-11-15T22:00:00Z"}
            ],
        }
    ]


# -- analytics routes ------------------------------------------------------

def seed_series(client, hours=6):
    # two aligned hourly series over 2017-11-15, anti-correlated by design
    for hour in range(hours):
        stamp = f"2017-11-15T{hour:02d}:00:00Z"
        post_reading(client, float(hour), "urn:oc:entity:santander:light:a", "lux", stamp)
        post_reading(client, float(-2 * hour), "urn:oc:entity:santander:light:b", "lux", stamp)


def test_pearson_route(client):
    seed_series(client, hours=24)
    url = (
        "/analytics/pearson?assetA=urn:oc:entity:santander:light:a&attrA=lux"
        "&assetB=urn:oc:entity:santander:light:b&attrB=lux&bucket=3600"
    )
    body = client.get(url).json()
    assert body == {"bucketSeconds": 3600, "pairs": 24, "r": -1.0}

    daily = client.get(url + "&perDay=true").json()
    assert daily["bucketSeconds"] == 3600
    assert daily["daily"] == [{"day": "2017-11-15", "r": -1.0, "pairCount": 24}]

    assert client.get("/analytics/pearson?assetA=x&attrA=lux").status_code == 400
    assert client.get(url.replace("bucket=3600", "bucket=abc")).status_code == 400
    assert client.get(url.replace("bucket=3600", "bucket=0")).status_code == 400


def test_profile_route(client):
    seed_series(client)
    body = client.get(
        "/analytics/profile?asset=urn:oc:entity:santander:light:a&attr=lux&weekday=WED"
    ).json()
    assert body["weekday"] == "WED"
    assert len(body["profile"]) == 24
    assert body["profile"][:6] == [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
    assert body["profile"][23] is None

    # 2017-11-15 is a Wednesday, so a Saturday filter leaves nothing
    assert client.get(
        "/analytics/profile?asset=urn:oc:entity:santander:light:a&attr=lux&weekday=SAT"
    ).status_code == 400
    assert client.get(
        "/analytics/profile?asset=urn:oc:entity:santander:light:a&attr=lux&weekday=BLURSDAY"
    ).status_code == 400


def test_gaps_route(client):
    for hour in (0, 1, 2, 5):
        post_reading(
            client, 1.0, "urn:oc:entity:santander:light:a", "lux", f"2017-11-15T0{hour}:00:00Z"
        )
    base = "/analytics/gaps?asset=urn:oc:entity:santander:light:a&attr=lux"
    body = client.get(base + "&maxGap=3600").json()
    assert body["maxGapSeconds"] == 3600.0
    assert body["gaps"] == [
        {"start": "2017-11-15T02:00:00Z", "end": "2017-11-15T05:00:00Z", "seconds": 10800.0}
    ]
    assert client.get(base).status_code == 400
    assert client.get(base + "&maxGap=nope").status_code == 400


def test_seasonal_route(client):
    for day, value in (("15", 10.0), ("16", 5.0)):
        post_reading(
            client, value, "urn:oc:entity:santander:light:a", "lux", f"2017-11-{day}T12:00:00Z"
        )
    url = (
        "/analytics/seasonal?asset=urn:oc:entity:santander:light:a&attr=lux"
        "&aFrom=2017-11-15T00:00:00Z&aTo=2017-11-16T00:00:00Z"
        "&bFrom=2017-11-16T00:00:00Z&bTo=2017-11-17T00:00:00Z"
    )
    assert client.get(url).json() == {"ratio": 2.0}
    assert client.get(url.replace("&bTo=2017-11-17T00:00:00Z", "")).status_code == 400


def test_series_listing_route(client):
    seed_series(client)
    listing = client.get("/analytics/series").json()
    assert {
        "assetUrn": "urn:oc:entity:santander:light:a",
        "attribute": "lux",
        "points": 6,
    } in listing
    assert len(listing) == 2


# -- static console --------------------------------------------------------

def test_console_mounted_when_directory_exists(service, tmp_path):
    (tmp_path / "index.html").write_text("<html><body>console</body></html>")
    app = build_app(service, console_dir=str(tmp_path))
    with TestClient(app) as mounted:
        resp = mounted.get("/console/")
        assert resp.status_code == 200
        assert "console" in resp.text


def test_console_absent_without_directory(client):
    assert client.get("/console/").status_code == 404
