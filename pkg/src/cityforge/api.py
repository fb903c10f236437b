"""HTTP surface over a CityForge service instance.

Routes are thin: parse, delegate, serialize.  Request bodies are plain
dicts (no schema layer) so the error contract stays uniform: any
CityForgeError maps to ``{"error": "<message>"}`` with its status code.
Query parameters arrive as strings and are converted here for the same
reason; a bad ``bucket=abc`` is a 400, not a framework-shaped 422.
"""

from __future__ import annotations

import json
import os

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

from . import __version__
from .broker import AttributeValue, ContextQuery, entity_to_wire
from .errors import AuthorizationError, CityForgeError, ProtocolError, ValidationError
from .executors import ExecutorConfig
from .jobs import TrainingSample
from .timeutil import format_iso, parse_iso

# hosts allowed to hit the broker callback endpoint; testclient is what
# starlette's in-process client reports
_LOOPBACK_HOSTS = {None, "127.0.0.1", "::1", "localhost", "testclient"}


# -- parsing helpers -------------------------------------------------------

async def _json_body(request: Request):
    try:
        return await request.json()
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ProtocolError(f"request body is not valid JSON: {exc}") from exc


def _require(params, *names: str) -> list[str]:
    values = []
    for name in names:
        value = params.get(name)
        if value is None or value == "":
            raise ValidationError(f"missing required query parameter: {name}")
        values.append(value)
    return values


def _opt_instant(params, name: str):
    text = params.get(name)
    return parse_iso(text) if text else None


def _interval(params, start_name: str = "from", end_name: str = "to"):
    """Both-or-neither closed interval for warehouse lookups."""
    start, end = params.get(start_name), params.get(end_name)
    if bool(start) != bool(end):
        raise ValidationError(f"{start_name} and {end_name} must be given together")
    if not start:
        return None
    return (parse_iso(start), parse_iso(end))


def _opt_int(params, name: str, default: int | None = None) -> int | None:
    text = params.get(name)
    if text is None or text == "":
        return default
    try:
        return int(text)
    except ValueError:
        raise ValidationError(f"{name} must be an integer, got {text!r}") from None


def _opt_float(params, name: str, default: float | None = None) -> float | None:
    text = params.get(name)
    if text is None or text == "":
        return default
    try:
        return float(text)
    except ValueError:
        raise ValidationError(f"{name} must be a number, got {text!r}") from None


def _opt_bool(params, name: str, default: bool = False) -> bool:
    text = params.get(name)
    if text is None or text == "":
        return default
    token = text.strip().lower()
    if token in ("1", "true", "yes"):
        return True
    if token in ("0", "false", "no"):
        return False
    raise ValidationError(f"{name} must be true or false, got {text!r}")


def _parse_bbox(text: str | None):
    if not text:
        return None
    parts = text.split(",")
    if len(parts) != 4:
        raise ValidationError(f"bbox needs latMin,lonMin,latMax,lonMax, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise ValidationError(f"bbox components must be numbers, got {text!r}") from None


def _parse_location(payload) -> tuple[float, float] | None:
    if payload is None:
        return None
    if not isinstance(payload, dict) or "lat" not in payload or "lon" not in payload:
        raise ValidationError(f"location must be an object with lat and lon, got {payload!r}")
    return (payload["lat"], payload["lon"])


def _attrs_from_body(body) -> dict[str, AttributeValue]:
    if not isinstance(body, dict):
        raise ProtocolError("entity update body must be a JSON object")
    attrs = {}
    for name, payload in body.items():
        if not isinstance(payload, dict) or "value" not in payload:
            raise ProtocolError(f"attribute {name!r} must be an object with a value")
        metadata = payload.get("metadata") or {}
        if not isinstance(metadata, dict):
            raise ProtocolError(f"attribute {name!r} metadata must be an object")
        timestamp = parse_iso(metadata["timestamp"]) if "timestamp" in metadata else None
        attrs[name] = AttributeValue(
            value=payload["value"],
            timestamp=timestamp,
            location=_parse_location(metadata.get("location")),
        )
    return attrs


def _domain_to_wire(warehouse, domain) -> dict:
    return {
        "urn": domain.urn,
        "name": domain.name,
        "description": domain.description,
        "tags": [warehouse.tags[u].to_dict() for u in domain.tag_urns],
    }


def _link_holder_to_wire(holder) -> dict:
    return {"urn": holder.urn, "name": holder.name, "linkedDomains": sorted(holder.linked_domains)}


# -- app factory -----------------------------------------------------------

def build_app(service, console_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="cityforge", version=__version__, docs_url=None, redoc_url=None)
    app.state.service = service

    @app.exception_handler(CityForgeError)
    async def _domain_error(request: Request, exc: CityForgeError):
        return JSONResponse(status_code=exc.http_status, content={"error": str(exc)})

    @app.get("/")
    async def liveness():
        return {"service": "cityforge", "version": __version__, "status": "ok"}

    @app.get("/stats")
    async def stats():
        return {
            "broker": dict(service.broker.stats),
            "warehouse": dict(service.warehouse.stats),
            "jobs": len(service.jobs.list_jobs()),
            "series": [
                {"assetUrn": asset, "attribute": attr, "points": count}
                for asset, attr, count in service.series.list_series()
            ],
        }

    # -- context broker ----------------------------------------------------

    @app.post("/v2/entities/{entity_id}/attrs")
    async def update_entity(entity_id: str, request: Request):
        entity_type = request.query_params.get("type", "")
        attrs = _attrs_from_body(await _json_body(request))
        version = service.broker.update_entity(entity_id, entity_type, attrs)
        return {"version": version}

    @app.get("/v2/entities")
    async def query_entities(request: Request):
        params = request.query_params
        attrs_param = params.get("attrs")
        query = ContextQuery(
            id_pattern=params.get("idPattern"),
            entity_type=params.get("type"),
            attrs=attrs_param.split(",") if attrs_param else None,
            bbox=_parse_bbox(params.get("bbox")),
        )
        return [entity_to_wire(e) for e in service.broker.query_entities(query)]

    @app.get("/v2/entities/{entity_id}")
    async def get_entity(entity_id: str):
        return entity_to_wire(service.broker.get_entity(entity_id))

    @app.post("/v2/subscriptions", status_code=201)
    async def create_subscription(request: Request):
        body = await _json_body(request)
        if not isinstance(body, dict):
            raise ProtocolError("subscription body must be a JSON object")
        sub = service.broker.subscribe(
            ContextQuery.from_dict(body.get("query")), body.get("callbackUrl", "")
        )
        return {"id": sub.id}

    @app.get("/v2/subscriptions")
    async def list_subscriptions():
        return [
            {
                "id": sub.id,
                "query": sub.query.to_dict(),
                "callbackUrl": sub.callback_url,
                "createdAt": format_iso(sub.created_at),
            }
            for sub in service.broker.list_subscriptions()
        ]

    @app.delete("/v2/subscriptions/{subscription_id}", status_code=204)
    async def delete_subscription(subscription_id: str):
        service.broker.unsubscribe(subscription_id)
        return Response(status_code=204)

    # -- annotation jobs ---------------------------------------------------

    @app.post("/jobs", status_code=201)
    async def create_job(request: Request):
        body = await _json_body(request)
        if not isinstance(body, dict):
            raise ProtocolError("job body must be a JSON object")
        kind = body.get("kind")
        if not isinstance(kind, str) or not kind:
            raise ValidationError("job needs a kind field")
        job = service.jobs.create_job(
            kind=kind,
            query=ContextQuery.from_dict(body.get("query")),
            attribute=body.get("attribute", ""),
            tag_domain=body.get("tagDomain", ""),
            executor=ExecutorConfig.from_dict(kind, body.get("executorParams")),
        )
        return job.to_dict()

    @app.get("/jobs")
    async def list_jobs():
        return [job.to_dict() for job in service.jobs.list_jobs()]

    @app.get("/jobs/{job_id}")
    async def get_job(job_id: int):
        return service.jobs.get_job(job_id).to_dict()

    @app.delete("/jobs/{job_id}", status_code=204)
    async def delete_job(job_id: int):
        service.jobs.delete_job(job_id)
        return Response(status_code=204)

    @app.post("/jobs/{job_id}/train")
    async def train_job(job_id: int, request: Request):
        body = await _json_body(request)
        if not isinstance(body, list):
            raise ProtocolError("training body must be a JSON array of samples")
        samples = [TrainingSample.from_dict(entry) for entry in body]
        return service.jobs.train_job(job_id, samples).to_dict()

    @app.post("/jobs/{job_id}/start")
    async def start_job(job_id: int):
        return service.jobs.start_job(job_id).to_dict()

    @app.post("/jobs/{job_id}/stop")
    async def stop_job(job_id: int):
        return service.jobs.stop_job(job_id).to_dict()

    @app.post("/ingest/{token}")
    async def manual_ingest(token: str, request: Request):
        results = service.jobs.manual_ingest(token, await _json_body(request))
        return {"results": [r.to_dict() for r in results]}

    @app.post("/notify/{job_id}", status_code=204)
    async def notify(job_id: int, request: Request):
        # broker callback target, not part of the public surface
        client_host = request.client.host if request.client else None
        if client_host not in _LOOPBACK_HOSTS:
            raise AuthorizationError("notification endpoint accepts loopback traffic only")
        service.jobs.process_notification(job_id, await _json_body(request))
        return Response(status_code=204)

    # -- knowledge warehouse -----------------------------------------------

    wh = service.warehouse

    @app.post("/warehouse/tagDomains", status_code=201)
    async def create_tag_domain(request: Request):
        body = await _json_body(request)
        if not isinstance(body, dict):
            raise ProtocolError("tag domain body must be a JSON object")
        tags = body.get("tags", [])
        if not isinstance(tags, list):
            raise ProtocolError("tags must be an array")
        pairs = []
        for entry in tags:
            if not isinstance(entry, dict) or "urn" not in entry:
                raise ProtocolError(f"tag entries need a urn: {entry!r}")
            pairs.append((entry["urn"], entry.get("name", "")))
        domain = wh.create_tag_domain(
            body.get("urn", ""), body.get("name", ""), body.get("description", ""), tags=pairs
        )
        return _domain_to_wire(wh, domain)

    @app.get("/warehouse/tagDomains")
    async def list_tag_domains():
        return [_domain_to_wire(wh, d) for d in wh.list_tag_domains()]

    @app.get("/warehouse/tagDomains/{urn}")
    async def get_tag_domain(urn: str):
        return _domain_to_wire(wh, wh.get_tag_domain(urn))

    @app.delete("/warehouse/tagDomains/{urn}", status_code=204)
    async def delete_tag_domain(urn: str):
        wh.delete_tag_domain(urn)
        return Response(status_code=204)

    @app.post("/warehouse/tagDomains/{urn}/tags", status_code=201)
    async def add_tag(urn: str, request: Request):
        body = await _json_body(request)
        if not isinstance(body, dict) or "urn" not in body:
            raise ProtocolError("tag body must be a JSON object with a urn")
        return wh.add_tag(urn, body["urn"], body.get("name", "")).to_dict()

    @app.get("/warehouse/tagDomains/{urn}/tags")
    async def list_domain_tags(urn: str):
        return [tag.to_dict() for tag in wh.domain_tags(urn)]

    @app.delete("/warehouse/tagDomains/{urn}/tags/{tag_urn}", status_code=204)
    async def delete_tag(urn: str, tag_urn: str):
        if wh.get_tag(tag_urn).domain_urn != urn:
            raise ValidationError(f"tag {tag_urn} does not belong to {urn}")
        wh.delete_tag(tag_urn)
        return Response(status_code=204)

    @app.get("/warehouse/tagDomains/{urn}/suggest")
    async def suggest_tags(urn: str):
        return [tag.to_dict() for tag in wh.suggest_tags(urn)]

    @app.post("/warehouse/services", status_code=201)
    async def create_service(request: Request):
        body = await _json_body(request)
        if not isinstance(body, dict):
            raise ProtocolError("service body must be a JSON object")
        holder = wh.create_service(
            body.get("urn", ""), body.get("name", ""), body.get("linkedDomains", [])
        )
        return _link_holder_to_wire(holder)

    @app.get("/warehouse/services")
    async def list_services():
        return [_link_holder_to_wire(s) for s in wh.list_services()]

    @app.delete("/warehouse/services/{urn}", status_code=204)
    async def delete_service(urn: str):
        wh.delete_service(urn)
        return Response(status_code=204)

    @app.post("/warehouse/experiments", status_code=201)
    async def create_experiment(request: Request):
        body = await _json_body(request)
        if not isinstance(body, dict):
            raise ProtocolError("experiment body must be a JSON object")
        holder = wh.create_experiment(
            body.get("urn", ""), body.get("name", ""), body.get("linkedDomains", [])
        )
        return _link_holder_to_wire(holder)

    @app.get("/warehouse/experiments")
    async def list_experiments():
        return [_link_holder_to_wire(e) for e in wh.list_experiments()]

    @app.delete("/warehouse/experiments/{urn}", status_code=204)
    async def delete_experiment(urn: str):
        wh.delete_experiment(urn)
        return Response(status_code=204)

    @app.post("/warehouse/annotations", status_code=201)
    async def create_annotation(request: Request):
        body = await _json_body(request)
        if not isinstance(body, dict):
            raise ProtocolError("annotation body must be a JSON object")
        timestamp = parse_iso(body["timestamp"]) if body.get("timestamp") else None
        annotation = wh.annotate(
            asset_urn=body.get("assetUrn", ""),
            tag_urn=body.get("tagUrn", ""),
            annotator=body.get("annotator", ""),
            note=body.get("note", ""),
            timestamp=timestamp,
            location=_parse_location(body.get("location")),
        )
        return annotation.to_dict()

    @app.get("/warehouse/annotations")
    async def list_annotations(request: Request):
        limit = _opt_int(request.query_params, "limit", 200)
        return [a.to_dict() for a in wh.list_annotations(newest_first=True, limit=limit)]

    @app.get("/warehouse/annotations/{annotation_id}")
    async def get_annotation(annotation_id: str):
        return wh.get_annotation(annotation_id).to_dict()

    @app.post("/warehouse/annotations/{annotation_id}/review")
    async def review_annotation(annotation_id: str, request: Request):
        body = await _json_body(request)
        if not isinstance(body, dict):
            raise ProtocolError("review body must be a JSON object")
        user_id = body.get("userId")
        if not user_id:
            raise ValidationError("review needs a userId field")
        return wh.review_annotation(annotation_id, body.get("verdict", ""), user_id).to_dict()

    @app.delete("/warehouse/annotations/{annotation_id}", status_code=204)
    async def delete_annotation(annotation_id: str, request: Request):
        (requester,) = _require(request.query_params, "requester")
        wh.delete_annotation(annotation_id, requester)
        return Response(status_code=204)

    @app.get("/warehouse/assets/{asset_urn}/annotations")
    async def asset_annotations(asset_urn: str, request: Request):
        params = request.query_params
        annotations = wh.get_annotations(
            asset_urn, interval=_interval(params), tag_domain=params.get("domain")
        )
        return [a.to_dict() for a in annotations]

    @app.get("/warehouse/assets")
    async def find_assets(request: Request):
        params = request.query_params
        (tags,) = _require(params, "tags")
        matches = wh.find_assets(
            tag_urns=tags.split(","),
            bbox=_parse_bbox(params.get("bbox")),
            interval=_interval(params),
            include_rejected=_opt_bool(params, "includeRejected"),
        )
        return [m.to_dict() for m in matches]

    @app.get("/warehouse/discovery/export")
    async def discovery_export():
        return wh.discovery_export()

    # -- analytics ---------------------------------------------------------

    def _series(params, asset_key: str, attr_key: str):
        asset, attr = _require(params, asset_key, attr_key)
        return service.series.get_series(
            asset, attr, start=_opt_instant(params, "from"), end=_opt_instant(params, "to")
        )

    @app.get("/analytics/pearson")
    async def analytics_pearson(request: Request):
        from . import analytics

        params = request.query_params
        series_a = _series(params, "assetA", "attrA")
        series_b = _series(params, "assetB", "attrB")
        bucket = _opt_int(params, "bucket", 600)
        if bucket is None or bucket <= 0:
            raise ValidationError(f"bucket must be a positive number of seconds, got {bucket!r}")
        if _opt_bool(params, "perDay"):
            daily = analytics.daily_pearson(series_a, series_b, bucket)
            return {
                "bucketSeconds": bucket,
                "daily": [
                    {"day": d.day.isoformat(), "r": d.r, "pairCount": d.pair_count}
                    for d in daily
                ],
            }
        pairs = analytics.align(series_a, series_b, bucket)
        return {"bucketSeconds": bucket, "pairs": len(pairs), "r": analytics.pearson(pairs)}

    @app.get("/analytics/profile")
    async def analytics_profile(request: Request):
        from . import analytics

        params = request.query_params
        points = _series(params, "asset", "attr")
        weekdays = analytics.parse_weekday_filter(params.get("weekday"))
        profile = analytics.hourly_profile(points, weekdays)
        return {"weekday": params.get("weekday") or "ALL", "profile": profile}

    @app.get("/analytics/gaps")
    async def analytics_gaps(request: Request):
        from . import analytics

        params = request.query_params
        points = _series(params, "asset", "attr")
        max_gap = _opt_float(params, "maxGap")
        if max_gap is None:
            raise ValidationError("missing required query parameter: maxGap")
        gaps = analytics.detect_gaps(points, max_gap)
        return {
            "maxGapSeconds": max_gap,
            "gaps": [
                {
                    "start": format_iso(start),
                    "end": format_iso(end),
                    "seconds": (end - start).total_seconds(),
                }
                for start, end in gaps
            ],
        }

    @app.get("/analytics/seasonal")
    async def analytics_seasonal(request: Request):
        from . import analytics

        params = request.query_params
        points = _series(params, "asset", "attr")
        a_from, a_to, b_from, b_to = (
            parse_iso(v) for v in _require(params, "aFrom", "aTo", "bFrom", "bTo")
        )
        ratio = analytics.seasonal_ratio(points, (a_from, a_to), (b_from, b_to))
        return {"ratio": ratio}

    @app.get("/analytics/series")
    async def analytics_series():
        return [
            {"assetUrn": asset, "attribute": attr, "points": count}
            for asset, attr, count in service.series.list_series()
        ]

    if console_dir is not None and os.path.isdir(console_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/console", StaticFiles(directory=console_dir, html=True), name="console")

    return app
