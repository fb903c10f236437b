"""Command line entry point.

One binary, four families of subcommands: serve (run the whole service in
process), job (drive the jobs API), data (simulator generate/replay) and
analyze (correlation, profiles, gaps, seasonal ratios as plot-ready
output).  Everything except serve and data generate is a thin HTTP client
against a running instance.

Exit codes: 0 success, 1 usage error, 2 remote or API error, 3 I/O error.
The service URL resolves flag > config file > CITYFORGE_URL > default.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import sys
from dataclasses import dataclass

import click
import requests

from .errors import CityForgeError

DEFAULT_URL = "http://127.0.0.1:8000"
OUTPUT_FORMATS = ("json", "table", "csv")


class RemoteError(Exception):
    """The service rejected a request or could not be reached."""


@dataclass
class CliConfig:
    service_url: str = DEFAULT_URL
    output: str = "table"
    verbosity: int = 0


def _load_cli_config(url_flag, output_flag, config_path, verbosity) -> CliConfig:
    cfg = CliConfig(verbosity=verbosity)
    env = os.environ.get("CITYFORGE_URL")
    if env:
        cfg.service_url = env
    if config_path:
        with open(config_path) as handle:
            try:
                data = json.load(handle)
            except json.JSONDecodeError as exc:
                raise click.UsageError(f"config file {config_path} is not valid JSON: {exc}")
        if not isinstance(data, dict):
            raise click.UsageError(f"config file {config_path} must hold a JSON object")
        cfg.service_url = data.get("serviceUrl", cfg.service_url)
        cfg.output = data.get("outputFormat", cfg.output)
    if url_flag:
        cfg.service_url = url_flag
    if output_flag:
        cfg.output = output_flag
    if cfg.output not in OUTPUT_FORMATS:
        raise click.UsageError(f"output format must be one of {', '.join(OUTPUT_FORMATS)}")
    return cfg


class Api:
    """Tiny HTTP client; non-2xx and transport failures become RemoteError."""

    def __init__(self, base_url: str, timeout: float = 30.0) -> None:
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = requests.Session()

    def request(self, method: str, path: str, **kwargs):
        url = self.base_url + path
        try:
            response = self._session.request(method, url, timeout=self.timeout, **kwargs)
        except requests.RequestException as exc:
            raise RemoteError(f"cannot reach {self.base_url}: {exc}") from exc
        if response.status_code >= 400:
            try:
                message = response.json().get("error", response.text)
            except ValueError:
                message = response.text
            raise RemoteError(f"{method} {path} failed ({response.status_code}): {message}")
        if response.status_code == 204 or not response.content:
            return None
        return response.json()

    def get(self, path, **kw):
        return self.request("GET", path, **kw)

    def post(self, path, **kw):
        return self.request("POST", path, **kw)

    def delete(self, path, **kw):
        return self.request("DELETE", path, **kw)


# -- output rendering ------------------------------------------------------

def _emit_rows(cfg: CliConfig, header: list[str], rows: list[list]) -> None:
    def cell(value):
        return "" if value is None else str(value)

    if cfg.output == "csv":
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([cell(v) for v in row])
        return
    widths = [len(h) for h in header]
    text_rows = [[cell(v) for v in row] for row in rows]
    for row in text_rows:
        for i, value in enumerate(row):
            widths[i] = max(widths[i], len(value))
    click.echo("  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip())
    for row in text_rows:
        click.echo("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip())


def _emit(cfg: CliConfig, payload, header: list[str] | None = None, rows: list[list] | None = None) -> None:
    """JSON mode prints the payload; table/csv modes print the row form
    (or a key/value listing when no rows were prepared)."""
    if cfg.output == "json":
        click.echo(json.dumps(payload, indent=2, default=str))
        return
    if rows is not None:
        _emit_rows(cfg, header or [], rows)
        return
    if isinstance(payload, dict):
        _emit_rows(cfg, ["key", "value"], [[k, _flat(v)] for k, v in payload.items()])
    elif isinstance(payload, list):
        if payload and isinstance(payload[0], dict):
            keys = list(payload[0].keys())
            _emit_rows(cfg, keys, [[_flat(item.get(k)) for k in keys] for item in payload])
        else:
            for item in payload:
                click.echo(str(item))
    else:
        click.echo(str(payload))


def _flat(value):
    if isinstance(value, (dict, list)):
        return json.dumps(value, separators=(",", ":"))
    return value


# -- asset shorthand -------------------------------------------------------

def _family_attributes() -> dict[str, str]:
    from .simulator.config import STREAMS

    out = {}
    for spec in STREAMS.values():
        family = spec.asset_urn.split(":")[-2]
        out[family] = spec.attribute
    return out


def _resolve_asset(text: str, attr_flag: str | None) -> tuple[str, str]:
    """`parking:p-total` style shorthand or a full URN; the attribute
    defaults from the stream family unless overridden."""
    families = _family_attributes()
    if text.startswith("urn:"):
        urn = text
        parts = text.split(":")
        family = parts[-2] if len(parts) >= 2 else ""
    elif ":" in text:
        family, short = text.split(":", 1)
        if family not in families:
            raise click.UsageError(
                f"unknown stream family {family!r}; use one of {', '.join(sorted(families))} or a full URN"
            )
        urn = f"urn:oc:entity:santander:{family}:{short}"
    else:
        raise click.UsageError(f"asset must be family:name shorthand or a URN, got {text!r}")
    attribute = attr_flag or families.get(family)
    if not attribute:
        raise click.UsageError(f"cannot infer an attribute for {text!r}; pass --attr")
    return urn, attribute


def _parse_kv(pairs: tuple[str, ...], option: str) -> dict:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise click.UsageError(f"{option} expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        out[key.strip()] = _coerce(value)
    return out


def _coerce(text: str):
    lowered = text.strip().lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _query_from_kv(pairs: tuple[str, ...]) -> dict:
    raw = _parse_kv(pairs, "--query")
    query = {}
    for key, value in raw.items():
        if key in ("idPattern", "entityType", "type"):
            query["entityType" if key == "type" else key] = str(value)
        elif key == "attrs":
            query["attrs"] = [a for a in str(value).split(",") if a]
        elif key == "bbox":
            query["bbox"] = [float(p) for p in str(value).split(",")]
        else:
            raise click.UsageError(f"unknown query field {key!r}")
    return query


# -- command tree ----------------------------------------------------------

@click.group()
@click.option("--url", default=None, help="Service URL (overrides config file and CITYFORGE_URL).")
@click.option("--config", "config_path", default=None, help="JSON config file.")
@click.option("--output", type=click.Choice(OUTPUT_FORMATS), default=None, help="Output format.")
@click.option("-v", "--verbose", count=True, help="Increase log verbosity.")
@click.pass_context
def cli(ctx, url, config_path, output, verbose):
    """Smart-city stream annotation service and toolkit."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING)
    ctx.obj = _load_cli_config(url, output, config_path, verbose)


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--data-dir", default=None, help="Persistence directory; omit for in-memory only.")
@click.option("--console", "console_dir", default=None, help="Static console directory to mount at /console.")
@click.option("--discovery-webhook", default=None, help="URL receiving aggregated discovery pushes.")
def serve(host, port, data_dir, console_dir, discovery_webhook):
    """Run broker, jobs, warehouse and analytics as one process."""
    from .service import serve as run_service

    run_service(
        host=host,
        port=port,
        data_dir=data_dir,
        discovery_webhook=discovery_webhook,
        console_dir=console_dir,
    )


# -- jobs ------------------------------------------------------------------

@cli.group()
def job():
    """Manage annotation jobs."""


@job.command("create")
@click.option("--kind", type=click.Choice(["classification", "anomalyDetection"]), required=True)
@click.option("--domain", required=True, help="Tag domain URN the job annotates into.")
@click.option("--attr", "attribute", required=True, help="Entity attribute to analyze.")
@click.option("--query", "query_pairs", multiple=True, help="Query field, e.g. 'idPattern=^urn:.*$'.")
@click.option("--param", "param_pairs", multiple=True, help="Executor parameter, e.g. 'zThreshold=4'.")
@click.pass_obj
def job_create(cfg, kind, domain, attribute, query_pairs, param_pairs):
    api = Api(cfg.service_url)
    body = {
        "kind": kind,
        "query": _query_from_kv(query_pairs),
        "attribute": attribute,
        "tagDomain": domain,
    }
    params = _parse_kv(param_pairs, "--param")
    if params:
        body["executorParams"] = params
    _emit(cfg, api.post("/jobs", json=body))


@job.command("train")
@click.argument("job_id", type=int)
@click.option("--samples", "samples_path", required=True, help="CSV file with header tag,value.")
@click.pass_obj
def job_train(cfg, job_id, samples_path):
    with open(samples_path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or not {"tag", "value"} <= set(reader.fieldnames):
            raise click.UsageError(f"{samples_path} needs a tag,value header")
        samples = []
        for line, row in enumerate(reader, start=2):
            try:
                value = float(row["value"])
            except (TypeError, ValueError):
                raise click.UsageError(f"{samples_path}:{line}: value {row['value']!r} is not a number")
            samples.append({"tag": row["tag"], "value": value})
    api = Api(cfg.service_url)
    _emit(cfg, api.post(f"/jobs/{job_id}/train", json=samples))


@job.command("start")
@click.argument("job_id", type=int)
@click.pass_obj
def job_start(cfg, job_id):
    _emit(cfg, Api(cfg.service_url).post(f"/jobs/{job_id}/start"))


@job.command("stop")
@click.argument("job_id", type=int)
@click.pass_obj
def job_stop(cfg, job_id):
    _emit(cfg, Api(cfg.service_url).post(f"/jobs/{job_id}/stop"))


@job.command("list")
@click.pass_obj
def job_list(cfg):
    jobs = Api(cfg.service_url).get("/jobs")
    if cfg.output == "json":
        _emit(cfg, jobs)
        return
    header = ["id", "kind", "status", "attribute", "tagDomain", "annotated", "processed"]
    rows = [
        [j["id"], j["kind"], j["status"], j["attribute"], j["tagDomain"],
         j["counters"]["annotated"], j["counters"]["processed"]]
        for j in jobs
    ]
    _emit(cfg, jobs, header, rows)


@job.command("show")
@click.argument("job_id", type=int)
@click.pass_obj
def job_show(cfg, job_id):
    _emit(cfg, Api(cfg.service_url).get(f"/jobs/{job_id}"))


@job.command("delete")
@click.argument("job_id", type=int)
@click.pass_obj
def job_delete(cfg, job_id):
    Api(cfg.service_url).delete(f"/jobs/{job_id}")
    _emit(cfg, {"deleted": job_id})


# -- data ------------------------------------------------------------------

@cli.group()
def data():
    """Generate and replay city datasets."""


@data.command("generate")
@click.option("--config", "city_config_path", default=None, help="City config JSON; defaults apply when omitted.")
@click.option("--out", "out_dir", required=True, help="Output directory for CSVs and manifests.")
@click.pass_obj
def data_generate(cfg, city_config_path, out_dir):
    from .simulator import CityConfig, generate

    if city_config_path:
        with open(city_config_path) as handle:
            try:
                config = CityConfig.from_dict(json.load(handle))
            except json.JSONDecodeError as exc:
                raise click.UsageError(f"{city_config_path} is not valid JSON: {exc}")
    else:
        config = CityConfig()
    if os.path.exists(os.path.join(out_dir, "city.json")):
        raise click.UsageError(f"{out_dir} already holds a dataset; pick a new --out or remove it")
    result = generate(config, out_dir)
    summary = {
        "outDir": out_dir,
        "seed": config.seed,
        "days": config.days,
        "points": result["points"],
        "files": sorted(result["files"]),
    }
    _emit(cfg, summary)


@data.command("replay")
@click.option("--dir", "dataset_dir", required=True, help="Directory of generated CSVs.")
@click.option("--speed", default="inf", show_default=True,
              help="Time compression factor; inf replays as fast as possible.")
@click.pass_obj
def data_replay(cfg, dataset_dir, speed):
    from .simulator.replay import dataset_files, replay

    try:
        speed_value = float(speed)
    except ValueError:
        raise click.UsageError(f"--speed must be a number or inf, got {speed!r}")
    report = replay(dataset_files(dataset_dir), cfg.service_url, speed=speed_value)
    if report.aborted:
        raise RemoteError(report.message or "replay aborted")
    _emit(cfg, report.to_dict())


# -- analytics -------------------------------------------------------------

def _time_params(from_, to):
    params = {}
    if from_:
        params["from"] = from_
    if to:
        params["to"] = to
    return params


@cli.group()
def analyze():
    """Correlations, daily profiles, gap and seasonal reports."""


@analyze.command("pearson")
@click.option("--a", "asset_a", required=True, help="First series (family:name or URN).")
@click.option("--b", "asset_b", required=True, help="Second series.")
@click.option("--attr-a", default=None)
@click.option("--attr-b", default=None)
@click.option("--bucket", default=600, show_default=True, type=int, help="Alignment bucket seconds.")
@click.option("--per-day", is_flag=True, help="One Pearson r per UTC day instead of a single value.")
@click.option("--from", "from_", default=None, help="ISO-8601 range start (inclusive).")
@click.option("--to", default=None, help="ISO-8601 range end (exclusive).")
@click.pass_obj
def analyze_pearson(cfg, asset_a, asset_b, attr_a, attr_b, bucket, per_day, from_, to):
    urn_a, attribute_a = _resolve_asset(asset_a, attr_a)
    urn_b, attribute_b = _resolve_asset(asset_b, attr_b)
    params = {
        "assetA": urn_a, "attrA": attribute_a,
        "assetB": urn_b, "attrB": attribute_b,
        "bucket": bucket, "perDay": "true" if per_day else "false",
    }
    params.update(_time_params(from_, to))
    payload = Api(cfg.service_url).get("/analytics/pearson", params=params)
    if cfg.output == "json":
        _emit(cfg, payload)
    elif per_day:
        rows = [[d["day"], d["r"], d["pairCount"]] for d in payload["daily"]]
        _emit(cfg, payload, ["day", "r", "pairCount"], rows)
    else:
        _emit(cfg, payload, ["r", "pairs"], [[payload["r"], payload["pairs"]]])


@analyze.command("profile")
@click.option("--asset", required=True, help="Series (family:name or URN).")
@click.option("--attr", default=None)
@click.option("--weekday", default="ALL", show_default=True,
              help="ALL, WEEKDAYS, WEEKEND, or a day name like SAT.")
@click.option("--from", "from_", default=None)
@click.option("--to", default=None)
@click.pass_obj
def analyze_profile(cfg, asset, attr, weekday, from_, to):
    urn, attribute = _resolve_asset(asset, attr)
    params = {"asset": urn, "attr": attribute, "weekday": weekday}
    params.update(_time_params(from_, to))
    payload = Api(cfg.service_url).get("/analytics/profile", params=params)
    if cfg.output == "json":
        _emit(cfg, payload)
    else:
        rows = [[hour, mean] for hour, mean in enumerate(payload["profile"])]
        _emit(cfg, payload, ["hour", "mean"], rows)


@analyze.command("gaps")
@click.option("--asset", required=True)
@click.option("--attr", default=None)
@click.option("--max-gap", "max_gap", required=True, type=float, help="Largest normal spacing, seconds.")
@click.option("--from", "from_", default=None)
@click.option("--to", default=None)
@click.pass_obj
def analyze_gaps(cfg, asset, attr, max_gap, from_, to):
    urn, attribute = _resolve_asset(asset, attr)
    params = {"asset": urn, "attr": attribute, "maxGap": max_gap}
    params.update(_time_params(from_, to))
    payload = Api(cfg.service_url).get("/analytics/gaps", params=params)
    if cfg.output == "json":
        _emit(cfg, payload)
    else:
        rows = [[g["start"], g["end"], g["seconds"]] for g in payload["gaps"]]
        _emit(cfg, payload, ["start", "end", "seconds"], rows)


@analyze.command("seasonal")
@click.option("--asset", required=True)
@click.option("--attr", default=None)
@click.option("--a-from", required=True, help="Period A start (ISO-8601, inclusive).")
@click.option("--a-to", required=True, help="Period A end (exclusive).")
@click.option("--b-from", required=True)
@click.option("--b-to", required=True)
@click.pass_obj
def analyze_seasonal(cfg, asset, attr, a_from, a_to, b_from, b_to):
    urn, attribute = _resolve_asset(asset, attr)
    params = {
        "asset": urn, "attr": attribute,
        "aFrom": a_from, "aTo": a_to, "bFrom": b_from, "bTo": b_to,
    }
    payload = Api(cfg.service_url).get("/analytics/seasonal", params=params)
    _emit(cfg, payload, ["ratio"], [[payload["ratio"]]])


# -- entry point -----------------------------------------------------------

def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.exceptions.ClickException as exc:
        # click's own exit codes are not part of our contract
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except RemoteError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except CityForgeError as exc:
        # locally raised domain validation, same bucket as usage problems
        click.echo(f"error: {exc}", err=True)
        return 1
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
