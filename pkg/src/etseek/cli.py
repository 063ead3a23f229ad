"""Thin command-line client for the experiment service.

By default the commands talk to an in-process instance of the FastAPI app,
so no server needs to be running; ``--server URL`` points them at a remote
deployment instead, and ``etseek serve`` starts one.
"""

from __future__ import annotations

import json
import sys

import click
import httpx
import yaml

from .errors import ConfigInvalid


def _load_config_data(path: str) -> dict:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigInvalid(f"top level of {path} must be a mapping")
    return data


def _client(server: str | None):
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _fail_on_http_error(response) -> dict:
    if response.status_code != 200:
        try:
            detail = response.json().get("detail")
        except Exception:
            detail = response.text
        click.echo(f"error ({response.status_code}): {detail}", err=True)
        sys.exit(2)
    return response.json()


def _print_checks(checks) -> bool:
    ok = True
    for check in checks:
        status = "PASS" if check["passed"] else "FAIL"
        ok = ok and check["passed"]
        click.echo(f"[{status}] {check['name']}: {check['detail']}")
    return ok


@click.group()
def main():
    """Event-triggered extremum-seeking experiments."""


@main.command()
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--assert", "assert_checks", is_flag=True,
              help="Exit nonzero if any analysis check fails.")
@click.option("--out", "out_dir", default=None, help="Output directory override.")
@click.option("--seed", default=None, type=int, help="Random-seed override.")
@click.option("--server", default=None, help="Remote service URL (default: in-process).")
def run(config_path, assert_checks, out_dir, seed, server):
    """Run the experiment described by CONFIG_PATH."""
    data = _load_config_data(config_path)
    if seed is not None:
        data["seed"] = seed
    with _client(server) as client:
        payload = {"config": data, "output_dir": out_dir}
        body = _fail_on_http_error(client.post("/experiments/run", json=payload))
    click.echo(
        f"{body['controller']}: {body['termination']} at t={body['final_time']:g} "
        f"with {body['jump_count']} jumps"
    )
    ok = _print_checks(body["checks"])
    for path in body["files"]:
        click.echo(f"wrote {path}")
    if assert_checks and not ok:
        sys.exit(1)


@main.command()
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--server", default=None, help="Remote service URL (default: in-process).")
def validate(config_path, server):
    """Validate CONFIG_PATH and print the resolved configuration."""
    data = _load_config_data(config_path)
    with _client(server) as client:
        response = client.post("/configs/validate", json=data)
    if response.status_code != 200:
        for item in response.json().get("detail", []):
            path = ".".join(str(p) for p in item.get("loc", [])[1:])
            click.echo(f"invalid: {path}: {item.get('msg')}", err=True)
        sys.exit(1)
    click.echo(yaml.safe_dump(response.json()["resolved"], sort_keys=False))


@main.command()
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--assert", "assert_checks", is_flag=True,
              help="Exit nonzero if any verdict or per-run check fails.")
@click.option("--out", "out_dir", default=None, help="Output directory override.")
@click.option("--server", default=None, help="Remote service URL (default: in-process).")
def sweep(config_path, assert_checks, out_dir, server):
    """Run the parameter sweep described by CONFIG_PATH."""
    data = _load_config_data(config_path)
    with _client(server) as client:
        payload = {"config": data, "output_dir": out_dir}
        body = _fail_on_http_error(client.post("/experiments/sweep", json=payload))
    click.echo(f"sweep over {body['parameter']}: {body['values']}")
    ok = _print_checks(body["verdicts"])
    for run_body in body["runs"]:
        click.echo(
            f"  {body['parameter']}={run_body['reports'].get('value', '')} "
            f"{run_body['termination']} jumps={run_body['jump_count']}"
        )
        ok = ok and run_body["all_passed"]
    click.echo(f"wrote {body['summary_file']}")
    if assert_checks and not ok:
        sys.exit(1)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host, port):
    """Start the experiment service."""
    import uvicorn

    uvicorn.run("etseek.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
