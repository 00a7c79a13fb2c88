"""Command line client for the platform service (plus `serve` to run it)."""
from __future__ import annotations

import json
import sys
import time

import click
import httpx

from .config import ServiceConfig


def _base_url(ctx: click.Context) -> str:
    if ctx.obj.get("url"):
        return ctx.obj["url"].rstrip("/")
    try:
        config = ServiceConfig.load(ctx.obj.get("config"))
        return f"http://127.0.0.1:{config.port}"
    except FileNotFoundError:
        return "http://127.0.0.1:8400"


def _client(ctx: click.Context) -> httpx.Client:
    return httpx.Client(base_url=_base_url(ctx), timeout=600.0)


def _show(doc) -> None:
    click.echo(json.dumps(doc, indent=2, default=str))


def _check(response: httpx.Response) -> dict:
    if response.status_code >= 400:
        try:
            detail = response.json()
        except ValueError:
            detail = {"detail": response.text}
        click.echo(f"error {response.status_code}: {detail.get('detail')}", err=True)
        sys.exit(1)
    return response.json()


@click.group()
@click.option("--url", default=None, help="Service base URL (overrides config).")
@click.option("--config", default=None, type=click.Path(), help="Config file path.")
@click.pass_context
def main(ctx, url, config):
    ctx.ensure_object(dict)
    ctx.obj["url"] = url
    ctx.obj["config"] = config


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def serve(config_path):
    """Run the platform service until terminated."""
    import uvicorn

    from .platform import Platform
    from .service import create_app

    config = ServiceConfig.load(config_path)
    platform = Platform(config)
    platform.start()
    try:
        uvicorn.run(create_app(platform), host="127.0.0.1", port=config.port)
    finally:
        platform.stop()


def _wait_task(client: httpx.Client, task_id: str, timeout: float = 600.0) -> dict:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        task = _check(client.get(f"/api/tasks/{task_id}"))
        if task["state"] in ("done", "failure", "broken"):
            return task
        time.sleep(0.2)
    raise click.ClickException(f"task {task_id} did not finish within {timeout}s")


@main.command("import")
@click.option("--dir", "source_dir", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", required=True,
              type=click.Choice(["yolo-txt", "voc-xml-subset", "flat-unlabeled"]))
@click.option("--policy", default="ignore", type=click.Choice(["ignore", "abort", "add"]))
@click.option("--classes", default=None, help="Comma-separated class names.")
@click.pass_context
def import_cmd(ctx, source_dir, fmt, policy, classes):
    """Import a dataset directory as a new snapshot."""
    with _client(ctx) as client:
        body = {"source_dir": source_dir, "format": fmt, "policy": policy}
        if classes:
            body["class_names"] = classes.split(",")
        accepted = _check(client.post("/api/datasets/import", json=body))
        task = _wait_task(client, accepted["task_id"])
        _show(task)
        if task["state"] != "done":
            sys.exit(1)


@main.group()
def executor():
    """Executor registry commands."""


@executor.command("register")
@click.argument("package_path", type=click.Path(exists=True))
@click.pass_context
def executor_register(ctx, package_path):
    with _client(ctx) as client:
        _show(_check(client.post("/api/executors", json={"package_path": package_path})))


@executor.command("list")
@click.pass_context
def executor_list(ctx):
    with _client(ctx) as client:
        _show(_check(client.get("/api/executors")))


@main.group()
def project():
    """Iteration project commands."""


@project.command("create")
@click.option("--name", required=True)
@click.option("--classes", required=True, help="Comma-separated class names.")
@click.option("--superset", required=True, help="Data superset snapshot id.")
@click.option("--initial", default=None, help="Initial data snapshot id.")
@click.option("--val", required=True, help="Validation snapshot id.")
@click.option("--target", required=True, type=float, help="Target accuracy.")
@click.option("--batch", required=True, type=int, help="Mining batch size.")
@click.option("--auto", is_flag=True, default=False, help="Auto-advance stages.")
@click.option("--model", default=None, help="Initial model file path.")
@click.pass_context
def project_create(ctx, name, classes, superset, initial, val, target, batch, auto, model):
    with _client(ctx) as client:
        body = {
            "name": name,
            "class_names": classes.split(","),
            "data_superset": superset,
            "initial_data": initial,
            "validation_data": val,
            "target_accuracy": target,
            "mining_batch_size": batch,
            "auto_advance": auto,
            "initial_model": model,
        }
        _show(_check(client.post("/api/projects", json=body)))


@project.command("run")
@click.option("--id", "project_id", required=True)
@click.option("--auto", is_flag=True, default=False,
              help="Keep advancing until the project finishes or a stage fails.")
@click.pass_context
def project_run(ctx, project_id, auto):
    with _client(ctx) as client:
        while True:
            state = _check(client.post(f"/api/projects/{project_id}/advance"))
            click.echo(
                f"round {state['round_index']} stage {state['stage']} "
                f"accuracy {state['current_accuracy']:.4f}"
            )
            if state["stage"] == "finished":
                _show(state)
                return
            if state.get("stage_failed"):
                click.echo(f"stage failed: {state.get('stage_error')}", err=True)
                sys.exit(1)
            if not auto:
                return


@project.command("show")
@click.option("--id", "project_id", required=True)
@click.pass_context
def project_show(ctx, project_id):
    with _client(ctx) as client:
        _show(_check(client.get(f"/api/projects/{project_id}")))


@main.group()
def task():
    """Task commands."""


@task.command("stop")
@click.option("--id", "task_id", required=True)
@click.pass_context
def task_stop(ctx, task_id):
    with _client(ctx) as client:
        _show(_check(client.post(f"/api/tasks/{task_id}/stop")))


@task.command("show")
@click.option("--id", "task_id", required=True)
@click.pass_context
def task_show(ctx, task_id):
    with _client(ctx) as client:
        _show(_check(client.get(f"/api/tasks/{task_id}")))


if __name__ == "__main__":
    main()
