import json

import httpx
import pytest
from click.testing import CliRunner

from helpers import CLASSES, labeled_snapshot, run_server
from test_platform import make_config, write_flat_source

from iterforge.cli import main
from iterforge.platform import Platform
from iterforge.refexec import package_path
from iterforge.service import create_app


@pytest.fixture
def served(tmp_path):
    platform = Platform(make_config(tmp_path))
    platform.start()
    with run_server(create_app(platform)) as base_url:
        yield base_url, platform, tmp_path
    platform.stop()


def run_cli(base_url, *args):
    return CliRunner().invoke(main, ["--url", base_url, *args])


class TestCli:
    def test_import_prints_done_task(self, served):
        base_url, _, tmp_path = served
        src = write_flat_source(tmp_path, n=3)
        result = run_cli(
            base_url, "import", "--dir", str(src), "--format", "flat-unlabeled",
            "--classes", ",".join(CLASSES),
        )
        assert result.exit_code == 0, result.output
        doc = json.loads(result.output)
        assert doc["state"] == "done"
        assert doc["outputs"]["stats"]["assets_imported"] == 3

    def test_executor_register_and_list(self, served):
        base_url, _, _ = served
        result = run_cli(base_url, "executor", "register", str(package_path("train")))
        assert result.exit_code == 0, result.output
        assert json.loads(result.output)["name"] == "toy-centroid-train"
        listed = run_cli(base_url, "executor", "list")
        assert "toy-centroid-train" in listed.output

    def test_duplicate_register_reports_error(self, served):
        base_url, _, _ = served
        run_cli(base_url, "executor", "register", str(package_path("mine")))
        result = run_cli(base_url, "executor", "register", str(package_path("mine")))
        assert result.exit_code == 1
        assert "already registered" in result.output

    def test_project_create_and_run(self, served):
        base_url, platform, tmp_path = served
        for kind in ("train", "mine"):
            run_cli(base_url, "executor", "register", str(package_path(kind)))
        src = write_flat_source(tmp_path, n=12)
        imported = run_cli(
            base_url, "import", "--dir", str(src), "--format", "flat-unlabeled",
            "--classes", ",".join(CLASSES),
        )
        superset = json.loads(imported.output)["outputs"]["snapshot_id"]
        snap = platform.store.get_snapshot(superset)
        initial_ids = sorted(snap.asset_ids())[:3]
        initial = platform.store.commit_snapshot(
            [superset], {aid: [] for aid in initial_ids}, "import", CLASSES
        )
        val, _ = labeled_snapshot(
            platform.store, [[2.0, 1.0], [-2.0, -1.0]], [1, 0]
        )
        created = run_cli(
            base_url, "project", "create", "--name", "demo",
            "--classes", ",".join(CLASSES), "--superset", superset,
            "--initial", initial, "--val", val,
            "--target", "0.9", "--batch", "4",
        )
        assert created.exit_code == 0, created.output
        project_id = json.loads(created.output)["project_id"]

        ran = run_cli(base_url, "project", "run", "--id", project_id, "--auto")
        assert ran.exit_code == 0, ran.output
        assert "finished" in ran.output

        shown = run_cli(base_url, "project", "show", "--id", project_id)
        doc = json.loads(shown.output)
        assert doc["stage"] == "finished"

    def test_task_stop(self, served):
        base_url, platform, tmp_path = served
        from test_scheduler import SLEEP_FOREVER, write_package

        platform.registry.register(write_package(tmp_path / "hang", script=SLEEP_FOREVER))
        sid, _ = labeled_snapshot(platform.store, [[0.0], [5.0]], [0, 1])
        with httpx.Client(base_url=base_url) as client:
            task_id = client.post(
                "/api/tasks",
                json={"kind": "train", "executor": {"name": "mock"},
                      "snapshots": {"train": sid, "val": sid},
                      "class_names": CLASSES},
            ).json()["task_id"]
        import time

        deadline = time.monotonic() + 20
        while platform.scheduler.get_task(task_id).state.value != "running":
            assert time.monotonic() < deadline
            time.sleep(0.05)
        time.sleep(0.2)
        result = run_cli(base_url, "task", "stop", "--id", task_id)
        assert result.exit_code == 0, result.output
        final = run_cli(base_url, "task", "show", "--id", task_id)
        deadline = time.monotonic() + 20
        while json.loads(final.output)["state"] not in ("broken", "failure"):
            assert time.monotonic() < deadline
            time.sleep(0.1)
            final = run_cli(base_url, "task", "show", "--id", task_id)
        assert json.loads(final.output)["state"] == "broken"
