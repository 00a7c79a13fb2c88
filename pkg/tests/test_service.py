import time

import pytest
from fastapi.testclient import TestClient

from helpers import CLASSES, labeled_snapshot, unlabeled_snapshot
from test_platform import make_config, write_flat_source
from test_scheduler import SLEEP_FOREVER, write_package

from iterforge.platform import Platform
from iterforge.refexec import package_path
from iterforge.service import create_app


@pytest.fixture
def service(tmp_path):
    platform = Platform(make_config(tmp_path))
    platform.start()
    client = TestClient(create_app(platform))
    yield client, platform, tmp_path
    platform.stop()


def wait_task(client, task_id, timeout=60):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        doc = client.get(f"/api/tasks/{task_id}").json()
        if doc["state"] in ("done", "failure", "broken"):
            return doc
        time.sleep(0.05)
    raise AssertionError(f"task {task_id} did not finish")


def import_flat(client, tmp_path, n=4):
    src = write_flat_source(tmp_path, n)
    accepted = client.post(
        "/api/datasets/import",
        json={"source_dir": str(src), "format": "flat-unlabeled",
              "class_names": CLASSES},
    )
    assert accepted.status_code == 202
    task = wait_task(client, accepted.json()["task_id"])
    assert task["state"] == "done"
    return task["outputs"]["snapshot_id"]


class TestProjectsEndpoint:
    def test_empty_list(self, service):
        client, _, _ = service
        response = client.get("/api/projects")
        assert response.status_code == 200
        assert response.json() == []

    def test_unknown_project_404(self, service):
        client, _, _ = service
        assert client.get("/api/projects/ghost").status_code == 404


class TestDatasets:
    def test_import_and_browse(self, service):
        client, _, tmp_path = service
        sid = import_flat(client, tmp_path, n=4)
        page = client.get(f"/api/datasets/{sid}/assets", params={"limit": 2}).json()
        assert page["total"] == 4
        assert len(page["items"]) == 2
        rest = client.get(
            f"/api/datasets/{sid}/assets", params={"offset": 2, "limit": 10}
        ).json()
        assert len(rest["items"]) == 2
        # referential integrity: every listed asset id is distinct and present
        ids = [i["asset_id"] for i in page["items"] + rest["items"]]
        assert len(set(ids)) == 4

    def test_unknown_snapshot_404(self, service):
        client, _, _ = service
        assert client.get("/api/datasets/nope/assets").status_code == 404

    def test_dataset_op_roundtrip(self, service):
        client, platform, _ = service
        a, _ = unlabeled_snapshot(platform.store, [[1.0], [2.0]])
        b, _ = unlabeled_snapshot(platform.store, [[2.0], [3.0]])
        accepted = client.post(
            "/api/datasets/ops", json={"op": "intersect", "a": a, "b": b}
        )
        assert accepted.status_code == 202
        task = wait_task(client, accepted.json()["task_id"])
        assert task["state"] == "done"
        sid = task["outputs"]["snapshot_id"]
        assert client.get(f"/api/datasets/{sid}/assets").json()["total"] == 1

    def test_bad_op_fails_task(self, service):
        client, platform, _ = service
        a, _ = unlabeled_snapshot(platform.store, [[1.0]])
        accepted = client.post("/api/datasets/ops", json={"op": "warp", "a": a})
        task = wait_task(client, accepted.json()["task_id"])
        assert task["state"] == "failure"


class TestExecutors:
    def test_register_and_list(self, service):
        client, _, _ = service
        response = client.post(
            "/api/executors", json={"package_path": str(package_path("train"))}
        )
        assert response.status_code == 201
        assert response.json()["name"] == "toy-centroid-train"
        listed = client.get("/api/executors").json()
        assert [m["name"] for m in listed] == ["toy-centroid-train"]
        assert client.get("/api/executors", params={"kind": "mine"}).json() == []

    def test_duplicate_rejected(self, service):
        client, _, _ = service
        body = {"package_path": str(package_path("mine"))}
        assert client.post("/api/executors", json=body).status_code == 201
        response = client.post("/api/executors", json=body)
        assert response.status_code == 400
        assert "already registered" in response.json()["detail"]


class TestTasks:
    def register_train(self, client):
        client.post("/api/executors", json={"package_path": str(package_path("train"))})

    def test_train_task_lifecycle_and_status(self, service):
        client, platform, _ = service
        self.register_train(client)
        sid, _ = labeled_snapshot(platform.store, [[0.0, 0.0], [5.0, 5.0]], [0, 1])
        accepted = client.post(
            "/api/tasks",
            json={"kind": "train", "executor": {"name": "toy-centroid-train"},
                  "snapshots": {"train": sid, "val": sid}, "class_names": CLASSES},
        )
        assert accepted.status_code == 202
        task_id = accepted.json()["task_id"]
        task = wait_task(client, task_id)
        assert task["state"] == "done"
        assert task["outputs"]["accuracy"] == 1.0
        deadline = time.monotonic() + 5
        while time.monotonic() < deadline:
            status = client.get(f"/api/tasks/{task_id}/status").json()
            if status["state_code"] == 3:
                break
            time.sleep(0.05)
        assert status["state_code"] == 3
        assert status["progress"] == 1.0

    def test_status_before_any_progress_is_pending(self, service):
        client, platform, tmp_path = service
        platform.registry.register(write_package(tmp_path / "hang", script=SLEEP_FOREVER))
        sid, _ = labeled_snapshot(platform.store, [[0.0], [5.0]], [0, 1])
        accepted = client.post(
            "/api/tasks",
            json={"kind": "train", "executor": {"name": "mock"},
                  "snapshots": {"train": sid, "val": sid}, "class_names": CLASSES},
        )
        task_id = accepted.json()["task_id"]
        status = client.get(f"/api/tasks/{task_id}/status").json()
        assert status["state_code"] in (1, 2)
        client.post(f"/api/tasks/{task_id}/stop")
        assert wait_task(client, task_id)["state"] == "broken"

    def test_stop_running_task(self, service):
        client, platform, tmp_path = service
        platform.registry.register(write_package(tmp_path / "hang2", script=SLEEP_FOREVER))
        sid, _ = labeled_snapshot(platform.store, [[0.0], [5.0]], [0, 1])
        task_id = client.post(
            "/api/tasks",
            json={"kind": "train", "executor": {"name": "mock"},
                  "snapshots": {"train": sid, "val": sid}, "class_names": CLASSES},
        ).json()["task_id"]
        deadline = time.monotonic() + 20
        while client.get(f"/api/tasks/{task_id}").json()["state"] != "running":
            assert time.monotonic() < deadline
            time.sleep(0.05)
        time.sleep(0.2)
        stopped = client.post(f"/api/tasks/{task_id}/stop")
        assert stopped.status_code == 200
        assert wait_task(client, task_id)["state"] == "broken"

    def test_unknown_task_404(self, service):
        client, _, _ = service
        assert client.get("/api/tasks/t-ghost").status_code == 404
        assert client.get("/api/tasks/t-ghost/status").status_code == 404

    def test_bad_submission_400(self, service):
        client, _, _ = service
        response = client.post("/api/tasks", json={"kind": "transmogrify"})
        assert response.status_code == 400

    def test_every_listed_task_fetchable(self, service):
        client, platform, _ = service
        a, _ = unlabeled_snapshot(platform.store, [[1.0], [2.0]])
        b, _ = unlabeled_snapshot(platform.store, [[2.0]])
        for op in ("intersect", "exclude"):
            accepted = client.post("/api/datasets/ops", json={"op": op, "a": a, "b": b})
            wait_task(client, accepted.json()["task_id"])
        for doc in client.get("/api/tasks").json():
            assert client.get(f"/api/tasks/{doc['task_id']}").status_code == 200


class TestLabels:
    def test_label_flow_with_auto_collect(self, service):
        client, platform, _ = service
        snap, ids = unlabeled_snapshot(platform.store, [[3.0, 2.0], [-3.0, -2.0]])
        created = client.post(
            "/api/labels", json={"dataset": snap, "classes": CLASSES}
        )
        assert created.status_code == 201
        lt_id = created.json()["label_task_id"]
        deadline = time.monotonic() + 10
        doc = None
        while time.monotonic() < deadline:
            doc = client.get(f"/api/labels/{lt_id}").json()
            if doc["result_snapshot"]:
                break
            time.sleep(0.05)
        assert doc and doc["state"] == "completed"
        labeled = platform.store.get_snapshot(doc["result_snapshot"])
        assert labeled.entries[ids[0]][0].class_id == 1

    def test_unknown_label_task_404(self, service):
        client, _, _ = service
        assert client.get("/api/labels/lt-ghost").status_code == 404


class TestFullProjectOverHttp:
    def test_guided_loop_end_to_end(self, service):
        client, platform, tmp_path = service
        for kind in ("train", "mine"):
            client.post("/api/executors", json={"package_path": str(package_path(kind))})
        superset = import_flat(client, tmp_path, n=20)
        page = client.get(f"/api/datasets/{superset}/assets", params={"limit": 4}).json()
        initial_ids = [i["asset_id"] for i in page["items"]]
        initial = platform.store.commit_snapshot(
            [superset], {aid: [] for aid in initial_ids}, "import", CLASSES
        )
        val, _ = labeled_snapshot(
            platform.store,
            [[2.0, 1.0], [3.0, 0.5], [-2.0, -1.0], [-3.0, -0.5]],
            [1, 1, 0, 0],
        )
        created = client.post(
            "/api/projects",
            json={
                "name": "loop", "class_names": CLASSES, "data_superset": superset,
                "initial_data": initial, "validation_data": val,
                "target_accuracy": 0.9, "mining_batch_size": 5,
                "auto_advance": True,
            },
        )
        assert created.status_code == 201
        pid = created.json()["project_id"]

        with client.websocket_connect("/ws/u1") as ws:
            state = client.post(f"/api/projects/{pid}/advance").json()
            assert state["stage"] == "finished"
            frames = []
            deadline = time.monotonic() + 10
            while time.monotonic() < deadline and len(frames) < 1:
                frame = ws.receive_json()
                if frame.get("task_id"):
                    frames.append(frame)
            assert frames, "no progress frames arrived on the push channel"
            assert {"task_id", "progress", "state_code", "timestamp_ms"} <= set(frames[0])

        doc = client.get(f"/api/projects/{pid}").json()
        assert doc["stage"] == "finished"
        assert doc["output_model"]
        assert doc["next_action"]["stage"] == "finished"
        # advancing a finished project is a state conflict
        assert client.post(f"/api/projects/{pid}/advance").status_code == 409
