"""Labeling backends: the built-in simulator and the HTTP adapter.

Both expose the same three calls, so the gateway treats them
interchangeably:
    create_task(items, classes, instructions, doc_url) -> backend task id
    status(backend_task_id) -> {"progress": fraction, "state": str}
    results(backend_task_id) -> [{"asset_id":…, "objects":[{"class_id":…, "box":[…]}]}]
"""
from __future__ import annotations

import uuid

import httpx

from ..errors import NotFoundError


def default_ground_truth(payload: bytes | None, n_classes: int) -> list[dict]:
    """Label toy vector payloads: class 1 when the coordinate sum is positive."""
    if payload is None:
        return []
    try:
        values = [float(v) for v in payload.decode().strip().split(",")]
    except (UnicodeDecodeError, ValueError):
        return []
    class_id = 1 if sum(values) > 0 and n_classes > 1 else 0
    return [{"class_id": class_id, "box": [0.0, 0.0, 1.0, 1.0]}]


class SimLabeler:
    """Deterministic in-process annotator: labels `rate` assets per status poll."""

    def __init__(self, rate: int = 1000, ground_truth=default_ground_truth):
        self.rate = rate
        self.ground_truth = ground_truth
        self.tasks: dict[str, dict] = {}

    def create_task(self, items: list[dict], classes: list[str],
                    instructions: str = "", doc_url: str | None = None) -> str:
        task_id = "lb-" + uuid.uuid4().hex[:12]
        self.tasks[task_id] = {
            "items": list(items),
            "classes": list(classes),
            "instructions": instructions,
            "doc_url": doc_url,
            "labeled": 0,
        }
        return task_id

    def _task(self, backend_task_id: str) -> dict:
        task = self.tasks.get(backend_task_id)
        if task is None:
            raise NotFoundError(f"no labeling task {backend_task_id}")
        return task

    def status(self, backend_task_id: str) -> dict:
        task = self._task(backend_task_id)
        total = len(task["items"])
        task["labeled"] = min(total, task["labeled"] + self.rate)
        progress = task["labeled"] / total if total else 1.0
        state = "completed" if task["labeled"] >= total else "in-progress"
        return {"progress": progress, "state": state}

    def results(self, backend_task_id: str) -> list[dict]:
        task = self._task(backend_task_id)
        out = []
        for item in task["items"]:
            payload = item.get("payload")
            raw = payload.encode() if isinstance(payload, str) else payload
            out.append(
                {
                    "asset_id": item["asset_id"],
                    "objects": self.ground_truth(raw, len(task["classes"])),
                }
            )
        return out


class HttpLabelerAdapter:
    """Talks the documented JSON contract to an external labeling service."""

    def __init__(self, base_url: str, client: httpx.Client | None = None):
        self.base_url = base_url.rstrip("/")
        self.client = client or httpx.Client(timeout=10.0)

    def create_task(self, items: list[dict], classes: list[str],
                    instructions: str = "", doc_url: str | None = None) -> str:
        response = self.client.post(
            f"{self.base_url}/tasks",
            json={
                "items": items,
                "classes": classes,
                "instructions": instructions,
                "doc_url": doc_url,
            },
        )
        response.raise_for_status()
        return response.json()["task_id"]

    def status(self, backend_task_id: str) -> dict:
        response = self.client.get(f"{self.base_url}/tasks/{backend_task_id}")
        response.raise_for_status()
        doc = response.json()
        return {"progress": float(doc["progress"]), "state": doc["state"]}

    def results(self, backend_task_id: str) -> list[dict]:
        response = self.client.get(f"{self.base_url}/tasks/{backend_task_id}/results")
        response.raise_for_status()
        return response.json()
