"""Labeling gateway: dispatch datasets to a backend and collect snapshots."""
from __future__ import annotations

import json
import uuid
from dataclasses import dataclass, field

from ..assets.store import AssetStore
from ..assets.types import AnnotationObject
from ..db import Database
from ..errors import IntegrityError, NotFoundError, StateError, ValidationError

LABEL_STATES = ("created", "in-progress", "completed", "failed")


@dataclass
class LabelTask:
    label_task_id: str
    dataset: str
    class_names: list[str]
    instructions: str = ""
    doc_url: str | None = None
    state: str = "created"
    progress: float = 0.0
    backend_task_id: str | None = None
    stale: bool = False
    retryable: bool = False
    last_error: str = ""
    unknown_dropped: int = 0
    result_snapshot: str | None = None
    pre_annotated: bool = False
    extra: dict = field(default_factory=dict)

    def to_doc(self) -> dict:
        return dict(vars(self))

    @classmethod
    def from_doc(cls, doc: dict) -> "LabelTask":
        return cls(**doc)


class LabelingGateway:
    """Creates label tasks against a pluggable backend and imports results."""

    def __init__(self, db: Database, store: AssetStore, backend,
                 unknown_label_policy: str = "ignore"):
        if unknown_label_policy not in ("ignore", "abort"):
            raise ValidationError(f"unknown label policy {unknown_label_policy!r}")
        self._db = db
        self.store = store
        self.backend = backend
        self.unknown_label_policy = unknown_label_policy
        self._db.execute(
            "CREATE TABLE IF NOT EXISTS label_tasks (id TEXT PRIMARY KEY, doc TEXT)"
        )

    def _save(self, task: LabelTask) -> None:
        self._db.execute(
            "INSERT INTO label_tasks (id, doc) VALUES (?,?) "
            "ON CONFLICT(id) DO UPDATE SET doc=excluded.doc",
            (task.label_task_id, json.dumps(task.to_doc())),
        )

    def get(self, label_task_id: str) -> LabelTask:
        row = self._db.query_one(
            "SELECT doc FROM label_tasks WHERE id=?", (label_task_id,)
        )
        if row is None:
            raise NotFoundError(f"no label task {label_task_id}")
        return LabelTask.from_doc(json.loads(row[0]))

    def list(self) -> list[LabelTask]:
        rows = self._db.query("SELECT doc FROM label_tasks ORDER BY rowid")
        return [LabelTask.from_doc(json.loads(r[0])) for r in rows]

    def create_label_task(
        self,
        dataset: str,
        classes: list[str],
        instructions: str = "",
        doc_url: str | None = None,
        initial_annotations: dict[str, list[dict]] | None = None,
    ) -> LabelTask:
        if not classes:
            raise ValidationError("labeling needs a non-empty class list")
        snapshot = self.store.get_snapshot(dataset)
        if len(snapshot) == 0:
            raise ValidationError("cannot label an empty dataset")

        items = []
        for asset_id in snapshot.entries:
            blob = self.store.get_blob(asset_id)
            try:
                payload = blob.decode()
            except UnicodeDecodeError:
                payload = None
            items.append(
                {
                    "asset_id": asset_id,
                    "payload": payload,
                    "objects": (initial_annotations or {}).get(asset_id, []),
                }
            )

        task = LabelTask(
            label_task_id="lt-" + uuid.uuid4().hex[:12],
            dataset=dataset,
            class_names=list(classes),
            instructions=instructions,
            doc_url=doc_url,
            pre_annotated=initial_annotations is not None,
        )
        try:
            task.backend_task_id = self.backend.create_task(
                items, list(classes), instructions, doc_url
            )
            task.state = "in-progress"
        except Exception as exc:
            task.state = "failed"
            task.retryable = True
            task.last_error = f"labeling backend unreachable: {exc}"
        self._save(task)
        return task

    def poll_progress(self, label_task_id: str) -> LabelTask:
        task = self.get(label_task_id)
        if task.state in ("completed", "failed"):
            return task
        try:
            status = self.backend.status(task.backend_task_id)
        except Exception as exc:
            task.stale = True
            task.last_error = str(exc)
            self._save(task)
            return task
        task.stale = False
        task.progress = max(task.progress, float(status["progress"]))
        if status["state"] == "completed" or task.progress >= 1.0:
            task.state = "completed"
            task.progress = 1.0
        elif status["state"] == "failed":
            task.state = "failed"
        else:
            task.state = "in-progress"
        self._save(task)
        return task

    def collect_results(self, label_task_id: str) -> str:
        task = self.get(label_task_id)
        if task.state != "completed":
            raise StateError(
                f"label task {label_task_id} is {task.state}, not completed"
            )
        if task.result_snapshot is not None:
            return task.result_snapshot

        results = self.backend.results(task.backend_task_id)
        source = self.store.get_snapshot(task.dataset)
        got_ids = {r["asset_id"] for r in results}
        if got_ids != source.asset_ids():
            raise IntegrityError(
                "labeling results do not cover the dispatched asset set "
                f"({len(got_ids)} of {len(source)})"
            )

        n_classes = len(task.class_names)
        entries = {}
        dropped = 0
        for asset_id in source.entries:  # preserve source ordering
            objects = next(r["objects"] for r in results if r["asset_id"] == asset_id)
            anns = []
            for obj in objects:
                class_id = int(obj["class_id"])
                if class_id >= n_classes:
                    if self.unknown_label_policy == "abort":
                        raise ValidationError(
                            f"annotation references unknown class {class_id}"
                        )
                    dropped += 1
                    continue
                box = obj["box"]
                anns.append(AnnotationObject(class_id, *[float(v) for v in box]))
            entries[asset_id] = anns

        snapshot_id = self.store.commit_snapshot(
            [task.dataset], entries, f"label:{task.label_task_id}", task.class_names
        )
        task.unknown_dropped = dropped
        task.result_snapshot = snapshot_id
        self._save(task)
        return snapshot_id
