"""Platform facade: wires storage, scheduling, progress, labeling, and the
iteration engine behind one object the HTTP service and CLI talk to."""
from __future__ import annotations

import os
import time
from pathlib import Path

from .assets.importers import import_dataset
from .assets.store import AssetStore
from .config import ServiceConfig
from .datasets import ops as dataset_ops
from .db import Database
from .errors import NotFoundError, StateError, ValidationError
from .executors.manifest import ExecutorRegistry
from .iteration import IterationEngine
from .labeling import HttpLabelerAdapter, LabelingGateway, SimLabeler
from .progress import ProgressBus, ProgressEvent
from .scheduler import GpuPool, Scheduler, TaskKind, TaskState, TaskTable

_STATE_CODES = {"done": 3, "failure": 4, "broken": 4}


class Platform:
    def __init__(self, config: ServiceConfig, persist_hook=None):
        self.config = config
        self.root = Path(config.store_root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock_path = self.root / "service.lock"
        self._acquire_lock()

        self.store = AssetStore(self.root / "store")
        self.db = Database(self.root / "platform.db")
        self.registry = ExecutorRegistry(self.db)
        self.pool = GpuPool(config.gpu_pool_capacity)
        self.table = TaskTable(self.db)

        if config.labeler_backend == "sim":
            backend = SimLabeler(rate=config.sim_labeler_rate)
        else:
            backend = HttpLabelerAdapter(config.labeler_backend)
        self.gateway = LabelingGateway(self.db, self.store, backend)

        self.scheduler = Scheduler(
            self.table, self.store, self.registry, self.pool,
            self.root / "tasks", stop_grace_seconds=config.stop_grace_seconds,
            handlers={
                TaskKind.IMPORT: self._handle_import,
                TaskKind.DATASET_OP: self._handle_dataset_op,
                TaskKind.LABEL: self._handle_label,
            },
        )
        self._recover_tasks()

        self.bus = ProgressBus(
            self.scheduler, self.db, self.root / "queue",
            poll_interval_ms=config.poll_interval_ms,
            dispatch_interval_ms=config.dispatch_interval_ms,
            persist_hook=persist_hook,
        )
        self.scheduler.on_terminal = self._on_task_terminal

        self.engine = IterationEngine(
            self.db, self.store, self.scheduler, self.gateway,
            self.root / "audit", progress_hook=self._on_label_progress,
        )
        self._started = False

    # -- lifecycle ---------------------------------------------------------

    def _acquire_lock(self) -> None:
        if self._lock_path.exists():
            try:
                pid = int(self._lock_path.read_text().strip())
                os.kill(pid, 0)
            except (ValueError, ProcessLookupError, PermissionError):
                pass  # stale lock from a dead process: steal it
            else:
                raise StateError(
                    f"store {self.root} is locked by running process {pid}"
                )
        self._lock_path.write_text(str(os.getpid()))

    def _recover_tasks(self) -> None:
        """Re-mark tasks that were in flight when the previous process died."""
        drain = self.config.drain_policy
        target = TaskState.BROKEN if drain == "broken" else TaskState.FAILURE
        for state in (TaskState.PENDING, TaskState.PREPARING, TaskState.RUNNING):
            for task in self.table.list(state):
                task.state = target
                task.finished = time.time()
                task.gpu_grant = None
                task.error_message = "service restarted while task was in flight"
                self.table.save(task)

    def start(self) -> None:
        if not self._started:
            self.bus.start()
            self._started = True

    def stop(self) -> None:
        if self._started:
            self.scheduler.shutdown(drain=self.config.drain_policy)
            self.bus.flush()
            self.bus.stop()
            self._started = False
        self.store.close()
        self.db.close()
        if self._lock_path.exists():
            self._lock_path.unlink()

    # -- task handlers (non-executor kinds) ----------------------------------

    def _handle_import(self, task) -> dict:
        spec = task.spec
        snapshot_id, stats = import_dataset(
            self.store,
            spec["source_dir"],
            spec["format"],
            unknown_label_policy=spec.get("policy", "ignore"),
            class_names=spec.get("class_names"),
            provenance=f"import:{task.task_id}",
        )
        return {"snapshot_id": snapshot_id, "stats": stats.to_dict()}

    def _handle_dataset_op(self, task) -> dict:
        spec = task.spec
        op = spec.get("op")
        args = spec.get("args") or {}
        if op == "filter":
            snapshot_id = dataset_ops.filter_snapshot(
                self.store, spec["a"],
                include_classes=set(args["include_classes"]) if args.get("include_classes") else None,
                exclude_classes=set(args["exclude_classes"]) if args.get("exclude_classes") else None,
                labeled_only=bool(args.get("labeled_only", False)),
            )
        elif op == "merge":
            snapshot_id = dataset_ops.merge(
                self.store, spec["a"], spec["b"],
                strategy=args.get("strategy", "union-annotations"),
                remap_classes=bool(args.get("remap_classes", True)),
            )
        elif op == "intersect":
            snapshot_id = dataset_ops.intersect(self.store, spec["a"], spec["b"])
        elif op == "exclude":
            snapshot_id = dataset_ops.exclude(self.store, spec["a"], spec["b"])
        else:
            raise ValidationError(f"unknown dataset op {op!r}")
        return {"snapshot_id": snapshot_id}

    def _handle_label(self, task) -> dict:
        spec = task.spec
        label_task = self.gateway.create_label_task(
            spec["dataset"],
            spec.get("classes") or spec.get("class_names") or [],
            instructions=spec.get("instructions", ""),
            doc_url=spec.get("doc_url"),
            initial_annotations=spec.get("initial_annotations"),
        )
        if label_task.state == "failed":
            raise StateError(label_task.last_error)
        deadline = time.monotonic() + 300
        while label_task.state not in ("completed", "failed"):
            if time.monotonic() > deadline:
                raise StateError("labeling timed out")
            label_task = self.gateway.poll_progress(label_task.label_task_id)
            self.bus.emit_task_state(
                task.user_id, task.task_id, label_task.progress,
                2 if label_task.state != "failed" else 4,
            )
            if label_task.state not in ("completed", "failed"):
                time.sleep(0.01)
        if label_task.state == "failed":
            raise StateError(label_task.last_error or "labeling failed")
        snapshot_id = self.gateway.collect_results(label_task.label_task_id)
        return {"label_task_id": label_task.label_task_id, "snapshot_id": snapshot_id}

    # -- progress plumbing -----------------------------------------------------

    def _on_task_terminal(self, task) -> None:
        code = _STATE_CODES.get(task.state.value, 4)
        self.bus.emit_task_state(
            task.user_id, task.task_id,
            1.0 if task.state is TaskState.DONE else task.progress,
            code, task.error_message or "",
        )

    def _on_label_progress(self, user_id: str, label_task) -> None:
        self.bus.emit_task_state(
            user_id, label_task.label_task_id, label_task.progress,
            2 if label_task.state != "failed" else 4,
        )

    # -- queries used by the service layer --------------------------------------

    def task_status(self, task_id: str) -> dict:
        task = self.scheduler.get_task(task_id)  # raises if unknown
        latest = self.bus.status_store.get(task_id)
        if latest is None:
            latest = ProgressEvent(
                user_id=task.user_id, task_id=task_id, progress=0.0,
                state_code=1, timestamp_ms=int(task.created * 1000),
            )
        return latest.to_doc()

    def list_assets(self, snapshot_id: str, offset: int, limit: int) -> dict:
        snapshot = self.store.get_snapshot(snapshot_id)
        page = self.store.list_page(snapshot_id, offset, limit)
        items = [
            {
                "asset_id": record.id,
                "size": record.byte_size,
                "annotations": [
                    {"class_id": a.class_id,
                     "box": [a.x_min, a.y_min, a.x_max, a.y_max]}
                    for a in anns
                ],
            }
            for record, anns in page
        ]
        return {
            "snapshot_id": snapshot_id,
            "total": len(snapshot),
            "offset": offset,
            "items": items,
            "class_names": snapshot.class_names,
        }
