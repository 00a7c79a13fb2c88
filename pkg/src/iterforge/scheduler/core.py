"""The scheduling authority: submission, subtask execution, GPU leases, stop.

One worker thread runs each task's subtasks in dependency order; all task
state and pool mutations are serialized through a single lock, so observed
transitions are atomic. Executor processes themselves run truly in parallel.
"""
from __future__ import annotations

import json
import threading
import time
from pathlib import Path

from ..assets.store import AssetStore
from ..errors import IterforgeError, NotFoundError, StateError, ValidationError
from ..executors import manifest as manifest_mod
from ..executors import runner as runner_mod
from ..executors.workspace import Workspace, prepare_workspace
from .pool import GpuPool
from .tasks import (
    GPU_KINDS,
    TERMINAL_STATES,
    AtomicSubtask,
    TaskKind,
    TaskRecord,
    TaskState,
    TaskTable,
    decompose,
)


class Scheduler:
    def __init__(
        self,
        table: TaskTable,
        store: AssetStore,
        registry: manifest_mod.ExecutorRegistry,
        pool: GpuPool,
        tasks_root: str | Path,
        stop_grace_seconds: float = 10.0,
        handlers: dict | None = None,
    ):
        self.table = table
        self.store = store
        self.registry = registry
        self.pool = pool
        self.tasks_root = Path(tasks_root)
        self.tasks_root.mkdir(parents=True, exist_ok=True)
        self.stop_grace_seconds = stop_grace_seconds
        self.handlers = handlers or {}
        self._lock = threading.RLock()
        self._live: dict[str, TaskRecord] = {}
        self._workers: dict[str, threading.Thread] = {}
        self._handles: dict[str, runner_mod.InstanceHandle] = {}
        self._workspaces: dict[str, Workspace] = {}
        self._stop_flags: set[str] = set()
        self.on_terminal = None  # optional callback(TaskRecord) after a task ends

    # -- submission ------------------------------------------------------

    def submit(self, spec: dict) -> str:
        """Validate, persist pending, and start asynchronous execution."""
        try:
            kind = TaskKind(spec.get("kind"))
        except ValueError:
            raise ValidationError(f"unknown task kind {spec.get('kind')!r}")
        subtasks = decompose(kind)
        if kind in GPU_KINDS:
            n_gpus = int(spec.get("gpus", 1))
            if n_gpus < 1:
                raise ValidationError("GPU kinds need at least one GPU")
            if n_gpus > self.pool.capacity:
                raise ValidationError(
                    f"requested {n_gpus} GPUs but pool capacity is {self.pool.capacity}"
                )
            executor = spec.get("executor") or {}
            manifest = self.registry.get(executor.get("name"), executor.get("version"))
            if kind.value not in manifest.kinds:
                raise ValidationError(
                    f"executor {manifest.name} does not implement {kind.value}"
                )
            for key in ("train", "val", "candidates"):
                sid = (spec.get("snapshots") or {}).get(key)
                if sid is not None and not self.store.has_snapshot(sid):
                    raise NotFoundError(f"snapshot {sid} for {key!r} not found")
        else:
            if kind not in self.handlers:
                raise ValidationError(f"no handler installed for kind {kind.value}")

        task = TaskRecord(
            task_id=TaskTable.new_id(),
            user_id=spec.get("user_id", "u1"),
            kind=kind,
            spec=spec,
            inputs={"subtasks": [s.kind for s in subtasks]},
        )
        with self._lock:
            self.table.insert(task)
            self._live[task.task_id] = task
            worker = threading.Thread(
                target=self._run_task, args=(task.task_id,), daemon=True,
                name=f"task-{task.task_id}",
            )
            self._workers[task.task_id] = worker
            worker.start()
        return task.task_id

    # -- state bookkeeping -------------------------------------------------

    def get_task(self, task_id: str) -> TaskRecord:
        with self._lock:
            if task_id in self._live:
                return self._live[task_id]
        return self.table.get(task_id)

    def list_tasks(self, state: TaskState | None = None) -> list[TaskRecord]:
        return self.table.list(state)

    def _save(self, task: TaskRecord) -> None:
        self.table.save(task)

    def _event(self, task_id: str, name: str) -> None:
        with self._lock:
            task = self._live[task_id]
            task.events.append((time.time(), name))
            self._save(task)

    def _transition(self, task_id: str, target: TaskState, error: str | None = None,
                    outputs: dict | None = None) -> bool:
        """Atomically advance a task; returns False if it already terminated."""
        with self._lock:
            task = self._live[task_id]
            if task.state in TERMINAL_STATES:
                return False
            self.table.check_transition(task.state, target)
            task.state = target
            if target is TaskState.RUNNING and task.started is None:
                task.started = time.time()
            if target in TERMINAL_STATES:
                task.finished = time.time()
                task.progress = 1.0 if target is TaskState.DONE else task.progress
                task.gpu_grant = None
            if error is not None:
                task.error_message = error
            if outputs:
                task.outputs.update(outputs)
            self._save(task)
            return True

    def _stop_requested(self, task_id: str) -> bool:
        with self._lock:
            return task_id in self._stop_flags

    # -- execution ---------------------------------------------------------

    def _run_task(self, task_id: str) -> None:
        task = self.get_task(task_id)
        try:
            if task.kind in GPU_KINDS:
                self._run_executor_task(task)
            else:
                self._run_handler_task(task)
        except IterforgeError as exc:
            self._transition(task_id, TaskState.FAILURE, error=str(exc))
        except Exception as exc:  # defensive: worker must never die silently
            self._transition(task_id, TaskState.FAILURE, error=f"internal error: {exc}")
        finally:
            self.pool.release(task_id)
            if self.on_terminal is not None:
                try:
                    self.on_terminal(self.table.get(task_id))
                except Exception:
                    pass  # progress reporting must never kill a worker
            with self._lock:
                self._workspaces.pop(task_id, None)
                self._handles.pop(task_id, None)
                self._stop_flags.discard(task_id)
                self._workers.pop(task_id, None)
                self._live.pop(task_id, None)

    def _run_handler_task(self, task: TaskRecord) -> None:
        tid = task.task_id
        if not self._transition(tid, TaskState.PREPARING):
            return
        self._event(tid, "prepare-data:start" if task.kind is not TaskKind.DATASET_OP
                    else "dataset-op:start")
        if self._stop_requested(tid):
            self._transition(tid, TaskState.BROKEN, error="cancelled before start")
            return
        if not self._transition(tid, TaskState.RUNNING):
            return
        handler = self.handlers[task.kind]
        outputs = handler(task)
        self._event(tid, "prepare-data:done" if task.kind is not TaskKind.DATASET_OP
                    else "dataset-op:done")
        self._transition(tid, TaskState.DONE, outputs=outputs or {})

    def _run_executor_task(self, task: TaskRecord) -> None:
        tid = task.task_id
        spec = task.spec
        if not self._transition(tid, TaskState.PREPARING):
            return

        self._event(tid, "prepare-data:start")
        executor = spec.get("executor") or {}
        manifest = self.registry.get(executor.get("name"), executor.get("version"))
        params = manifest.resolve_params(spec.get("params") or {})
        snapshots = spec.get("snapshots") or {}
        candidates = snapshots.get("candidates")
        if task.kind in (TaskKind.MINE, TaskKind.INFER):
            if candidates is None or len(self.store.get_snapshot(candidates)) == 0:
                raise ValidationError("empty or missing candidate snapshot")
        ws = prepare_workspace(
            self.tasks_root / tid,
            task_id=tid,
            kind=task.kind.value,
            store=self.store,
            class_names=spec.get("class_names") or [],
            params=params,
            gpu_ids=[],
            train_snapshot=snapshots.get("train"),
            val_snapshot=snapshots.get("val"),
            candidate_snapshot=candidates,
            model_files=[Path(p) for p in spec.get("model_files") or []],
        )
        with self._lock:
            self._workspaces[tid] = ws
        self._event(tid, "prepare-data:done")

        if self._stop_requested(tid):
            self._transition(tid, TaskState.BROKEN, error="cancelled before GPU allocation")
            return

        self._event(tid, "allocate-gpu:start")
        n_gpus = int(spec.get("gpus", 1))
        grant = self.pool.acquire(tid, n_gpus)
        if grant is None:
            self._transition(tid, TaskState.BROKEN, error="cancelled while queued for GPUs")
            return
        with self._lock:
            live = self._live[tid]
            live.gpu_grant = grant
            self._save(live)
        self._event(tid, "allocate-gpu:done")
        self._rewrite_gpu_ids(ws, grant)

        if self._stop_requested(tid):
            self._transition(tid, TaskState.BROKEN, error="cancelled before launch")
            return
        if not self._transition(tid, TaskState.RUNNING):
            return
        self._event(tid, "run-executor:start")
        handle = runner_mod.launch(manifest, ws, grant)
        if handle.outcome is not None:  # spawn failed
            self._transition(tid, TaskState.FAILURE, error=handle.outcome.exit_detail)
            return
        with self._lock:
            self._handles[tid] = handle
        if self._stop_requested(tid):
            runner_mod.stop(handle, grace_seconds=self.stop_grace_seconds)
        handle.wait()
        outcome = runner_mod.finalize(handle)
        self._event(tid, "run-executor:done")

        outputs = self._collect_results(task, ws, outcome)
        self._event(tid, "collect-results:done")
        if outcome.status == "success":
            self._transition(tid, TaskState.DONE, outputs=outputs)
        elif outcome.status == "broken":
            self._transition(tid, TaskState.BROKEN, error=outcome.exit_detail, outputs=outputs)
        else:
            self._transition(tid, TaskState.FAILURE, error=outcome.exit_detail, outputs=outputs)

    def _rewrite_gpu_ids(self, ws: Workspace, gpu_ids: list[int]) -> None:
        cfg_path = ws.in_dir / "config.json"
        cfg = json.loads(cfg_path.read_text())
        cfg["gpu_ids"] = gpu_ids
        cfg_path.write_text(json.dumps(cfg, indent=2))

    def _collect_results(self, task: TaskRecord, ws: Workspace,
                         outcome: runner_mod.TaskOutcome) -> dict:
        outputs: dict = {"workspace": str(ws.root), "outcome": outcome.status}
        if outcome.archived_intermediates:
            outputs["archived_intermediates"] = str(outcome.archived_intermediates)
        if outcome.status != "success":
            return outputs
        if task.kind is TaskKind.TRAIN:
            result = json.loads((ws.out_dir / "result.json").read_text())
            outputs["accuracy"] = float(result["accuracy"])
            outputs["result"] = result
            outputs["model_dir"] = str(ws.out_dir / "models")
        elif task.kind is TaskKind.MINE:
            outputs["result_tsv"] = str(ws.out_dir / "result.tsv")
        elif task.kind is TaskKind.INFER:
            outputs["infer_dir"] = str(ws.out_dir / "infer")
        return outputs

    # -- control -------------------------------------------------------------

    def stop(self, task_id: str) -> TaskRecord:
        """Cancel a queued task or stop a running instance (outcome: broken)."""
        with self._lock:
            task = self._live.get(task_id)
            if task is None:
                record = self.table.get(task_id)
                return record  # already terminal
            self._stop_flags.add(task_id)
            handle = self._handles.get(task_id)
        self.pool.cancel(task_id)
        if handle is not None:
            runner_mod.stop(handle, grace_seconds=self.stop_grace_seconds)
        return self.get_task(task_id)

    def wait(self, task_id: str, timeout: float = 120.0) -> TaskRecord:
        """Block until the task reaches a terminal state."""
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            with self._lock:
                worker = self._workers.get(task_id)
            if worker is None:
                return self.table.get(task_id)
            worker.join(timeout=0.05)
        raise StateError(f"task {task_id} did not finish within {timeout}s")

    def active_monitors(self) -> list[tuple[TaskRecord, Workspace]]:
        """Running executor tasks and their workspaces, for the progress poller."""
        with self._lock:
            out = []
            for tid, ws in self._workspaces.items():
                task = self._live.get(tid)
                if task is not None and task.state is TaskState.RUNNING:
                    out.append((task, ws))
            return out

    def quiesce(self, timeout: float = 60.0) -> None:
        """Wait for all workers to finish (tests and clean shutdown)."""
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            with self._lock:
                workers = list(self._workers.values())
            if not workers:
                return
            workers[0].join(timeout=0.05)
        raise StateError("scheduler did not quiesce in time")

    def shutdown(self, drain: str = "broken") -> None:
        """Stop all live tasks and wait for workers to exit."""
        with self._lock:
            live_ids = list(self._workers.keys())
        for tid in live_ids:
            try:
                self.stop(tid)
            except IterforgeError:
                pass
        self.quiesce()
