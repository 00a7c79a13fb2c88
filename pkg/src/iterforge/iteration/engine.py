"""The iterative development loop: mine -> label -> update-data -> train ->
evaluate, repeated until accuracy exceeds the target, candidates run out, or
the user interrupts.

Round 0 trains on the initial data instead of mining. The loop continues
while accuracy <= target (it must strictly exceed the target to stop).
"""
from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from ..assets.store import AssetStore
from ..datasets.ops import MergeStrategy, exclude, merge
from ..db import Database
from ..errors import NotFoundError, StateError, ValidationError

STAGES = ("mine", "label", "update-data", "train", "evaluate", "finished")


@dataclass
class IterationState:
    project_id: str
    name: str
    class_names: list[str]
    data_superset: str
    training_data: str | None
    validation_data: str
    target_accuracy: float
    mining_batch_size: int
    auto_advance: bool = False
    round_index: int = 0
    stage: str = "train"
    mined_batch: str | None = None
    current_model: str | None = None
    current_accuracy: float = 0.0
    pending_accuracy: float | None = None
    output_model: str | None = None
    finish_reason: str | None = None
    warning: str | None = None
    stage_failed: bool = False
    stage_error: str | None = None
    pending_task_id: str | None = None
    pending_label_task_id: str | None = None
    user_id: str = "u1"
    executors: dict = field(default_factory=dict)
    mine_params: dict = field(default_factory=dict)
    history: list = field(default_factory=list)

    def to_doc(self) -> dict:
        return dict(vars(self))

    @classmethod
    def from_doc(cls, doc: dict) -> "IterationState":
        doc = dict(doc)
        doc["history"] = [tuple(h) if isinstance(h, list) else h for h in doc.get("history", [])]
        return cls(**doc)


class IterationEngine:
    def __init__(
        self,
        db: Database,
        store: AssetStore,
        scheduler,
        gateway,
        audit_root: str | Path,
        train_executor: str = "toy-centroid-train",
        mine_executor: str = "toy-margin-mine",
        progress_hook=None,
    ):
        self._db = db
        self.store = store
        self.scheduler = scheduler
        self.gateway = gateway
        self.audit_root = Path(audit_root)
        self.audit_root.mkdir(parents=True, exist_ok=True)
        self.train_executor = train_executor
        self.mine_executor = mine_executor
        self.progress_hook = progress_hook
        self._db.execute(
            "CREATE TABLE IF NOT EXISTS projects (id TEXT PRIMARY KEY, doc TEXT)"
        )
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    # -- persistence -----------------------------------------------------

    def _save(self, state: IterationState) -> None:
        self._db.execute(
            "INSERT INTO projects (id, doc) VALUES (?,?) "
            "ON CONFLICT(id) DO UPDATE SET doc=excluded.doc",
            (state.project_id, json.dumps(state.to_doc())),
        )

    def get(self, project_id: str) -> IterationState:
        row = self._db.query_one("SELECT doc FROM projects WHERE id=?", (project_id,))
        if row is None:
            raise NotFoundError(f"no project {project_id}")
        return IterationState.from_doc(json.loads(row[0]))

    def list(self) -> list[IterationState]:
        rows = self._db.query("SELECT doc FROM projects ORDER BY rowid")
        return [IterationState.from_doc(json.loads(r[0])) for r in rows]

    def _lock(self, project_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(project_id, threading.Lock())

    def _audit(self, state: IterationState, event: str, **detail) -> None:
        record = {
            "timestamp": time.time(),
            "project_id": state.project_id,
            "round": state.round_index,
            "stage": state.stage,
            "event": event,
            **detail,
        }
        path = self.audit_root / f"{state.project_id}.log"
        with open(path, "a") as f:
            f.write(json.dumps(record) + "\n")

    # -- project lifecycle -------------------------------------------------

    def create_project(
        self,
        name: str,
        class_names: list[str],
        data_superset: str,
        initial_data: str | None,
        target_accuracy: float,
        mining_batch_size: int,
        auto_advance: bool = False,
        initial_model: str | None = None,
        validation_data: str | None = None,
        user_id: str = "u1",
        mine_params: dict | None = None,
    ) -> str:
        if not (0.0 < target_accuracy <= 1.0):
            raise ValidationError("target accuracy must be in (0, 1]")
        if mining_batch_size < 1:
            raise ValidationError("mining batch size must be >= 1")
        superset = self.store.get_snapshot(data_superset)
        if len(superset) == 0:
            raise ValidationError("data superset must not be empty")
        if validation_data is None:
            raise ValidationError("a validation snapshot is required")
        self.store.get_snapshot(validation_data)

        if initial_data is not None:
            initial = self.store.get_snapshot(initial_data)
            if not initial.asset_ids() <= superset.asset_ids():
                raise ValidationError("initial data must be a subset of the superset")
            fully_labeled = len(initial) > 0 and all(
                anns for anns in initial.entries.values()
            )
            stage = "train" if fully_labeled else "label"
        else:
            if initial_model is None:
                raise ValidationError(
                    "a project needs initial data or an initial model to mine with"
                )
            stage = "mine"

        state = IterationState(
            project_id="p-" + uuid.uuid4().hex[:12],
            name=name,
            class_names=list(class_names),
            data_superset=data_superset,
            training_data=initial_data,
            validation_data=validation_data,
            target_accuracy=target_accuracy,
            mining_batch_size=mining_batch_size,
            auto_advance=auto_advance,
            stage=stage,
            current_model=initial_model,
            user_id=user_id,
            mine_params=mine_params or {},
        )
        self._save(state)
        self._audit(state, "created", superset=data_superset, initial=initial_data)
        return state.project_id

    # -- stage machinery -----------------------------------------------------

    def next_action(self, project_id: str) -> dict:
        state = self.get(project_id)
        if state.stage == "finished":
            return {"stage": "finished", "reason": state.finish_reason}
        if state.pending_task_id or state.pending_label_task_id:
            return {
                "stage": state.stage,
                "in_progress": True,
                "task_id": state.pending_task_id or state.pending_label_task_id,
            }
        action = {"stage": state.stage, "in_progress": False, "round": state.round_index}
        if state.stage_failed:
            action["failed"] = True
            action["error"] = state.stage_error
        if state.stage == "mine":
            action["description"] = (
                f"mine {state.mining_batch_size} assets from the superset "
                f"minus current training data using the round-{state.round_index} model"
            )
        elif state.stage == "label":
            target = state.mined_batch or state.training_data
            action["description"] = f"label snapshot {target}"
        elif state.stage == "update-data":
            action["description"] = "merge the labeled batch into the training data"
        elif state.stage == "train":
            action["description"] = (
                f"train on {state.training_data}, validate on {state.validation_data}"
            )
        elif state.stage == "evaluate":
            action["description"] = "record accuracy and decide whether to continue"
        return action

    def advance(self, project_id: str) -> IterationState:
        """Run the current stage to completion; chains stages when auto-advance."""
        with self._lock(project_id):
            state = self.get(project_id)
            if state.stage == "finished":
                raise StateError(f"project {project_id} is finished")
            state = self._run_stage(state)
            while (
                state.auto_advance
                and state.stage != "finished"
                and not state.stage_failed
            ):
                state = self._run_stage(state)
            return state

    def _run_stage(self, state: IterationState) -> IterationState:
        state.stage_failed = False
        state.stage_error = None
        runner = {
            "mine": self._stage_mine,
            "label": self._stage_label,
            "update-data": self._stage_update_data,
            "train": self._stage_train,
            "evaluate": self._stage_evaluate,
        }[state.stage]
        try:
            runner(state)
        finally:
            state.pending_task_id = None
            state.pending_label_task_id = None
            self._save(state)
        return state

    def _fail_stage(self, state: IterationState, message: str) -> None:
        state.stage_failed = True
        state.stage_error = message
        self._audit(state, "stage-failed", error=message)

    def _finish(self, state: IterationState, reason: str) -> None:
        state.output_model = state.current_model
        if state.current_model is None:
            state.warning = "finished without a trained model"
        state.stage = "finished"
        state.finish_reason = reason
        self._audit(state, "finished", reason=reason, output_model=state.output_model)

    def _submit_and_wait(self, state: IterationState, spec: dict):
        task_id = self.scheduler.submit(spec)
        state.pending_task_id = task_id
        self._save(state)
        task = self.scheduler.wait(task_id, timeout=300)
        return task

    def _stage_mine(self, state: IterationState) -> None:
        if state.training_data is None:
            candidates = state.data_superset
        else:
            candidates = exclude(self.store, state.data_superset, state.training_data)
        if len(self.store.get_snapshot(candidates)) == 0:
            self._finish(state, "exhausted")
            return
        task = self._submit_and_wait(
            state,
            {
                "kind": "mine",
                "user_id": state.user_id,
                "executor": {"name": self.mine_executor},
                "snapshots": {"candidates": candidates},
                "class_names": state.class_names,
                "params": dict(state.mine_params),
                "model_files": [state.current_model] if state.current_model else [],
            },
        )
        if task.state.value != "done":
            self._fail_stage(state, task.error_message or f"mine task {task.state.value}")
            return
        ranked = []
        for line in Path(task.outputs["result_tsv"]).read_text().splitlines():
            aid, _ = line.split("\t")
            ranked.append(aid)
        batch = ranked[: state.mining_batch_size]
        mined = self.store.commit_snapshot(
            [state.data_superset],
            {aid: [] for aid in batch},
            f"mine:{task.task_id}",
            state.class_names,
        )
        state.mined_batch = mined
        state.stage = "label"
        self._audit(state, "mined", task_id=task.task_id, snapshot=mined, size=len(batch))

    def _stage_label(self, state: IterationState) -> None:
        target = state.mined_batch or state.training_data
        label_task = self.gateway.create_label_task(target, state.class_names)
        state.pending_label_task_id = label_task.label_task_id
        self._save(state)
        if label_task.state == "failed":
            self._fail_stage(state, label_task.last_error)
            return
        deadline = time.monotonic() + 300
        while label_task.state not in ("completed", "failed"):
            if time.monotonic() > deadline:
                self._fail_stage(state, "labeling timed out")
                return
            label_task = self.gateway.poll_progress(label_task.label_task_id)
            if self.progress_hook is not None:
                self.progress_hook(state.user_id, label_task)
            if label_task.state not in ("completed", "failed"):
                time.sleep(0.01)
        if label_task.state == "failed":
            self._fail_stage(state, label_task.last_error or "labeling failed")
            return
        labeled = self.gateway.collect_results(label_task.label_task_id)
        if state.mined_batch is not None:
            state.mined_batch = labeled
            state.stage = "update-data"
        else:
            state.training_data = labeled
            state.stage = "train"
        self._audit(
            state, "labeled", label_task_id=label_task.label_task_id, snapshot=labeled
        )

    def _stage_update_data(self, state: IterationState) -> None:
        if state.training_data is None:
            merged = state.mined_batch
        else:
            merged = merge(
                self.store, state.training_data, state.mined_batch,
                MergeStrategy.PREFER_RIGHT,
            )
        state.training_data = merged
        state.mined_batch = None
        state.stage = "train"
        self._audit(state, "updated-data", snapshot=merged,
                    size=len(self.store.get_snapshot(merged)))

    def _stage_train(self, state: IterationState) -> None:
        task = self._submit_and_wait(
            state,
            {
                "kind": "train",
                "user_id": state.user_id,
                "executor": {"name": self.train_executor},
                "snapshots": {
                    "train": state.training_data,
                    "val": state.validation_data,
                },
                "class_names": state.class_names,
                "model_files": [state.current_model] if state.current_model else [],
            },
        )
        if task.state.value != "done":
            self._fail_stage(state, task.error_message or f"train task {task.state.value}")
            return
        model_dir = Path(task.outputs["model_dir"])
        model_file = next(iter(sorted(model_dir.iterdir())))
        state.current_model = str(model_file)
        state.pending_accuracy = float(task.outputs["accuracy"])
        state.stage = "evaluate"
        self._audit(state, "trained", task_id=task.task_id, model=state.current_model)

    def _stage_evaluate(self, state: IterationState) -> None:
        if state.pending_accuracy is None:
            raise StateError("evaluate requires a completed training round")
        state.current_accuracy = state.pending_accuracy
        state.pending_accuracy = None
        training_assets = sorted(
            self.store.get_snapshot(state.training_data).asset_ids()
        )
        state.history.append(
            (state.round_index, state.current_accuracy, len(training_assets))
        )
        self._audit(
            state, "evaluated", accuracy=state.current_accuracy,
            training_data=state.training_data, training_size=len(training_assets),
        )
        if state.current_accuracy > state.target_accuracy:
            self._finish(state, "target-reached")
        else:
            state.round_index += 1
            state.stage = "mine"

    def interrupt(self, project_id: str) -> IterationState:
        state = self.get(project_id)
        if state.stage == "finished":
            raise StateError(f"project {project_id} already finished")
        pending = state.pending_task_id
        if pending is not None:
            try:
                self.scheduler.stop(pending)
            except NotFoundError:
                pass
        with self._lock(project_id):
            state = self.get(project_id)
            if state.stage != "finished":
                self._finish(state, "interrupted")
                self._save(state)
        return self.get(project_id)

    def audit_records(self, project_id: str) -> list[dict]:
        path = self.audit_root / f"{project_id}.log"
        if not path.exists():
            return []
        return [json.loads(line) for line in path.read_text().splitlines()]
