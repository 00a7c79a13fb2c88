"""Task records, state machine, and decomposition into atomic subtasks."""
from __future__ import annotations

import enum
import json
import time
import uuid
from dataclasses import dataclass, field

from ..db import Database
from ..errors import NotFoundError, StateError, ValidationError


class TaskKind(str, enum.Enum):
    IMPORT = "import"
    DATASET_OP = "dataset-op"
    LABEL = "label"
    TRAIN = "train"
    MINE = "mine"
    INFER = "infer"


class TaskState(str, enum.Enum):
    PENDING = "pending"
    PREPARING = "preparing"
    RUNNING = "running"
    DONE = "done"
    FAILURE = "failure"
    BROKEN = "broken"


TERMINAL_STATES = {TaskState.DONE, TaskState.FAILURE, TaskState.BROKEN}
GPU_KINDS = {TaskKind.TRAIN, TaskKind.MINE, TaskKind.INFER}

_ALLOWED = {
    TaskState.PENDING: {TaskState.PREPARING, TaskState.FAILURE, TaskState.BROKEN},
    TaskState.PREPARING: {TaskState.RUNNING, TaskState.FAILURE, TaskState.BROKEN},
    TaskState.RUNNING: {TaskState.DONE, TaskState.FAILURE, TaskState.BROKEN},
}


@dataclass(frozen=True)
class AtomicSubtask:
    subtask_id: str
    kind: str
    depends_on: tuple[str, ...] = ()


def decompose(kind: TaskKind) -> list[AtomicSubtask]:
    """Ordered atomic subtasks for a user-level task kind."""
    if kind in GPU_KINDS:
        return [
            AtomicSubtask("s1", "prepare-data"),
            AtomicSubtask("s2", "allocate-gpu"),
            AtomicSubtask("s3", "run-executor", ("s1", "s2")),
            AtomicSubtask("s4", "collect-results", ("s3",)),
            AtomicSubtask("s5", "release-gpu", ("s4",)),
        ]
    if kind is TaskKind.DATASET_OP:
        return [AtomicSubtask("s1", "dataset-op")]
    if kind in (TaskKind.IMPORT, TaskKind.LABEL):
        return [AtomicSubtask("s1", "prepare-data")]
    raise ValidationError(f"cannot decompose unknown task kind {kind!r}")


@dataclass
class TaskRecord:
    task_id: str
    user_id: str
    kind: TaskKind
    state: TaskState = TaskState.PENDING
    progress: float = 0.0
    created: float = field(default_factory=time.time)
    started: float | None = None
    finished: float | None = None
    gpu_grant: list[int] | None = None
    spec: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    error_message: str | None = None
    events: list = field(default_factory=list)  # (timestamp, subtask event)

    def to_doc(self) -> dict:
        doc = dict(vars(self))
        doc["kind"] = self.kind.value
        doc["state"] = self.state.value
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "TaskRecord":
        doc = dict(doc)
        doc["kind"] = TaskKind(doc["kind"])
        doc["state"] = TaskState(doc["state"])
        doc["events"] = [tuple(e) for e in doc.get("events", [])]
        return cls(**doc)


class TaskTable:
    """Persistent task records; all transitions validated and serialized."""

    def __init__(self, db: Database):
        self._db = db
        self._db.execute(
            "CREATE TABLE IF NOT EXISTS tasks (id TEXT PRIMARY KEY, state TEXT, doc TEXT)"
        )

    @staticmethod
    def new_id() -> str:
        return "t-" + uuid.uuid4().hex[:12]

    def insert(self, task: TaskRecord) -> None:
        self._db.execute(
            "INSERT INTO tasks (id, state, doc) VALUES (?,?,?)",
            (task.task_id, task.state.value, json.dumps(task.to_doc())),
        )

    def save(self, task: TaskRecord) -> None:
        self._db.execute(
            "UPDATE tasks SET state=?, doc=? WHERE id=?",
            (task.state.value, json.dumps(task.to_doc()), task.task_id),
        )

    def get(self, task_id: str) -> TaskRecord:
        row = self._db.query_one("SELECT doc FROM tasks WHERE id=?", (task_id,))
        if row is None:
            raise NotFoundError(f"no task {task_id}")
        return TaskRecord.from_doc(json.loads(row[0]))

    def exists(self, task_id: str) -> bool:
        return self._db.query_one("SELECT 1 FROM tasks WHERE id=?", (task_id,)) is not None

    def list(self, state: TaskState | None = None) -> list[TaskRecord]:
        if state is None:
            rows = self._db.query("SELECT doc FROM tasks ORDER BY rowid")
        else:
            rows = self._db.query(
                "SELECT doc FROM tasks WHERE state=? ORDER BY rowid", (state.value,)
            )
        return [TaskRecord.from_doc(json.loads(r[0])) for r in rows]

    def check_transition(self, current: TaskState, target: TaskState) -> None:
        if target not in _ALLOWED.get(current, set()):
            raise StateError(f"illegal task transition {current.value} -> {target.value}")
