from .core import Scheduler
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

__all__ = [
    "AtomicSubtask",
    "GpuPool",
    "GPU_KINDS",
    "Scheduler",
    "TaskKind",
    "TaskRecord",
    "TaskState",
    "TaskTable",
    "TERMINAL_STATES",
    "decompose",
]
