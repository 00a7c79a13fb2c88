from .manifest import ExecutorManifest, ExecutorRegistry, ParamSpec, parse_manifest
from .runner import (
    STATE_DONE,
    STATE_ERROR,
    STATE_PENDING,
    STATE_RUNNING,
    InstanceHandle,
    MonitorReader,
    MonitorRecord,
    TaskOutcome,
    finalize,
    launch,
    stop,
)
from .workspace import Workspace, prepare_workspace

__all__ = [
    "ExecutorManifest",
    "ExecutorRegistry",
    "InstanceHandle",
    "MonitorReader",
    "MonitorRecord",
    "ParamSpec",
    "STATE_DONE",
    "STATE_ERROR",
    "STATE_PENDING",
    "STATE_RUNNING",
    "TaskOutcome",
    "Workspace",
    "finalize",
    "launch",
    "parse_manifest",
    "prepare_workspace",
    "stop",
]
