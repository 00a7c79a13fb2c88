"""Executor instance lifecycle: launch, monitor reads, stop, finalization."""
from __future__ import annotations

import json
import shutil
import subprocess
import sys
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .manifest import ExecutorManifest
from .workspace import Workspace

STATE_PENDING = 1
STATE_RUNNING = 2
STATE_DONE = 3
STATE_ERROR = 4


@dataclass
class MonitorRecord:
    task_id: str
    timestamp_ms: int
    progress: float
    state_code: int
    message: str = ""


@dataclass
class TaskOutcome:
    status: str  # success | failure | broken
    artifacts: list[Path] = field(default_factory=list)
    archived_intermediates: Path | None = None
    exit_detail: str = ""


class MonitorReader:
    """Reads `out/monitor.txt`, clamping progress so readers see it monotonic."""

    def __init__(self, workspace: Workspace):
        self.workspace = workspace
        self.parse_warnings = 0
        self._last = MonitorRecord(
            task_id=workspace.task_id,
            timestamp_ms=int(time.time() * 1000),
            progress=0.0,
            state_code=STATE_PENDING,
        )

    def read(self) -> MonitorRecord:
        path = self.workspace.monitor_path
        if not path.exists():
            return self._last
        try:
            text = path.read_text()
            lines = text.splitlines()
            task_id, ts, progress, state = lines[0].split("\t")
            record = MonitorRecord(
                task_id=task_id,
                timestamp_ms=int(ts),
                progress=float(progress),
                state_code=int(state),
                message="\n".join(lines[1:]),
            )
            if record.state_code not in (STATE_PENDING, STATE_RUNNING, STATE_DONE, STATE_ERROR):
                raise ValueError(f"bad state code {record.state_code}")
        except (OSError, ValueError, IndexError):
            self.parse_warnings += 1
            return self._last
        record.progress = max(0.0, min(1.0, record.progress))
        record.progress = max(record.progress, self._last.progress)
        if record.state_code == STATE_DONE:
            record.progress = 1.0
        self._last = record
        return record


def _resolve_entry(entry: list[str]) -> list[str]:
    # "python" in a manifest means the interpreter running the platform
    cmd = list(entry)
    if cmd[0] in ("python", "python3"):
        cmd[0] = sys.executable
    return cmd


class InstanceHandle:
    """One launched executor process plus its finalization state."""

    def __init__(self, manifest: ExecutorManifest, workspace: Workspace, proc: subprocess.Popen):
        self.manifest = manifest
        self.workspace = workspace
        self.proc = proc
        self.stop_requested = False
        self.outcome: TaskOutcome | None = None
        self._lock = threading.Lock()

    def poll(self) -> int | None:
        return self.proc.poll()

    def wait(self, timeout: float | None = None) -> int:
        return self.proc.wait(timeout=timeout)


def launch(manifest: ExecutorManifest, workspace: Workspace, gpu_ids: list[int]) -> InstanceHandle:
    """Start the executor process rooted in the workspace; stdout+stderr to out/log.txt."""
    cmd = _resolve_entry(manifest.entry)
    log_file = open(workspace.log_path, "ab")
    try:
        proc = subprocess.Popen(
            cmd,
            cwd=workspace.root,
            stdout=log_file,
            stderr=subprocess.STDOUT,
            stdin=subprocess.DEVNULL,
        )
    except OSError as exc:
        log_file.close()
        handle = InstanceHandle(manifest, workspace, proc=None)  # type: ignore[arg-type]
        handle.outcome = TaskOutcome(status="failure", exit_detail=f"spawn failed: {exc}")
        return handle
    handle = InstanceHandle(manifest, workspace, proc)
    handle._log_file = log_file  # closed at finalize
    return handle


def _declared_outputs(workspace: Workspace) -> tuple[bool, list[Path], str]:
    """Check kind-specific outputs exist and parse; returns (ok, artifacts, detail)."""
    out = workspace.out_dir
    artifacts: list[Path] = []
    if workspace.kind == "train":
        result = out / "result.json"
        models = out / "models"
        if not result.is_file():
            return False, [], "missing out/result.json"
        try:
            doc = json.loads(result.read_text())
            float(doc["accuracy"])
        except (ValueError, KeyError, TypeError) as exc:
            return False, [], f"bad result.json: {exc}"
        if not models.is_dir() or not any(models.iterdir()):
            return False, [], "missing out/models/"
        artifacts = [result, *sorted(models.iterdir())]
    elif workspace.kind == "mine":
        result = out / "result.tsv"
        if not result.is_file():
            return False, [], "missing out/result.tsv"
        prev = None
        for line in result.read_text().splitlines():
            aid, score = line.split("\t")
            score_f = float(score)
            if prev is not None and score_f > prev:
                return False, [], "result.tsv not sorted by descending score"
            prev = score_f
        artifacts = [result]
    elif workspace.kind == "infer":
        infer_dir = out / "infer"
        if not infer_dir.is_dir():
            return False, [], "missing out/infer/"
        artifacts = sorted(infer_dir.iterdir())
    return True, artifacts, ""


def _archive_out(workspace: Workspace) -> Path | None:
    """Preserve whatever the executor left in out/ next to the workspace."""
    if not any(workspace.out_dir.iterdir()):
        return None
    archive = workspace.root / "archived-out"
    if archive.exists():
        shutil.rmtree(archive)
    shutil.copytree(workspace.out_dir, archive)
    return archive


def finalize(handle: InstanceHandle) -> TaskOutcome:
    """Map the exit of an instance to a TaskOutcome; idempotent per handle."""
    with handle._lock:
        if handle.outcome is not None:
            return handle.outcome
        exit_code = handle.proc.wait()
        log_file = getattr(handle, "_log_file", None)
        if log_file is not None:
            log_file.close()
        if handle.stop_requested:
            archive = _archive_out(handle.workspace)
            handle.outcome = TaskOutcome(
                status="broken",
                archived_intermediates=archive,
                exit_detail=f"stopped by user (exit {exit_code})",
            )
        elif exit_code == 0:
            ok, artifacts, detail = _declared_outputs(handle.workspace)
            if ok:
                handle.outcome = TaskOutcome(
                    status="success", artifacts=artifacts, exit_detail="clean exit"
                )
            else:
                handle.outcome = TaskOutcome(
                    status="failure",
                    archived_intermediates=_archive_out(handle.workspace),
                    exit_detail=f"clean exit but outputs invalid: {detail}",
                )
        else:
            handle.outcome = TaskOutcome(
                status="failure",
                archived_intermediates=_archive_out(handle.workspace),
                exit_detail=f"exit code {exit_code}",
            )
        return handle.outcome


def stop(handle: InstanceHandle, grace_seconds: float = 10.0) -> TaskOutcome:
    """Graceful stop, then forced kill after the grace period."""
    if handle.outcome is not None:
        return handle.outcome
    if handle.proc.poll() is not None:
        # already exited naturally: outcome unchanged
        return finalize(handle)
    handle.stop_requested = True
    handle.proc.terminate()
    try:
        handle.proc.wait(timeout=grace_seconds)
    except subprocess.TimeoutExpired:
        handle.proc.kill()
        handle.proc.wait()
    return finalize(handle)
