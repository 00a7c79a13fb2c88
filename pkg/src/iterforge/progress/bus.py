"""Poller, dispatcher, status store, and push hub for task progress.

Pipeline: monitor files -> poller (change detection) -> stream queue ->
dispatcher (coalesce per user+task, persist, then push) -> status store
and per-user live channels.
"""
from __future__ import annotations

import json
import queue as queue_mod
import threading
import time
import uuid

from ..db import Database
from ..executors.runner import MonitorReader, STATE_ERROR
from .events import TERMINAL_STATE_CODES, ProgressEvent
from .queue import StreamQueue


class StatusStore:
    """Persisted latest status per task; monotonic and terminal-sticky."""

    def __init__(self, db: Database):
        self._db = db
        self._db.execute(
            "CREATE TABLE IF NOT EXISTS latest_status (task_id TEXT PRIMARY KEY, doc TEXT)"
        )

    def get(self, task_id: str) -> ProgressEvent | None:
        row = self._db.query_one(
            "SELECT doc FROM latest_status WHERE task_id=?", (task_id,)
        )
        return ProgressEvent.from_doc(json.loads(row[0])) if row else None

    def persist(self, event: ProgressEvent) -> ProgressEvent:
        """Store the event, clamped so readers never see progress regress."""
        previous = self.get(event.task_id)
        if previous is not None:
            progress = max(event.progress, previous.progress)
            state_code = event.state_code
            if previous.state_code in TERMINAL_STATE_CODES and state_code not in TERMINAL_STATE_CODES:
                state_code = previous.state_code
                progress = previous.progress
            if progress != event.progress or state_code != event.state_code:
                event = ProgressEvent(
                    user_id=event.user_id,
                    task_id=event.task_id,
                    progress=progress,
                    state_code=state_code,
                    state_message=event.state_message,
                    error_message=event.error_message,
                    timestamp_ms=event.timestamp_ms,
                )
        self._db.execute(
            "INSERT INTO latest_status (task_id, doc) VALUES (?,?) "
            "ON CONFLICT(task_id) DO UPDATE SET doc=excluded.doc",
            (event.task_id, json.dumps(event.to_doc())),
        )
        return event


class PushHub:
    """Per-user live channels; each subscriber gets its own frame queue."""

    def __init__(self):
        self._lock = threading.Lock()
        self._subscribers: dict[str, dict[str, queue_mod.Queue]] = {}

    def subscribe(self, user_id: str) -> tuple[str, queue_mod.Queue]:
        token = uuid.uuid4().hex
        channel: queue_mod.Queue = queue_mod.Queue()
        with self._lock:
            self._subscribers.setdefault(user_id, {})[token] = channel
        return token, channel

    def unsubscribe(self, user_id: str, token: str) -> None:
        with self._lock:
            self._subscribers.get(user_id, {}).pop(token, None)

    def push(self, event: ProgressEvent) -> None:
        with self._lock:
            channels = list(self._subscribers.get(event.user_id, {}).values())
        for channel in channels:
            channel.put(event.to_doc())


class MonitorPoller:
    """Reads running tasks' monitor files, emitting only changed progress."""

    def __init__(self, scheduler, stream: StreamQueue, interval_ms: int = 500):
        self.scheduler = scheduler
        self.stream = stream
        self.interval_ms = interval_ms
        self.warnings = 0
        self._readers: dict[str, MonitorReader] = {}
        self._high_water: dict[str, tuple] = {}
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def poll_once(self) -> list[ProgressEvent]:
        batch = []
        active = self.scheduler.active_monitors()
        live_ids = set()
        for task, workspace in active:
            live_ids.add(task.task_id)
            reader = self._readers.get(task.task_id)
            if reader is None:
                reader = self._readers[task.task_id] = MonitorReader(workspace)
            before = reader.parse_warnings
            record = reader.read()
            self.warnings += reader.parse_warnings - before
            mark = (record.progress, record.state_code, record.message)
            if self._high_water.get(task.task_id) == mark:
                continue
            self._high_water[task.task_id] = mark
            batch.append(
                ProgressEvent(
                    user_id=task.user_id,
                    task_id=task.task_id,
                    progress=record.progress,
                    state_code=record.state_code,
                    state_message=record.message,
                    error_message=record.message if record.state_code == STATE_ERROR else "",
                    timestamp_ms=record.timestamp_ms,
                )
            )
        for stale in set(self._readers) - live_ids:
            self._readers.pop(stale, None)
        if batch:
            self.stream.enqueue(batch)
        return batch

    def start(self) -> None:
        self._thread = threading.Thread(target=self._loop, daemon=True, name="monitor-poller")
        self._thread.start()

    def _loop(self) -> None:
        while not self._stop.wait(self.interval_ms / 1000.0):
            try:
                self.poll_once()
            except Exception:
                self.warnings += 1  # the poller never dies on a bad read

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)


class Dispatcher:
    """Single consumer: drain, coalesce per (user, task), persist, then push."""

    def __init__(
        self,
        stream: StreamQueue,
        status_store: StatusStore,
        hub: PushHub,
        interval_ms: int = 1000,
        persist_hook=None,
    ):
        self.stream = stream
        self.status_store = status_store
        self.hub = hub
        self.interval_ms = interval_ms
        self.persist_hook = persist_hook  # tests inject failures here
        self.delivered_total = 0
        self.failed_dispatches = 0
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def dispatch_batch(self) -> int:
        events, end_offset = self.stream.read_pending()
        if not events:
            return 0
        latest: dict[tuple[str, str], ProgressEvent] = {}
        for event in events:
            key = (event.user_id, event.task_id)
            current = latest.get(key)
            if current is None or event.timestamp_ms >= current.timestamp_ms:
                latest[key] = event
        try:
            persisted = []
            for event in latest.values():
                if self.persist_hook is not None:
                    self.persist_hook(event)
                persisted.append(self.status_store.persist(event))
            for event in persisted:
                self.hub.push(event)
        except Exception:
            # nothing acknowledged: the whole batch is redelivered next round
            self.failed_dispatches += 1
            return 0
        self.stream.ack(end_offset)
        self.delivered_total += len(persisted)
        return len(persisted)

    def start(self) -> None:
        self._thread = threading.Thread(target=self._loop, daemon=True, name="dispatcher")
        self._thread.start()

    def _loop(self) -> None:
        while not self._stop.wait(self.interval_ms / 1000.0):
            self.dispatch_batch()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)


class ProgressBus:
    """Wires queue, poller, dispatcher, status store, and push hub together."""

    def __init__(
        self,
        scheduler,
        db: Database,
        queue_root,
        poll_interval_ms: int = 500,
        dispatch_interval_ms: int = 1000,
        persist_hook=None,
    ):
        self.stream = StreamQueue(queue_root)
        self.status_store = StatusStore(db)
        self.hub = PushHub()
        self.poller = MonitorPoller(scheduler, self.stream, poll_interval_ms)
        self.dispatcher = Dispatcher(
            self.stream, self.status_store, self.hub, dispatch_interval_ms, persist_hook
        )

    def emit(self, event: ProgressEvent) -> None:
        """Direct injection for events not produced by monitor files."""
        self.stream.enqueue([event])

    def emit_task_state(self, user_id: str, task_id: str, progress: float,
                        state_code: int, message: str = "") -> None:
        self.emit(
            ProgressEvent(
                user_id=user_id,
                task_id=task_id,
                progress=progress,
                state_code=state_code,
                state_message=message,
                error_message=message if state_code == STATE_ERROR else "",
                timestamp_ms=int(time.time() * 1000),
            )
        )

    def flush(self) -> int:
        """One synchronous poll+dispatch round (tests and shutdown)."""
        self.poller.poll_once()
        return self.dispatch_batch_until_empty()

    def dispatch_batch_until_empty(self, max_rounds: int = 100) -> int:
        total = 0
        for _ in range(max_rounds):
            n = self.dispatcher.dispatch_batch()
            total += n
            if self.stream.pending_count() == 0:
                break
        return total

    def start(self) -> None:
        self.poller.start()
        self.dispatcher.start()

    def stop(self) -> None:
        self.poller.stop()
        self.dispatcher.stop()
