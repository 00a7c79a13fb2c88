"""Durable single-consumer stream queue backed by a JSON-lines log file.

Entries are appended to `queue.log`; the consumer's position is the byte
offset stored in `queue.ack`. An entry counts as deleted only once the ack
offset moves past it, so anything not yet acknowledged is redelivered after
a crash or a failed dispatch (at-least-once).
"""
from __future__ import annotations

import json
import os
import threading
from pathlib import Path

from ..errors import ValidationError
from .events import ProgressEvent


class StreamQueue:
    def __init__(self, root: str | Path, max_pending: int = 10_000):
        if max_pending < 1:
            raise ValidationError("queue bound must be >= 1")
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.log_path = self.root / "queue.log"
        self.ack_path = self.root / "queue.ack"
        self.max_pending = max_pending
        self._cond = threading.Condition()
        self.log_path.touch()
        self._ack_offset = self._read_ack()
        self._pending = sum(1 for _ in self._iter_pending())

    def _read_ack(self) -> int:
        try:
            return int(self.ack_path.read_text().strip() or 0)
        except (OSError, ValueError):
            return 0

    def _write_ack(self, offset: int) -> None:
        tmp = self.ack_path.with_suffix(".tmp")
        tmp.write_text(str(offset))
        os.replace(tmp, self.ack_path)

    def _iter_pending(self):
        with open(self.log_path, "rb") as f:
            f.seek(self._ack_offset)
            for line in f:
                if line.strip():
                    yield json.loads(line)

    def enqueue(self, batch: list[ProgressEvent], timeout: float | None = None) -> None:
        """Append events in order; blocks while the queue is at its bound."""
        if not batch:
            return
        with self._cond:
            ok = self._cond.wait_for(
                lambda: self._pending + len(batch) <= self.max_pending, timeout=timeout
            )
            if not ok:
                raise ValidationError("stream queue full")
            with open(self.log_path, "a") as f:
                for event in batch:
                    f.write(json.dumps(event.to_doc()) + "\n")
                f.flush()
                os.fsync(f.fileno())
            self._pending += len(batch)
            self._cond.notify_all()

    def read_pending(self) -> tuple[list[ProgressEvent], int]:
        """All unacknowledged events plus the offset that would consume them."""
        with self._cond:
            events = [ProgressEvent.from_doc(doc) for doc in self._iter_pending()]
            end_offset = self.log_path.stat().st_size
            return events, end_offset

    def ack(self, offset: int) -> None:
        """Mark everything before `offset` consumed; compacts when drained."""
        with self._cond:
            consumed = sum(1 for _ in self._iter_pending_until(offset))
            self._ack_offset = offset
            self._write_ack(offset)
            self._pending = max(0, self._pending - consumed)
            if self._pending == 0 and offset >= self.log_path.stat().st_size:
                open(self.log_path, "w").close()
                self._ack_offset = 0
                self._write_ack(0)
            self._cond.notify_all()

    def _iter_pending_until(self, offset: int):
        with open(self.log_path, "rb") as f:
            f.seek(self._ack_offset)
            while f.tell() < offset:
                line = f.readline()
                if not line:
                    break
                if line.strip():
                    yield line

    def pending_count(self) -> int:
        with self._cond:
            return self._pending
