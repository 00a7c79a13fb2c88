"""Logical GPU pool: on-demand allocation, FIFO queueing, idempotent release."""
from __future__ import annotations

import threading
from collections import deque

from ..errors import ValidationError


class _Waiter:
    __slots__ = ("task_id", "n", "granted", "cancelled")

    def __init__(self, task_id: str, n: int):
        self.task_id = task_id
        self.n = n
        self.granted: list[int] | None = None
        self.cancelled = False


class GpuPool:
    """Fixed pool of logical GPU ids [0, capacity).

    Grants are atomic and lowest-id-first; unsatisfiable requests queue FIFO
    (the head blocks later requests, so equal demands never starve).
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValidationError("pool capacity must be >= 1")
        self.capacity = capacity
        self._free = set(range(capacity))
        self._allocations: dict[str, set[int]] = {}
        self._queue: deque[_Waiter] = deque()
        self._cond = threading.Condition()

    def _pump_locked(self) -> None:
        granted_any = False
        while self._queue and self._queue[0].n <= len(self._free):
            waiter = self._queue.popleft()
            ids = sorted(self._free)[: waiter.n]
            self._free.difference_update(ids)
            self._allocations[waiter.task_id] = set(ids)
            waiter.granted = ids
            granted_any = True
        if granted_any:
            self._cond.notify_all()

    def acquire(self, task_id: str, n: int, timeout: float | None = None) -> list[int] | None:
        """Block until `n` ids are granted; None if cancelled or timed out."""
        if n < 1:
            raise ValidationError("must request at least one GPU")
        if n > self.capacity:
            raise ValidationError(f"requested {n} GPUs but pool capacity is {self.capacity}")
        with self._cond:
            if task_id in self._allocations:
                raise ValidationError(f"task {task_id} already holds a grant")
            waiter = _Waiter(task_id, n)
            self._queue.append(waiter)
            self._pump_locked()
            ok = self._cond.wait_for(
                lambda: waiter.granted is not None or waiter.cancelled, timeout=timeout
            )
            if waiter.granted is not None:
                return sorted(waiter.granted)
            # timed out or cancelled: drop the request
            if waiter in self._queue:
                self._queue.remove(waiter)
                self._pump_locked()
            if not ok:
                return None
            return None

    def cancel(self, task_id: str) -> None:
        """Drop any queued request for this task (no-op if none)."""
        with self._cond:
            for waiter in self._queue:
                if waiter.task_id == task_id and waiter.granted is None:
                    waiter.cancelled = True
            self._cond.notify_all()

    def release(self, task_id: str) -> None:
        """Return the task's ids to the pool; idempotent."""
        with self._cond:
            ids = self._allocations.pop(task_id, None)
            if ids:
                self._free.update(ids)
                self._pump_locked()

    def allocation_of(self, task_id: str) -> set[int] | None:
        with self._cond:
            ids = self._allocations.get(task_id)
            return set(ids) if ids is not None else None

    def snapshot(self) -> tuple[dict[str, set[int]], set[int]]:
        """Consistent view of (allocations, free ids) for invariant checks."""
        with self._cond:
            return {t: set(ids) for t, ids in self._allocations.items()}, set(self._free)

    @property
    def free_count(self) -> int:
        with self._cond:
            return len(self._free)
