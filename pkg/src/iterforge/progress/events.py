"""Progress events: the flat documents flowing from monitor files to clients."""
from __future__ import annotations

from dataclasses import dataclass

TERMINAL_STATE_CODES = (3, 4)


@dataclass(frozen=True)
class ProgressEvent:
    user_id: str
    task_id: str
    progress: float
    state_code: int
    state_message: str = ""
    error_message: str = ""
    timestamp_ms: int = 0

    def to_doc(self) -> dict:
        return {
            "task_id": self.task_id,
            "user_id": self.user_id,
            "progress": self.progress,
            "state_code": self.state_code,
            "state_message": self.state_message,
            "error_message": self.error_message,
            "timestamp_ms": self.timestamp_ms,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ProgressEvent":
        return cls(
            user_id=doc["user_id"],
            task_id=doc["task_id"],
            progress=float(doc["progress"]),
            state_code=int(doc["state_code"]),
            state_message=doc.get("state_message", ""),
            error_message=doc.get("error_message", ""),
            timestamp_ms=int(doc["timestamp_ms"]),
        )
