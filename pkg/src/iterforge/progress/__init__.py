from .bus import Dispatcher, MonitorPoller, ProgressBus, PushHub, StatusStore
from .events import TERMINAL_STATE_CODES, ProgressEvent
from .queue import StreamQueue

__all__ = [
    "Dispatcher",
    "MonitorPoller",
    "ProgressBus",
    "ProgressEvent",
    "PushHub",
    "StatusStore",
    "StreamQueue",
    "TERMINAL_STATE_CODES",
]
