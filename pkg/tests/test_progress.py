import random
import threading
import time
from types import SimpleNamespace

import pytest

from iterforge.db import Database
from iterforge.errors import ValidationError
from iterforge.executors import Workspace
from iterforge.progress import (
    Dispatcher,
    MonitorPoller,
    ProgressBus,
    ProgressEvent,
    PushHub,
    StatusStore,
    StreamQueue,
)


def event(task="t1", user="u1", progress=0.5, state=2, ts=None, msg="", err=""):
    return ProgressEvent(
        user_id=user, task_id=task, progress=progress, state_code=state,
        state_message=msg, error_message=err,
        timestamp_ms=ts if ts is not None else int(time.time() * 1000),
    )


class TestStreamQueue:
    def test_enqueue_adds_three(self, tmp_path):
        q = StreamQueue(tmp_path)
        q.enqueue([event(ts=1), event(ts=2), event(ts=3)])
        assert q.pending_count() == 3
        events, _ = q.read_pending()
        assert [e.timestamp_ms for e in events] == [1, 2, 3]

    def test_empty_enqueue_noop(self, tmp_path):
        q = StreamQueue(tmp_path)
        q.enqueue([])
        assert q.pending_count() == 0

    def test_durable_across_reopen(self, tmp_path):
        StreamQueue(tmp_path).enqueue([event(ts=7)])
        q2 = StreamQueue(tmp_path)
        events, _ = q2.read_pending()
        assert [e.timestamp_ms for e in events] == [7]

    def test_ack_consumes_and_survives_reopen(self, tmp_path):
        q = StreamQueue(tmp_path)
        q.enqueue([event(ts=1), event(ts=2)])
        _, offset = q.read_pending()
        q.ack(offset)
        assert q.pending_count() == 0
        assert StreamQueue(tmp_path).pending_count() == 0

    def test_unacked_redelivered_after_reopen(self, tmp_path):
        q = StreamQueue(tmp_path)
        q.enqueue([event(ts=1), event(ts=2)])
        events, _ = q.read_pending()  # read without ack
        assert len(events) == 2
        q2 = StreamQueue(tmp_path)
        redelivered, _ = q2.read_pending()
        assert [e.timestamp_ms for e in redelivered] == [1, 2]

    def test_partial_ack(self, tmp_path):
        q = StreamQueue(tmp_path)
        q.enqueue([event(ts=1)])
        _, first_offset = q.read_pending()
        q.enqueue([event(ts=2)])
        q.ack(first_offset)
        events, _ = q.read_pending()
        assert [e.timestamp_ms for e in events] == [2]

    def test_backpressure_blocks_until_ack(self, tmp_path):
        q = StreamQueue(tmp_path, max_pending=2)
        q.enqueue([event(ts=1), event(ts=2)])
        done = threading.Event()

        def producer():
            q.enqueue([event(ts=3)])
            done.set()

        t = threading.Thread(target=producer)
        t.start()
        time.sleep(0.1)
        assert not done.is_set()
        _, offset = q.read_pending()
        q.ack(offset)
        assert done.wait(timeout=2)
        t.join()

    def test_full_queue_timeout(self, tmp_path):
        q = StreamQueue(tmp_path, max_pending=1)
        q.enqueue([event(ts=1)])
        with pytest.raises(ValidationError):
            q.enqueue([event(ts=2)], timeout=0.05)


class TestStatusStore:
    def test_monotonic_progress(self, tmp_path):
        store = StatusStore(Database(tmp_path / "s.db"))
        store.persist(event(progress=0.5, ts=1))
        stored = store.persist(event(progress=0.3, ts=2))
        assert stored.progress == 0.5
        assert store.get("t1").progress == 0.5

    def test_terminal_state_sticky(self, tmp_path):
        store = StatusStore(Database(tmp_path / "s.db"))
        store.persist(event(progress=1.0, state=3, ts=1))
        store.persist(event(progress=0.4, state=2, ts=2))
        latest = store.get("t1")
        assert latest.state_code == 3
        assert latest.progress == 1.0

    def test_survives_restart(self, tmp_path):
        db_path = tmp_path / "s.db"
        db = Database(db_path)
        StatusStore(db).persist(event(progress=0.7, ts=5))
        db.close()
        again = StatusStore(Database(db_path))
        assert again.get("t1").progress == 0.7

    def test_unknown_task_none(self, tmp_path):
        assert StatusStore(Database(tmp_path / "s.db")).get("ghost") is None


class TestPushHub:
    def test_subscriber_receives_own_user_only(self):
        hub = PushHub()
        _, chan1 = hub.subscribe("u1")
        _, chan2 = hub.subscribe("u2")
        hub.push(event(user="u1", ts=9))
        assert chan1.get(timeout=1)["timestamp_ms"] == 9
        assert chan2.empty()

    def test_unsubscribe_stops_delivery(self):
        hub = PushHub()
        token, chan = hub.subscribe("u1")
        hub.unsubscribe("u1", token)
        hub.push(event(user="u1"))
        assert chan.empty()


class FakeScheduler:
    def __init__(self):
        self.active = []

    def active_monitors(self):
        return list(self.active)


def make_monitored_task(tmp_path, task_id="t1", user_id="u1"):
    ws = Workspace(root=tmp_path / f"ws-{task_id}", kind="train", task_id=task_id)
    ws.out_dir.mkdir(parents=True)
    task = SimpleNamespace(task_id=task_id, user_id=user_id)
    return task, ws


def write_monitor(ws, progress, state, ts=None, message=""):
    body = f"{ws.task_id}\t{ts or int(time.time() * 1000)}\t{progress:.6f}\t{state}"
    if message:
        body += "\n" + message
    ws.monitor_path.write_text(body + "\n")


class TestMonitorPoller:
    def test_emits_only_changes(self, tmp_path):
        sched = FakeScheduler()
        task, ws = make_monitored_task(tmp_path)
        sched.active.append((task, ws))
        poller = MonitorPoller(sched, StreamQueue(tmp_path / "q"))
        write_monitor(ws, 0.2, 2, ts=100)
        assert len(poller.poll_once()) == 1
        write_monitor(ws, 0.2, 2, ts=200)  # progress unchanged
        assert poller.poll_once() == []
        write_monitor(ws, 0.5, 2, ts=300)
        (evt,) = poller.poll_once()
        assert evt.progress == pytest.approx(0.5)

    def test_error_state_carries_message(self, tmp_path):
        sched = FakeScheduler()
        task, ws = make_monitored_task(tmp_path)
        sched.active.append((task, ws))
        poller = MonitorPoller(sched, StreamQueue(tmp_path / "q"))
        write_monitor(ws, 0.1, 4, message="ran out of labels")
        (evt,) = poller.poll_once()
        assert evt.state_code == 4
        assert evt.error_message == "ran out of labels"

    def test_malformed_monitor_counts_warning(self, tmp_path):
        sched = FakeScheduler()
        task, ws = make_monitored_task(tmp_path)
        sched.active.append((task, ws))
        poller = MonitorPoller(sched, StreamQueue(tmp_path / "q"))
        ws.monitor_path.write_text("complete garbage\n")
        poller.poll_once()
        assert poller.warnings == 1


@pytest.fixture
def pipeline(tmp_path):
    db = Database(tmp_path / "p.db")
    stream = StreamQueue(tmp_path / "q")
    store = StatusStore(db)
    hub = PushHub()
    return SimpleNamespace(db=db, stream=stream, store=store, hub=hub, tmp=tmp_path)


class TestDispatcher:
    def test_coalesces_to_latest_per_task(self, pipeline):
        _, chan = pipeline.hub.subscribe("u1")
        pipeline.stream.enqueue(
            [
                event(task="t1", progress=0.1, ts=1),
                event(task="t1", progress=0.3, ts=2),
                event(task="t2", progress=0.9, ts=3),
            ]
        )
        d = Dispatcher(pipeline.stream, pipeline.store, pipeline.hub)
        assert d.dispatch_batch() == 2
        frames = [chan.get(timeout=1), chan.get(timeout=1)]
        by_task = {f["task_id"]: f for f in frames}
        assert by_task["t1"]["progress"] == pytest.approx(0.3)
        assert by_task["t2"]["progress"] == pytest.approx(0.9)
        assert chan.empty()  # never two frames for the same task in one round
        assert pipeline.stream.pending_count() == 0

    def test_empty_queue_delivers_zero(self, pipeline):
        d = Dispatcher(pipeline.stream, pipeline.store, pipeline.hub)
        assert d.dispatch_batch() == 0

    def test_persist_failure_redelivers(self, pipeline):
        _, chan = pipeline.hub.subscribe("u1")
        pipeline.stream.enqueue(
            [event(task="t1", progress=0.3, ts=1), event(task="t2", progress=0.9, ts=2)]
        )
        fail = {"on": True}

        def hook(evt):
            if fail["on"]:
                raise OSError("db unavailable")

        d = Dispatcher(pipeline.stream, pipeline.store, pipeline.hub, persist_hook=hook)
        assert d.dispatch_batch() == 0
        assert pipeline.store.get("t1") is None
        assert pipeline.stream.pending_count() == 2  # nothing deleted
        fail["on"] = False
        assert d.dispatch_batch() == 2
        delivered = {chan.get(timeout=1)["task_id"], chan.get(timeout=1)["task_id"]}
        assert delivered == {"t1", "t2"}

    def test_latest_status_after_two_dispatches(self, pipeline):
        d = Dispatcher(pipeline.stream, pipeline.store, pipeline.hub)
        pipeline.stream.enqueue([event(progress=0.3, ts=1)])
        d.dispatch_batch()
        pipeline.stream.enqueue([event(progress=0.7, ts=2)])
        d.dispatch_batch()
        assert pipeline.store.get("t1").progress == pytest.approx(0.7)

    def test_at_least_once_under_random_failures(self, pipeline):
        rng = random.Random(17)

        def flaky(evt):
            if rng.random() < 0.3:
                raise OSError("injected persist failure")

        d = Dispatcher(pipeline.stream, pipeline.store, pipeline.hub, persist_hook=flaky)
        finals = {}
        for i in range(20):
            tid = f"t{i}"
            pipeline.stream.enqueue(
                [event(task=tid, progress=0.5, state=2, ts=1)]
            )
            final_state = 3 if i % 2 == 0 else 4
            pipeline.stream.enqueue(
                [event(task=tid, progress=1.0, state=final_state, ts=2)]
            )
            finals[tid] = final_state
            d.dispatch_batch()
        for _ in range(200):
            if pipeline.stream.pending_count() == 0:
                break
            d.dispatch_batch()
        assert pipeline.stream.pending_count() == 0
        for tid, state in finals.items():
            stored = pipeline.store.get(tid)
            assert stored is not None and stored.state_code == state
        assert d.failed_dispatches > 0  # the fault injection actually fired


class TestProgressBus:
    def test_end_to_end_latency(self, tmp_path):
        sched = FakeScheduler()
        task, ws = make_monitored_task(tmp_path)
        sched.active.append((task, ws))
        bus = ProgressBus(
            sched, Database(tmp_path / "b.db"), tmp_path / "q",
            poll_interval_ms=100, dispatch_interval_ms=100,
        )
        bus.start()
        try:
            write_monitor(ws, 0.4, 2)
            started = time.monotonic()
            deadline = started + 0.1 + 0.1 + 0.2 + 0.3  # intervals + 200ms + margin
            while time.monotonic() < deadline:
                latest = bus.status_store.get("t1")
                if latest is not None and latest.progress == pytest.approx(0.4):
                    break
                time.sleep(0.01)
            else:
                pytest.fail("monitor change not visible in latest_status in time")
        finally:
            bus.stop()

    def test_emit_task_state_reaches_subscriber(self, tmp_path):
        bus = ProgressBus(FakeScheduler(), Database(tmp_path / "b.db"), tmp_path / "q")
        _, chan = bus.hub.subscribe("u9")
        bus.emit_task_state("u9", "t9", 1.0, 3)
        bus.flush()
        frame = chan.get(timeout=1)
        assert frame["task_id"] == "t9"
        assert frame["state_code"] == 3
        assert bus.status_store.get("t9").progress == 1.0
