"""Shared test utilities: toy payloads, snapshot builders, executor harness."""
from __future__ import annotations

import threading
import time
from contextlib import contextmanager

import numpy as np

from iterforge.assets import AnnotationObject, AssetStore
from iterforge.executors import finalize, launch, parse_manifest, prepare_workspace
from iterforge.refexec import package_path

CLASSES = ["neg", "pos"]


def vector_bytes(vec) -> bytes:
    return ",".join(f"{float(v):.6f}" for v in vec).encode()


def full_box(class_id: int) -> AnnotationObject:
    return AnnotationObject(class_id, 0.0, 0.0, 1.0, 1.0)


def put_vectors(store: AssetStore, vectors) -> list[str]:
    return [store.put_asset(vector_bytes(v), f"v{i}.vec") for i, v in enumerate(vectors)]


def labeled_snapshot(store, vectors, labels, classes=CLASSES, provenance="import"):
    ids = put_vectors(store, vectors)
    entries = {aid: [full_box(int(lbl))] for aid, lbl in zip(ids, labels)}
    sid = store.commit_snapshot([], entries, provenance, list(classes))
    return sid, ids


def unlabeled_snapshot(store, vectors, classes=CLASSES, provenance="import"):
    ids = put_vectors(store, vectors)
    sid = store.commit_snapshot([], {aid: [] for aid in ids}, provenance, list(classes))
    return sid, ids


def run_reference_executor(kind, ws, gpu_ids=()):
    handle = launch(parse_manifest(package_path(kind)), ws, list(gpu_ids))
    if handle.outcome is not None:
        return handle.outcome
    handle.wait(timeout=60)
    return finalize(handle)


def make_workspace(tmp_path, store, kind, task_id, classes=CLASSES, params=None,
                   train=None, val=None, candidates=None, model_files=None):
    return prepare_workspace(
        tmp_path / f"ws-{task_id}",
        task_id=task_id,
        kind=kind,
        store=store,
        class_names=list(classes),
        params=params or {},
        gpu_ids=[],
        train_snapshot=train,
        val_snapshot=val,
        candidate_snapshot=candidates,
        model_files=model_files,
    )


def oracle_centroids(vectors, labels) -> dict[int, np.ndarray]:
    """Independent nearest-centroid fit used to check executor outputs."""
    arr = np.asarray(vectors, dtype=float)
    labels = np.asarray(labels)
    return {int(c): arr[labels == c].mean(axis=0) for c in np.unique(labels)}


def oracle_predict(centroids: dict[int, np.ndarray], vec) -> int:
    dists = {c: float(np.linalg.norm(np.asarray(vec) - ctr)) for c, ctr in centroids.items()}
    return min(dists, key=lambda c: (dists[c], c))


@contextmanager
def run_server(app):
    """Serve an ASGI app on an ephemeral port for the duration of a test."""
    import uvicorn

    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("test server failed to start")
        time.sleep(0.01)
    port = server.servers[0].sockets[0].getsockname()[1]
    try:
        yield f"http://127.0.0.1:{port}"
    finally:
        server.should_exit = True
        thread.join(timeout=5)


def oracle_margin_scores(centroids, vectors, eps=1e-6):
    scores = []
    for vec in vectors:
        d = sorted(float(np.linalg.norm(np.asarray(vec) - ctr)) for ctr in centroids.values())
        margin = d[1] - d[0] if len(d) > 1 else d[0]
        scores.append(1.0 / (margin + eps))
    return scores
