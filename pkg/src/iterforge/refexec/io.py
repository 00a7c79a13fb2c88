"""Shared workspace I/O for the reference executors.

Everything here sticks to the stdlib so executor processes start fast.
Executors run with the workspace root as working directory: inputs under
`in/`, outputs under `out/`.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import time
from pathlib import Path

IN = Path("in")
OUT = Path("out")


def read_config() -> dict:
    return json.loads((IN / "config.json").read_text())


def read_index(name: str) -> list[tuple[str, str]]:
    """Index lines `asset_rel\tann_rel` (ann_rel empty when unlabeled)."""
    entries = []
    path = IN / name
    if not path.exists():
        return entries
    for line in path.read_text().splitlines():
        asset_rel, _, ann_rel = line.partition("\t")
        if asset_rel:
            entries.append((asset_rel, ann_rel))
    return entries


def asset_id_of(asset_rel: str) -> str:
    return asset_rel.rsplit("/", 1)[-1]


def parse_vector(asset_rel: str) -> list[float] | None:
    """Toy payload: comma-separated finite decimals; None if unparseable."""
    try:
        raw = (IN / asset_rel).read_bytes()
    except OSError:
        return None
    try:
        values = [float(v) for v in raw.decode().strip().split(",")]
    except (UnicodeDecodeError, ValueError):
        return None
    if not values or any(not math.isfinite(v) for v in values):
        return None
    return values


def read_first_label(ann_rel: str) -> int | None:
    """Class id of the first annotation line, or None when unlabeled."""
    if not ann_rel:
        return None
    try:
        first = (IN / ann_rel).read_text().splitlines()[0]
    except (OSError, IndexError):
        return None
    return int(first.split()[0])


class Monitor:
    """Atomic writer for out/monitor.txt (temp file + rename)."""

    def __init__(self, task_id: str):
        self.task_id = task_id
        self.path = OUT / "monitor.txt"

    def write(self, progress: float, state_code: int, message: str = "") -> None:
        body = f"{self.task_id}\t{int(time.time() * 1000)}\t{progress:.6f}\t{state_code}"
        if message:
            body += "\n" + message
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(body + "\n")
        os.replace(tmp, self.path)


def distance(a: list[float], b: list[float]) -> float:
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def write_model(centroids: dict[int, list[float]], n_classes: int, train_digest: str) -> None:
    """Model file: header, one centroid line per class, training-set digest."""
    models_dir = OUT / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    dim = len(next(iter(centroids.values()))) if centroids else 0
    lines = [f"classes {n_classes} dim {dim}"]
    for class_id in sorted(centroids):
        vec = ",".join(repr(v) for v in centroids[class_id])
        lines.append(f"{class_id} {vec}")
    lines.append(f"digest {train_digest}")
    (models_dir / "model.txt").write_text("\n".join(lines) + "\n")


def read_model(path: Path) -> tuple[dict[int, list[float]], int]:
    lines = path.read_text().splitlines()
    header = lines[0].split()
    n_classes = int(header[1])
    centroids: dict[int, list[float]] = {}
    for line in lines[1:]:
        if line.startswith("digest "):
            continue
        class_id, _, vec = line.partition(" ")
        centroids[int(class_id)] = [float(v) for v in vec.split(",")]
    return centroids, n_classes


def training_digest(ids: list[str]) -> str:
    return hashlib.sha256("\n".join(sorted(ids)).encode()).hexdigest()


def nearest(centroids: dict[int, list[float]], vec: list[float]) -> tuple[int, list[float]]:
    """Returns (predicted class, sorted distances ascending)."""
    dists = sorted((distance(vec, c), class_id) for class_id, c in centroids.items())
    return dists[0][1], [d for d, _ in dists]
