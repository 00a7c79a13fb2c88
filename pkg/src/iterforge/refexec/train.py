"""Reference train executor: per-class centroids, validation accuracy.

Deterministic: training inputs are sorted by asset id before averaging.
"""
from __future__ import annotations

import json
import sys

from .io import (
    IN,
    OUT,
    Monitor,
    asset_id_of,
    nearest,
    parse_vector,
    read_config,
    read_first_label,
    read_index,
    read_model,
    training_digest,
    write_model,
)


def main() -> int:
    cfg = read_config()
    monitor = Monitor(cfg["task_id"])
    monitor.write(0.0, 2)
    n_classes = len(cfg["class_names"])

    train_entries = sorted(read_index("train-index.tsv"), key=lambda e: asset_id_of(e[0]))
    val_entries = read_index("val-index.tsv")

    pretrained = IN / "models" / "model.txt"
    centroids: dict[int, list[float]] = {}
    if pretrained.exists():
        # initializes the centroids; fully replaced by data centroids below
        centroids, _ = read_model(pretrained)
        print(f"loaded pre-trained model with {len(centroids)} centroids")

    labeled = []
    for asset_rel, ann_rel in train_entries:
        label = read_first_label(ann_rel)
        if label is None:
            continue
        vec = parse_vector(asset_rel)
        if vec is None:
            print(f"warning: unparseable payload {asset_rel}")
            continue
        labeled.append((asset_id_of(asset_rel), label, vec))
    if not labeled:
        monitor.write(0.0, 4, "no labeled training assets")
        return 1
    monitor.write(0.1, 2)

    total = len(labeled) + len(val_entries)
    step = max(1, total // 20)
    sums: dict[int, list[float]] = {}
    counts: dict[int, int] = {}
    for i, (_, label, vec) in enumerate(labeled):
        acc = sums.setdefault(label, [0.0] * len(vec))
        for j, v in enumerate(vec):
            acc[j] += v
        counts[label] = counts.get(label, 0) + 1
        if i % step == 0:
            monitor.write(0.1 + 0.4 * i / max(1, len(labeled)), 2)
    centroids = {c: [v / counts[c] for v in sums[c]] for c in sums}
    monitor.write(0.5, 2)

    correct = 0
    evaluated = 0
    for i, (asset_rel, ann_rel) in enumerate(val_entries):
        label = read_first_label(ann_rel)
        if label is None:
            continue
        vec = parse_vector(asset_rel)
        if vec is None:
            print(f"warning: unparseable payload {asset_rel}")
            continue
        evaluated += 1
        predicted, _ = nearest(centroids, vec)
        if predicted == label:
            correct += 1
        if i % step == 0:
            monitor.write(0.5 + 0.45 * i / max(1, len(val_entries)), 2)
    accuracy = correct / evaluated if evaluated else 0.0
    monitor.write(0.95, 2)

    write_model(centroids, n_classes, training_digest([aid for aid, _, _ in labeled]))
    (OUT / "result.json").write_text(
        json.dumps({"accuracy": accuracy, "train_assets": len(labeled), "val_assets": evaluated})
    )
    monitor.write(1.0, 3)
    return 0


if __name__ == "__main__":
    sys.exit(main())
