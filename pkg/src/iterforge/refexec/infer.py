"""Reference infer executor: nearest-centroid class with a whole-canvas box."""
from __future__ import annotations

import sys

from .io import (
    IN,
    OUT,
    Monitor,
    asset_id_of,
    nearest,
    parse_vector,
    read_config,
    read_index,
    read_model,
)


def main() -> int:
    cfg = read_config()
    monitor = Monitor(cfg["task_id"])
    monitor.write(0.0, 2)

    model_path = IN / "models" / "model.txt"
    if not model_path.exists():
        monitor.write(0.0, 4, "no model provided")
        return 1
    centroids, _ = read_model(model_path)

    infer_dir = OUT / "infer"
    infer_dir.mkdir(parents=True, exist_ok=True)
    candidates = read_index("candidate-index.tsv")
    step = max(1, len(candidates) // 20)
    for i, (asset_rel, _) in enumerate(candidates):
        aid = asset_id_of(asset_rel)
        vec = parse_vector(asset_rel)
        if vec is None:
            print(f"warning: unparseable payload {asset_rel}, no prediction")
            (infer_dir / f"{aid}.ann").write_text("")
        else:
            predicted, _ = nearest(centroids, vec)
            (infer_dir / f"{aid}.ann").write_text(f"{predicted} 0 0 1 1\n")
        if i % step == 0:
            monitor.write(0.95 * i / max(1, len(candidates)), 2)
    monitor.write(1.0, 3)
    return 0


if __name__ == "__main__":
    sys.exit(main())
