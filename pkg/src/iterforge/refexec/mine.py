"""Reference mine executor: uncertainty ranking by nearest-centroid margin.

Score = 1 / (|d_nearest - d_second| + eps): candidates sitting between two
centroids score highest. `strategy=random` substitutes a seeded per-asset
random score for baseline comparisons.
"""
from __future__ import annotations

import random
import sys

from .io import (
    IN,
    OUT,
    Monitor,
    asset_id_of,
    distance,
    parse_vector,
    read_config,
    read_index,
    read_model,
)

EPS = 1e-6


def main() -> int:
    cfg = read_config()
    monitor = Monitor(cfg["task_id"])
    monitor.write(0.0, 2)
    params = cfg.get("params", {})
    strategy = params.get("strategy", "uncertainty")
    seed = int(params.get("seed", 0))

    model_path = IN / "models" / "model.txt"
    if not model_path.exists():
        monitor.write(0.0, 4, "no model provided")
        return 1
    centroids, _ = read_model(model_path)
    if not centroids:
        monitor.write(0.0, 4, "model has no centroids")
        return 1

    candidates = read_index("candidate-index.tsv")
    step = max(1, len(candidates) // 20)
    scored: list[tuple[str, float]] = []
    for i, (asset_rel, _) in enumerate(candidates):
        aid = asset_id_of(asset_rel)
        if strategy == "random":
            score = random.Random(f"{seed}:{aid}").random()
        else:
            vec = parse_vector(asset_rel)
            if vec is None:
                print(f"warning: unparseable payload {asset_rel}, scored 0")
                score = 0.0
            else:
                dists = sorted(distance(vec, c) for c in centroids.values())
                margin = dists[1] - dists[0] if len(dists) > 1 else dists[0]
                score = 1.0 / (margin + EPS)
        scored.append((aid, score))
        if i % step == 0:
            monitor.write(0.9 * i / max(1, len(candidates)), 2)

    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    (OUT / "result.tsv").write_text(
        "".join(f"{aid}\t{score!r}\n" for aid, score in scored)
    )
    monitor.write(1.0, 3)
    return 0


if __name__ == "__main__":
    sys.exit(main())
