"""Workspace preparation: the `in/` and `out/` exchange area for one instance.

Layout (all paths relative to the workspace root):
    in/config.json            task id, kind, class names, gpu ids, params
    in/class-names.txt        one class per line, class_id = line index
    in/train-index.tsv        train kind
    in/val-index.tsv          train kind
    in/candidate-index.tsv    mine / infer kinds
    in/assets/<aa>/<id>       hard-linked (or copied) blobs
    in/annotations/<id>.ann   `class_id x_min y_min x_max y_max` lines
    in/models/                prior model files, when given
    out/                      empty at launch; executor writes here only
"""
from __future__ import annotations

import json
import os
import shutil
from dataclasses import dataclass
from pathlib import Path

from ..assets.store import AssetStore
from ..errors import ValidationError


@dataclass
class Workspace:
    root: Path
    kind: str
    task_id: str

    @property
    def in_dir(self) -> Path:
        return self.root / "in"

    @property
    def out_dir(self) -> Path:
        return self.root / "out"

    @property
    def monitor_path(self) -> Path:
        return self.out_dir / "monitor.txt"

    @property
    def log_path(self) -> Path:
        return self.out_dir / "log.txt"


def _link_or_copy(src: Path, dst: Path) -> None:
    if dst.exists():
        return
    dst.parent.mkdir(parents=True, exist_ok=True)
    try:
        os.link(src, dst)
    except OSError:
        shutil.copy2(src, dst)


def _write_index(
    ws: Workspace, store: AssetStore, snapshot_id: str, index_name: str
) -> None:
    snap = store.get_snapshot(snapshot_id)
    lines = []
    for aid, anns in snap.entries.items():
        blob_rel = f"assets/{aid[:2]}/{aid}"
        _link_or_copy(store._blob_path(aid), ws.in_dir / blob_rel)
        if anns:
            ann_rel = f"annotations/{aid}.ann"
            ann_path = ws.in_dir / ann_rel
            ann_path.parent.mkdir(parents=True, exist_ok=True)
            ann_path.write_text(
                "".join(
                    f"{a.class_id} {a.x_min} {a.y_min} {a.x_max} {a.y_max}\n" for a in anns
                )
            )
        else:
            ann_rel = ""
        lines.append(f"{blob_rel}\t{ann_rel}\n")
    (ws.in_dir / index_name).write_text("".join(lines))


def prepare_workspace(
    root: str | Path,
    task_id: str,
    kind: str,
    store: AssetStore,
    class_names: list[str],
    params: dict,
    gpu_ids: list[int],
    train_snapshot: str | None = None,
    val_snapshot: str | None = None,
    candidate_snapshot: str | None = None,
    model_files: list[Path] | None = None,
) -> Workspace:
    """Populate `in/` for one executor instance and create an empty `out/`."""
    if kind not in ("train", "mine", "infer"):
        raise ValidationError(f"unsupported executor kind {kind!r}")
    if kind == "train" and (train_snapshot is None or val_snapshot is None):
        raise ValidationError("train requires both train and validation snapshots")
    if kind in ("mine", "infer") and candidate_snapshot is None:
        raise ValidationError(f"{kind} requires a candidate snapshot")

    ws = Workspace(root=Path(root), kind=kind, task_id=task_id)
    ws.in_dir.mkdir(parents=True, exist_ok=True)
    ws.out_dir.mkdir(parents=True, exist_ok=True)

    (ws.in_dir / "class-names.txt").write_text(
        "".join(f"{name}\n" for name in class_names)
    )
    (ws.in_dir / "config.json").write_text(
        json.dumps(
            {
                "task_id": task_id,
                "kind": kind,
                "class_names": class_names,
                "gpu_ids": gpu_ids,
                "params": params,
            },
            indent=2,
        )
    )

    if kind == "train":
        _write_index(ws, store, train_snapshot, "train-index.tsv")
        _write_index(ws, store, val_snapshot, "val-index.tsv")
    else:
        _write_index(ws, store, candidate_snapshot, "candidate-index.tsv")

    if model_files:
        models_dir = ws.in_dir / "models"
        models_dir.mkdir(exist_ok=True)
        for src in model_files:
            shutil.copy2(src, models_dir / Path(src).name)
    return ws
