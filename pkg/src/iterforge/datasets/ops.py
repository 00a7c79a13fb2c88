"""Set algebra over snapshots: filter, merge, intersect, exclude.

Every operation commits a brand-new snapshot and leaves its inputs
untouched. Intersect and exclude keep the left operand's annotations.
"""
from __future__ import annotations

import enum

from ..assets.store import AssetStore
from ..assets.types import AnnotationObject, Snapshot
from ..errors import ValidationError


class MergeStrategy(str, enum.Enum):
    PREFER_LEFT = "prefer-left"
    PREFER_RIGHT = "prefer-right"
    UNION_ANNOTATIONS = "union-annotations"


def filter_snapshot(
    store: AssetStore,
    snapshot_id: str,
    include_classes: set[str] | None = None,
    exclude_classes: set[str] | None = None,
    labeled_only: bool = False,
    provenance: str = "dataset-op",
) -> str:
    """Keep assets passing the class predicate; new snapshot with parent s."""
    if not include_classes and not exclude_classes and not labeled_only:
        raise ValidationError("identity filter refused: no predicate given")
    snap = store.get_snapshot(snapshot_id)
    known = set(snap.class_names)
    for name in (include_classes or set()) | (exclude_classes or set()):
        if name not in known:
            raise ValidationError(f"class {name!r} not in snapshot class list")
    include_ids = (
        {snap.class_names.index(n) for n in include_classes} if include_classes else None
    )
    exclude_ids = (
        {snap.class_names.index(n) for n in exclude_classes} if exclude_classes else set()
    )

    entries: dict[str, list[AnnotationObject]] = {}
    for aid, anns in snap.entries.items():
        kept = [a for a in anns if a.class_id not in exclude_ids]
        if exclude_ids and anns and not kept:
            continue  # every annotation excluded: asset drops out
        if labeled_only and not kept:
            continue
        if include_ids is not None and not any(a.class_id in include_ids for a in kept):
            continue
        entries[aid] = kept
    return store.commit_snapshot(
        parent_ids=[snapshot_id],
        entries=entries,
        provenance=provenance,
        class_names=snap.class_names,
    )


def _merged_class_names(a: Snapshot, b: Snapshot, remap: bool) -> list[str]:
    if a.class_names == b.class_names:
        return list(a.class_names)
    if not remap:
        raise ValidationError("class list conflict and remapping disabled")
    merged = list(a.class_names)
    for name in b.class_names:
        if name not in merged:
            merged.append(name)
    return merged


def _remap(anns: list[AnnotationObject], src: list[str], dst: list[str]) -> list[AnnotationObject]:
    if src == dst:
        return list(anns)
    table = {i: dst.index(name) for i, name in enumerate(src)}
    return [
        AnnotationObject(table[a.class_id], a.x_min, a.y_min, a.x_max, a.y_max) for a in anns
    ]


def merge(
    store: AssetStore,
    a_id: str,
    b_id: str,
    strategy: MergeStrategy = MergeStrategy.UNION_ANNOTATIONS,
    remap_classes: bool = True,
    provenance: str = "dataset-op",
) -> str:
    """Asset-set union; annotation collisions resolved per strategy."""
    strategy = MergeStrategy(strategy)
    a = store.get_snapshot(a_id)
    b = store.get_snapshot(b_id)
    class_names = _merged_class_names(a, b, remap_classes)

    entries: dict[str, list[AnnotationObject]] = {}
    for aid, anns in a.entries.items():
        entries[aid] = _remap(anns, a.class_names, class_names)
    for aid, anns in b.entries.items():
        mapped = _remap(anns, b.class_names, class_names)
        if aid not in entries:
            entries[aid] = mapped
        elif strategy is MergeStrategy.PREFER_RIGHT:
            entries[aid] = mapped
        elif strategy is MergeStrategy.UNION_ANNOTATIONS:
            entries[aid] = entries[aid] + [m for m in mapped if m not in entries[aid]]
        # PREFER_LEFT keeps what is already there
    return store.commit_snapshot(
        parent_ids=[a_id, b_id], entries=entries, provenance=provenance, class_names=class_names
    )


def intersect(
    store: AssetStore, a_id: str, b_id: str, provenance: str = "dataset-op"
) -> str:
    """Asset ids present in both; annotations taken from the left operand."""
    a = store.get_snapshot(a_id)
    b_ids = store.get_snapshot(b_id).asset_ids()
    entries = {aid: anns for aid, anns in a.entries.items() if aid in b_ids}
    return store.commit_snapshot(
        parent_ids=[a_id, b_id], entries=entries, provenance=provenance,
        class_names=a.class_names,
    )


def exclude(
    store: AssetStore, a_id: str, b_id: str, provenance: str = "dataset-op"
) -> str:
    """Asset ids of a minus b; annotations from a."""
    a = store.get_snapshot(a_id)
    b_ids = store.get_snapshot(b_id).asset_ids()
    entries = {aid: anns for aid, anns in a.entries.items() if aid not in b_ids}
    return store.commit_snapshot(
        parent_ids=[a_id, b_id], entries=entries, provenance=provenance,
        class_names=a.class_names,
    )
