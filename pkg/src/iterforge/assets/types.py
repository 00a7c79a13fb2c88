"""Core value types for assets, annotations and dataset snapshots."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from ..errors import ValidationError

SHA256_HEX_LEN = 64


def asset_id_for(data: bytes) -> str:
    """Content address of a raw asset: lowercase sha256 hex digest."""
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class AnnotationObject:
    """One detection box: class index plus min/max corners in asset units."""

    class_id: int
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if self.class_id < 0:
            raise ValidationError(f"class_id must be non-negative, got {self.class_id}")
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValidationError(
                f"degenerate box: ({self.x_min},{self.y_min})-({self.x_max},{self.y_max})"
            )

    def to_list(self) -> list:
        return [self.class_id, self.x_min, self.y_min, self.x_max, self.y_max]

    @classmethod
    def from_list(cls, raw: list) -> "AnnotationObject":
        return cls(int(raw[0]), float(raw[1]), float(raw[2]), float(raw[3]), float(raw[4]))


@dataclass(frozen=True)
class AssetRecord:
    """Stored blob metadata; `id` is the sha256 of the raw bytes."""

    id: str
    byte_size: int
    source_name: str
    import_time: float


@dataclass
class Snapshot:
    """An immutable, versioned set of (asset id, annotations) with lineage.

    `entries` preserves insertion order and doubles as the O(1) detail map;
    `id_array` (the ordered key list) drives paging.
    """

    snapshot_id: str
    entries: dict[str, list[AnnotationObject]]
    class_names: list[str]
    parent_ids: list[str] = field(default_factory=list)
    provenance: str = "import"

    @property
    def id_array(self) -> list[str]:
        return list(self.entries.keys())

    def __len__(self) -> int:
        return len(self.entries)

    def asset_ids(self) -> set[str]:
        return set(self.entries.keys())

    def validate(self) -> None:
        n_classes = len(self.class_names)
        for aid, anns in self.entries.items():
            if len(aid) != SHA256_HEX_LEN:
                raise ValidationError(f"malformed asset id {aid!r}")
            for ann in anns:
                if ann.class_id >= n_classes:
                    raise ValidationError(
                        f"class_id {ann.class_id} out of range for {n_classes} classes"
                    )

    def content_digest(self) -> str:
        """Digest over entries and class names; stable for equal content."""
        doc = {
            "class_names": self.class_names,
            "entries": [[aid, [a.to_list() for a in anns]] for aid, anns in self.entries.items()],
        }
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def to_doc(self) -> dict:
        return {
            "snapshot_id": self.snapshot_id,
            "parent_ids": self.parent_ids,
            "provenance": self.provenance,
            "class_names": self.class_names,
            "entries": [[aid, [a.to_list() for a in anns]] for aid, anns in self.entries.items()],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Snapshot":
        entries = {
            aid: [AnnotationObject.from_list(a) for a in anns] for aid, anns in doc["entries"]
        }
        return cls(
            snapshot_id=doc["snapshot_id"],
            entries=entries,
            class_names=list(doc["class_names"]),
            parent_ids=list(doc["parent_ids"]),
            provenance=doc["provenance"],
        )
