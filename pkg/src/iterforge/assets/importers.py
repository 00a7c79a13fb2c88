"""Directory importers: yolo-txt, a VOC xml subset, and flat unlabeled files.

All parsing happens before any blob is written, so an abort on unknown
labels leaves the store untouched (no snapshot, no new blobs).

Boxes from normalized formats are expressed on a unit canvas (asset units
in [0, 1]); the platform never decodes image dimensions.
"""
from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import NotFoundError, ValidationError
from .store import AssetStore
from .types import AnnotationObject

FORMATS = ("yolo-txt", "voc-xml-subset", "flat-unlabeled")
POLICIES = ("ignore", "abort", "add")


class UnknownLabelError(ValidationError):
    """Raised under policy=abort when an annotation names an unknown class."""


@dataclass
class ImportStats:
    files_scanned: int = 0
    assets_imported: int = 0
    annotations_kept: int = 0
    objects_dropped: int = 0
    files_failed: int = 0
    failed_files: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "files_scanned": self.files_scanned,
            "assets_imported": self.assets_imported,
            "annotations_kept": self.annotations_kept,
            "objects_dropped": self.objects_dropped,
            "files_failed": self.files_failed,
            "failed_files": list(self.failed_files),
        }


def import_dataset(
    store: AssetStore,
    source_path: str | Path,
    format: str,
    unknown_label_policy: str = "ignore",
    class_names: list[str] | None = None,
    provenance: str = "import",
) -> tuple[str, ImportStats]:
    """Import a directory as one new root snapshot; returns (snapshot_id, stats)."""
    source = Path(source_path)
    if not source.is_dir():
        raise NotFoundError(f"source path {source} is not a readable directory")
    if format not in FORMATS:
        raise ValidationError(f"unknown import format {format!r}")
    if unknown_label_policy not in POLICIES:
        raise ValidationError(f"unknown label policy {unknown_label_policy!r}")
    classes = list(class_names or [])
    stats = ImportStats()

    # (source file, raw bytes, parsed annotations), fully parsed before any write
    parsed: list[tuple[Path, bytes, list[AnnotationObject]]] = []

    if format == "flat-unlabeled":
        for path in sorted(p for p in source.iterdir() if p.is_file()):
            stats.files_scanned += 1
            parsed.append((path, path.read_bytes(), []))
    elif format == "yolo-txt":
        asset_files = sorted(
            p for p in source.iterdir() if p.is_file() and p.suffix != ".txt"
        )
        for path in asset_files:
            stats.files_scanned += 1
            ann_path = path.with_suffix(".txt")
            anns: list[AnnotationObject] = []
            if ann_path.exists():
                try:
                    anns = _parse_yolo(ann_path, classes, unknown_label_policy, stats)
                except UnknownLabelError:
                    raise
                except (ValueError, ValidationError):
                    if unknown_label_policy == "abort":
                        raise ValidationError(f"malformed annotation file {ann_path}")
                    stats.files_failed += 1
                    stats.failed_files.append(str(ann_path))
                    anns = []
            parsed.append((path, path.read_bytes(), anns))
    else:  # voc-xml-subset
        asset_files = sorted(
            p for p in source.iterdir() if p.is_file() and p.suffix != ".xml"
        )
        for path in asset_files:
            stats.files_scanned += 1
            ann_path = path.with_suffix(".xml")
            anns = []
            if ann_path.exists():
                try:
                    anns = _parse_voc(ann_path, classes, unknown_label_policy, stats)
                except UnknownLabelError:
                    raise
                except (ET.ParseError, ValueError, ValidationError):
                    if unknown_label_policy == "abort":
                        raise ValidationError(f"malformed annotation file {ann_path}")
                    stats.files_failed += 1
                    stats.failed_files.append(str(ann_path))
                    anns = []
            parsed.append((path, path.read_bytes(), anns))

    # ordered by import sequence, deduplicated on content
    entries: dict[str, list[AnnotationObject]] = {}
    for path, data, anns in parsed:
        asset_id = store.put_asset(data, source_name=path.name)
        if asset_id in entries:
            if anns:
                merged = entries[asset_id] + [a for a in anns if a not in entries[asset_id]]
                entries[asset_id] = merged
        else:
            entries[asset_id] = anns
            stats.assets_imported += 1
        stats.annotations_kept += len(anns)

    snapshot_id = store.commit_snapshot(
        parent_ids=[], entries=entries, provenance=provenance, class_names=classes
    )
    return snapshot_id, stats


def _parse_yolo(
    path: Path, classes: list[str], policy: str, stats: ImportStats
) -> list[AnnotationObject]:
    """Lines `class_id x_center y_center width height`, normalized floats."""
    anns: list[AnnotationObject] = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 5:
            raise ValueError(f"bad yolo line in {path}: {line!r}")
        class_id = int(fields[0])
        xc, yc, w, h = (float(v) for v in fields[1:])
        if class_id >= len(classes) or class_id < 0:
            # yolo has no class names, so `add` cannot synthesize one
            if policy == "abort":
                raise UnknownLabelError(f"class id {class_id} unknown in {path}")
            stats.objects_dropped += 1
            continue
        anns.append(
            AnnotationObject(class_id, xc - w / 2, yc - h / 2, xc + w / 2, yc + h / 2)
        )
    return anns


def _parse_voc(
    path: Path, classes: list[str], policy: str, stats: ImportStats
) -> list[AnnotationObject]:
    """`<object><name>…</name><bndbox>…` elements; everything else ignored."""
    root = ET.fromstring(path.read_text())
    anns: list[AnnotationObject] = []
    for obj in root.iter("object"):
        name_el = obj.find("name")
        box_el = obj.find("bndbox")
        if name_el is None or box_el is None:
            raise ValueError(f"object without name/bndbox in {path}")
        name = (name_el.text or "").strip()
        if name not in classes:
            if policy == "abort":
                raise UnknownLabelError(f"label {name!r} unknown in {path}")
            if policy == "add":
                classes.append(name)
            else:
                stats.objects_dropped += 1
                continue
        coords = {}
        for key in ("xmin", "ymin", "xmax", "ymax"):
            el = box_el.find(key)
            if el is None or el.text is None:
                raise ValueError(f"bndbox missing {key} in {path}")
            coords[key] = float(el.text)
        anns.append(
            AnnotationObject(
                classes.index(name), coords["xmin"], coords["ymin"], coords["xmax"], coords["ymax"]
            )
        )
    return anns
