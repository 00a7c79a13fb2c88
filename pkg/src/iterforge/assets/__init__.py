from .importers import ImportStats, import_dataset
from .store import AssetStore
from .types import AnnotationObject, AssetRecord, Snapshot, asset_id_for

__all__ = [
    "AnnotationObject",
    "AssetRecord",
    "AssetStore",
    "ImportStats",
    "Snapshot",
    "asset_id_for",
    "import_dataset",
]
