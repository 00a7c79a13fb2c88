"""Content-addressed asset store with versioned snapshot persistence.

Layout under the store root:
    blobs/<aa>/<id>      raw asset bytes, sharded by the first two hex chars
    snapshots.log        append-only framed binary records, one per snapshot
    meta.db              sqlite index: asset records + snapshot log offsets
"""
from __future__ import annotations

import json
import os
import sqlite3
import struct
import threading
import time
import uuid
import zlib
from pathlib import Path

from ..errors import IntegrityError, NotFoundError, StorageError, ValidationError
from .types import AnnotationObject, AssetRecord, Snapshot, asset_id_for

_RECORD_MAGIC = b"IFSN"
_HEADER = struct.Struct("<4sI")  # magic, payload length (little-endian)
_TRAILER = struct.Struct("<I")  # crc32 of payload


class AssetStore:
    """Deduplicating blob store plus the append-only snapshot log."""

    def __init__(self, root: str | os.PathLike, allow_empty_assets: bool = True):
        self.root = Path(root)
        self.blob_dir = self.root / "blobs"
        self.log_path = self.root / "snapshots.log"
        self.blob_dir.mkdir(parents=True, exist_ok=True)
        self.allow_empty_assets = allow_empty_assets
        self._write_lock = threading.Lock()  # single-writer commit queue
        self._db = sqlite3.connect(self.root / "meta.db", check_same_thread=False)
        self._db_lock = threading.Lock()
        with self._db_lock:
            self._db.execute("PRAGMA journal_mode=WAL")
            self._db.execute(
                "CREATE TABLE IF NOT EXISTS assets ("
                "id TEXT PRIMARY KEY, byte_size INTEGER, source_name TEXT,"
                "import_time REAL, seq INTEGER)"
            )
            self._db.execute(
                "CREATE TABLE IF NOT EXISTS snapshots ("
                "id TEXT PRIMARY KEY, offset INTEGER, length INTEGER)"
            )
            self._db.commit()
        self._snapshot_cache: dict[str, Snapshot] = {}

    # -- blobs ---------------------------------------------------------------

    def _blob_path(self, asset_id: str) -> Path:
        return self.blob_dir / asset_id[:2] / asset_id

    def put_asset(self, data: bytes, source_name: str = "") -> str:
        """Store raw bytes at their content address; idempotent."""
        if not data and not self.allow_empty_assets:
            raise ValidationError("empty asset payloads are disabled")
        asset_id = asset_id_for(data)
        path = self._blob_path(asset_id)
        if not path.exists():
            try:
                path.parent.mkdir(parents=True, exist_ok=True)
                tmp = path.with_suffix(".tmp-%s" % uuid.uuid4().hex[:8])
                tmp.write_bytes(data)
                tmp.rename(path)
            except OSError as exc:
                raise StorageError(f"blob write failed for {asset_id}: {exc}") from exc
        with self._db_lock:
            cur = self._db.execute("SELECT 1 FROM assets WHERE id=?", (asset_id,))
            if cur.fetchone() is None:
                seq = self._db.execute("SELECT COUNT(*) FROM assets").fetchone()[0]
                self._db.execute(
                    "INSERT INTO assets (id, byte_size, source_name, import_time, seq)"
                    " VALUES (?,?,?,?,?)",
                    (asset_id, len(data), source_name, time.time(), seq),
                )
                self._db.commit()
        return asset_id

    def get_blob(self, asset_id: str) -> bytes:
        path = self._blob_path(asset_id)
        if not path.exists():
            raise NotFoundError(f"no blob for asset {asset_id}")
        return path.read_bytes()

    def has_asset(self, asset_id: str) -> bool:
        return self._blob_path(asset_id).exists()

    def blob_count(self) -> int:
        return sum(1 for shard in self.blob_dir.iterdir() for _ in shard.iterdir())

    def get_record(self, asset_id: str) -> AssetRecord:
        with self._db_lock:
            row = self._db.execute(
                "SELECT id, byte_size, source_name, import_time FROM assets WHERE id=?",
                (asset_id,),
            ).fetchone()
        if row is None:
            raise NotFoundError(f"no asset record for {asset_id}")
        return AssetRecord(id=row[0], byte_size=row[1], source_name=row[2], import_time=row[3])

    def asset_seq(self, asset_id: str) -> int:
        with self._db_lock:
            row = self._db.execute("SELECT seq FROM assets WHERE id=?", (asset_id,)).fetchone()
        if row is None:
            raise NotFoundError(f"no asset record for {asset_id}")
        return row[0]

    # -- snapshots -----------------------------------------------------------

    def commit_snapshot(
        self,
        parent_ids: list[str],
        entries,
        provenance: str,
        class_names: list[str],
    ) -> str:
        """Persist a new immutable snapshot; returns its id.

        `entries` is a mapping or an iterable of (asset_id, annotations) pairs;
        iteration order becomes the snapshot's paging order.
        """
        if isinstance(entries, dict):
            pairs = list(entries.items())
        else:
            pairs = list(entries)
            seen = set()
            for aid, _ in pairs:
                if aid in seen:
                    raise IntegrityError(f"duplicate asset id in entries: {aid}")
                seen.add(aid)
        for parent in parent_ids:
            self.get_snapshot(parent)  # raises NotFoundError if missing
        for aid, _ in pairs:
            if not self.has_asset(aid):
                raise IntegrityError(f"entries reference un-stored asset {aid}")
        snap = Snapshot(
            snapshot_id=uuid.uuid4().hex,
            entries={aid: list(anns) for aid, anns in pairs},
            class_names=list(class_names),
            parent_ids=list(parent_ids),
            provenance=provenance,
        )
        snap.validate()
        payload = zlib.compress(
            json.dumps(snap.to_doc(), sort_keys=True, separators=(",", ":")).encode()
        )
        with self._write_lock:
            with open(self.log_path, "ab") as fp:
                offset = fp.tell()
                fp.write(_HEADER.pack(_RECORD_MAGIC, len(payload)))
                fp.write(payload)
                fp.write(_TRAILER.pack(zlib.crc32(payload)))
                fp.flush()
                os.fsync(fp.fileno())
            with self._db_lock:
                self._db.execute(
                    "INSERT INTO snapshots (id, offset, length) VALUES (?,?,?)",
                    (snap.snapshot_id, offset, len(payload)),
                )
                self._db.commit()
        self._snapshot_cache[snap.snapshot_id] = snap
        return snap.snapshot_id

    def get_snapshot(self, snapshot_id: str) -> Snapshot:
        snap = self._snapshot_cache.get(snapshot_id)
        if snap is not None:
            return snap
        with self._db_lock:
            row = self._db.execute(
                "SELECT offset, length FROM snapshots WHERE id=?", (snapshot_id,)
            ).fetchone()
        if row is None:
            raise NotFoundError(f"no snapshot {snapshot_id}")
        offset, length = row
        with open(self.log_path, "rb") as fp:
            fp.seek(offset)
            magic, payload_len = _HEADER.unpack(fp.read(_HEADER.size))
            if magic != _RECORD_MAGIC or payload_len != length:
                raise IntegrityError(f"corrupt snapshot record at offset {offset}")
            payload = fp.read(payload_len)
            (crc,) = _TRAILER.unpack(fp.read(_TRAILER.size))
        if zlib.crc32(payload) != crc:
            raise IntegrityError(f"crc mismatch for snapshot {snapshot_id}")
        snap = Snapshot.from_doc(json.loads(zlib.decompress(payload)))
        self._snapshot_cache[snapshot_id] = snap
        return snap

    def has_snapshot(self, snapshot_id: str) -> bool:
        with self._db_lock:
            row = self._db.execute(
                "SELECT 1 FROM snapshots WHERE id=?", (snapshot_id,)
            ).fetchone()
        return row is not None

    def list_snapshot_ids(self) -> list[str]:
        with self._db_lock:
            rows = self._db.execute("SELECT id FROM snapshots ORDER BY offset").fetchall()
        return [r[0] for r in rows]

    def lineage(self, snapshot_id: str) -> list[str]:
        """All ancestor snapshot ids reachable from `snapshot_id` (BFS order)."""
        seen: list[str] = []
        frontier = [snapshot_id]
        visited = {snapshot_id}
        while frontier:
            snap = self.get_snapshot(frontier.pop(0))
            for parent in snap.parent_ids:
                if parent not in visited:
                    visited.add(parent)
                    seen.append(parent)
                    frontier.append(parent)
        return seen

    # -- reads ---------------------------------------------------------------

    def get_asset_detail(
        self, snapshot_id: str, asset_id: str
    ) -> tuple[AssetRecord, list[AnnotationObject]]:
        snap = self.get_snapshot(snapshot_id)
        anns = snap.entries.get(asset_id)
        if anns is None:
            raise NotFoundError(f"asset {asset_id} not in snapshot {snapshot_id}")
        return self.get_record(asset_id), anns

    def list_page(
        self, snapshot_id: str, offset: int, limit: int
    ) -> list[tuple[AssetRecord, list[AnnotationObject]]]:
        if limit <= 0:
            raise ValidationError("limit must be positive")
        if offset < 0:
            raise ValidationError("offset must be non-negative")
        snap = self.get_snapshot(snapshot_id)
        ids = snap.id_array[offset : offset + limit]
        return [(self.get_record(aid), snap.entries[aid]) for aid in ids]

    def close(self) -> None:
        with self._db_lock:
            self._db.close()
