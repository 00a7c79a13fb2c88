"""Executor package manifests: parsing, validation, registry storage."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..db import Database
from ..errors import NotFoundError, ValidationError

EXECUTOR_KINDS = ("train", "mine", "infer")
PARAM_TYPES = ("int", "float", "str", "bool")


@dataclass(frozen=True)
class ParamSpec:
    key: str
    type: str
    default: object = None
    required: bool = False


@dataclass
class ExecutorManifest:
    name: str
    version: str
    kinds: list[str]
    entry: list[str]
    params: list[ParamSpec] = field(default_factory=list)
    description: str = ""
    package_path: str = ""

    def to_doc(self) -> dict:
        return {
            "name": self.name,
            "version": self.version,
            "kinds": self.kinds,
            "entry": self.entry,
            "params": [vars(p) for p in self.params],
            "description": self.description,
            "package_path": self.package_path,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ExecutorManifest":
        return cls(
            name=doc["name"],
            version=doc["version"],
            kinds=list(doc["kinds"]),
            entry=list(doc["entry"]),
            params=[ParamSpec(**p) for p in doc.get("params", [])],
            description=doc.get("description", ""),
            package_path=doc.get("package_path", ""),
        )

    def resolve_params(self, given: dict) -> dict:
        """Apply defaults and check required keys; unknown keys pass through."""
        out = {}
        for p in self.params:
            if p.key in given:
                out[p.key] = given[p.key]
            elif p.required:
                raise ValidationError(f"missing required executor param {p.key!r}")
            elif p.default is not None:
                out[p.key] = p.default
        for key, value in given.items():
            out.setdefault(key, value)
        return out


def parse_manifest(package_path: str | Path) -> ExecutorManifest:
    """Read and validate `manifest.json` from an executor package directory."""
    pkg = Path(package_path)
    manifest_file = pkg / "manifest.json"
    if not manifest_file.is_file():
        raise ValidationError(f"no manifest.json in {pkg}")
    try:
        doc = json.loads(manifest_file.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"manifest.json is not valid JSON: {exc}") from exc

    for key in ("name", "version", "kinds", "entry"):
        if key not in doc:
            raise ValidationError(f"manifest missing {key!r}")
    kinds = doc["kinds"]
    if not kinds or not isinstance(kinds, list):
        raise ValidationError("manifest kinds must be a non-empty list")
    for kind in kinds:
        if kind not in EXECUTOR_KINDS:
            raise ValidationError(f"unknown executor kind {kind!r}")
    entry = doc["entry"]
    if not entry or not isinstance(entry, list):
        raise ValidationError("manifest entry must be a non-empty command list")

    params = []
    seen = set()
    for raw in doc.get("params", []):
        key = raw.get("key")
        if not key or key in seen:
            raise ValidationError(f"duplicate or missing param key {key!r}")
        seen.add(key)
        ptype = raw.get("type", "str")
        if ptype not in PARAM_TYPES:
            raise ValidationError(f"unknown param type {ptype!r}")
        params.append(
            ParamSpec(key=key, type=ptype, default=raw.get("default"), required=raw.get("required", False))
        )
    return ExecutorManifest(
        name=doc["name"],
        version=str(doc["version"]),
        kinds=list(kinds),
        entry=[str(e) for e in entry],
        params=params,
        description=doc.get("description", ""),
        package_path=str(pkg),
    )


class ExecutorRegistry:
    """Persistent registry of executor manifests keyed by (name, version)."""

    def __init__(self, db: Database):
        self._db = db
        self._db.execute(
            "CREATE TABLE IF NOT EXISTS executors ("
            "name TEXT, version TEXT, doc TEXT, PRIMARY KEY (name, version))"
        )

    def register(self, package_path: str | Path) -> ExecutorManifest:
        manifest = parse_manifest(package_path)
        if self._db.query_one(
            "SELECT 1 FROM executors WHERE name=? AND version=?",
            (manifest.name, manifest.version),
        ):
            raise ValidationError(
                f"executor {manifest.name}:{manifest.version} already registered"
            )
        self._db.execute(
            "INSERT INTO executors (name, version, doc) VALUES (?,?,?)",
            (manifest.name, manifest.version, json.dumps(manifest.to_doc())),
        )
        return manifest

    def deregister(self, name: str, version: str) -> None:
        self._db.execute(
            "DELETE FROM executors WHERE name=? AND version=?", (name, version)
        )

    def get(self, name: str, version: str | None = None) -> ExecutorManifest:
        if version is not None:
            row = self._db.query_one(
                "SELECT doc FROM executors WHERE name=? AND version=?", (name, version)
            )
        else:
            row = self._db.query_one(
                "SELECT doc FROM executors WHERE name=? ORDER BY version DESC LIMIT 1",
                (name,),
            )
        if row is None:
            raise NotFoundError(f"executor {name} not registered")
        return ExecutorManifest.from_doc(json.loads(row[0]))

    def list(self, kind: str | None = None) -> list[ExecutorManifest]:
        rows = self._db.query("SELECT doc FROM executors ORDER BY name, version")
        manifests = [ExecutorManifest.from_doc(json.loads(r[0])) for r in rows]
        if kind is not None:
            manifests = [m for m in manifests if kind in m.kinds]
        return manifests
