"""Service configuration loading and validation."""
from __future__ import annotations

import json
import os
from pathlib import Path

from pydantic import BaseModel, Field, field_validator

ENV_CONFIG = "ITERFORGE_CONFIG"


class ServiceConfig(BaseModel):
    """Runtime configuration for the platform service."""

    store_root: Path
    port: int = 8400
    gpu_pool_capacity: int = Field(default=2, ge=1)
    poll_interval_ms: int = Field(default=500, gt=0)
    dispatch_interval_ms: int = Field(default=1000, gt=0)
    labeler_backend: str = "sim"  # "sim" or an external base URL
    stop_grace_seconds: float = Field(default=10.0, gt=0)
    drain_policy: str = "broken"  # how in-flight tasks are re-marked on restart
    sim_labeler_rate: int = Field(default=1000, ge=1)
    default_user: str = "u1"

    @field_validator("drain_policy")
    @classmethod
    def _check_drain(cls, v: str) -> str:
        if v not in ("broken", "failure"):
            raise ValueError("drain_policy must be 'broken' or 'failure'")
        return v

    @classmethod
    def load(cls, path: str | os.PathLike | None = None) -> "ServiceConfig":
        """Load config from a JSON file; ITERFORGE_CONFIG overrides the path."""
        env_path = os.environ.get(ENV_CONFIG)
        if env_path:
            path = env_path
        if path is None:
            raise FileNotFoundError("no config path given and ITERFORGE_CONFIG unset")
        data = json.loads(Path(path).read_text())
        return cls(**data)
