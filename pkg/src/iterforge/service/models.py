"""Request and response schemas for the HTTP API."""
from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class ProjectCreateRequest(BaseModel):
    name: str
    class_names: list[str]
    data_superset: str
    initial_data: str | None = None
    target_accuracy: float
    mining_batch_size: int = Field(ge=1)
    auto_advance: bool = False
    initial_model: str | None = None
    validation_data: str | None = None
    user_id: str = "u1"
    mine_params: dict = Field(default_factory=dict)


class ImportRequest(BaseModel):
    source_dir: str
    format: str
    policy: str = "ignore"
    class_names: list[str] | None = None
    user_id: str = "u1"


class DatasetOpRequest(BaseModel):
    op: str
    a: str
    b: str | None = None
    args: dict = Field(default_factory=dict)
    user_id: str = "u1"


class TaskCreateRequest(BaseModel):
    """Generic task submission; extra fields pass through to the handler."""

    model_config = ConfigDict(extra="allow")

    kind: str
    user_id: str = "u1"
    gpus: int = 1
    executor: dict | None = None
    snapshots: dict = Field(default_factory=dict)
    class_names: list[str] = Field(default_factory=list)
    params: dict = Field(default_factory=dict)
    model_files: list[str] = Field(default_factory=list)


class LabelCreateRequest(BaseModel):
    dataset: str
    classes: list[str]
    instructions: str = ""
    doc_url: str | None = None


class ExecutorRegisterRequest(BaseModel):
    package_path: str


class TaskIdResponse(BaseModel):
    task_id: str


class ProjectIdResponse(BaseModel):
    project_id: str


class StatusResponse(BaseModel):
    task_id: str
    user_id: str
    progress: float
    state_code: int
    state_message: str = ""
    error_message: str = ""
    timestamp_ms: int


class TaskView(BaseModel):
    task_id: str
    user_id: str
    kind: str
    state: str
    progress: float
    created: float
    started: float | None = None
    finished: float | None = None
    gpu_grant: list[int] | None = None
    outputs: dict = Field(default_factory=dict)
    error_message: str | None = None


class ManifestView(BaseModel):
    name: str
    version: str
    kinds: list[str]
    entry: list[str]
    params: list[dict] = Field(default_factory=list)
    description: str = ""


class ErrorResponse(BaseModel):
    error: str
    detail: str
