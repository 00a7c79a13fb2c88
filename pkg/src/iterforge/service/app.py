"""HTTP + push-channel service exposing the platform."""
from __future__ import annotations

import asyncio
import json
import queue as queue_mod

from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from ..errors import (
    IntegrityError,
    IterforgeError,
    NotFoundError,
    StateError,
    ValidationError,
)
from ..platform import Platform
from .models import (
    DatasetOpRequest,
    ExecutorRegisterRequest,
    ImportRequest,
    LabelCreateRequest,
    ManifestView,
    ProjectCreateRequest,
    ProjectIdResponse,
    StatusResponse,
    TaskCreateRequest,
    TaskIdResponse,
    TaskView,
)

_STATUS_BY_ERROR = {
    NotFoundError: 404,
    ValidationError: 400,
    StateError: 409,
    IntegrityError: 409,
}


def task_view(task) -> TaskView:
    return TaskView(
        task_id=task.task_id,
        user_id=task.user_id,
        kind=task.kind.value,
        state=task.state.value,
        progress=task.progress,
        created=task.created,
        started=task.started,
        finished=task.finished,
        gpu_grant=task.gpu_grant,
        outputs=task.outputs,
        error_message=task.error_message,
    )


def create_app(platform: Platform) -> FastAPI:
    app = FastAPI(title="iterforge")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.platform = platform

    @app.exception_handler(IterforgeError)
    async def handle_domain_error(request: Request, exc: IterforgeError):
        status = 500
        for err_type, code in _STATUS_BY_ERROR.items():
            if isinstance(exc, err_type):
                status = code
                break
        return JSONResponse(
            status_code=status, content={"error": exc.code, "detail": str(exc)}
        )

    # -- projects -------------------------------------------------------

    @app.post("/api/projects", response_model=ProjectIdResponse, status_code=201)
    def create_project(body: ProjectCreateRequest):
        project_id = platform.engine.create_project(
            name=body.name,
            class_names=body.class_names,
            data_superset=body.data_superset,
            initial_data=body.initial_data,
            target_accuracy=body.target_accuracy,
            mining_batch_size=body.mining_batch_size,
            auto_advance=body.auto_advance,
            initial_model=body.initial_model,
            validation_data=body.validation_data,
            user_id=body.user_id,
            mine_params=body.mine_params,
        )
        return ProjectIdResponse(project_id=project_id)

    @app.get("/api/projects")
    def list_projects():
        return [state.to_doc() for state in platform.engine.list()]

    @app.get("/api/projects/{project_id}")
    def get_project(project_id: str):
        doc = platform.engine.get(project_id).to_doc()
        doc["next_action"] = (
            platform.engine.next_action(project_id)
            if doc["stage"] != "finished"
            else {"stage": "finished", "reason": doc["finish_reason"]}
        )
        return doc

    @app.post("/api/projects/{project_id}/advance")
    def advance_project(project_id: str):
        return platform.engine.advance(project_id).to_doc()

    @app.post("/api/projects/{project_id}/interrupt")
    def interrupt_project(project_id: str):
        return platform.engine.interrupt(project_id).to_doc()

    # -- datasets ---------------------------------------------------------

    @app.post("/api/datasets/import", response_model=TaskIdResponse, status_code=202)
    def import_dataset(body: ImportRequest):
        task_id = platform.scheduler.submit({"kind": "import", **body.model_dump()})
        return TaskIdResponse(task_id=task_id)

    @app.get("/api/datasets/{snapshot_id}/assets")
    def dataset_assets(snapshot_id: str, offset: int = 0, limit: int = 50):
        return platform.list_assets(snapshot_id, offset, limit)

    @app.post("/api/datasets/ops", response_model=TaskIdResponse, status_code=202)
    def dataset_op(body: DatasetOpRequest):
        task_id = platform.scheduler.submit(
            {"kind": "dataset-op", **body.model_dump()}
        )
        return TaskIdResponse(task_id=task_id)

    # -- tasks ---------------------------------------------------------------

    @app.post("/api/tasks", response_model=TaskIdResponse, status_code=202)
    def create_task(body: TaskCreateRequest):
        task_id = platform.scheduler.submit(body.model_dump())
        return TaskIdResponse(task_id=task_id)

    @app.get("/api/tasks")
    def list_tasks():
        return [task_view(t).model_dump() for t in platform.scheduler.list_tasks()]

    @app.get("/api/tasks/{task_id}", response_model=TaskView)
    def get_task(task_id: str):
        return task_view(platform.scheduler.get_task(task_id))

    @app.get("/api/tasks/{task_id}/status", response_model=StatusResponse)
    def get_task_status(task_id: str):
        return StatusResponse(**platform.task_status(task_id))

    @app.post("/api/tasks/{task_id}/stop", response_model=TaskView)
    def stop_task(task_id: str):
        return task_view(platform.scheduler.stop(task_id))

    # -- executors ----------------------------------------------------------

    @app.get("/api/executors")
    def list_executors(kind: str | None = None):
        return [
            ManifestView(**{k: v for k, v in m.to_doc().items() if k != "package_path"}).model_dump()
            for m in platform.registry.list(kind)
        ]

    @app.post("/api/executors", response_model=ManifestView, status_code=201)
    def register_executor(body: ExecutorRegisterRequest):
        manifest = platform.registry.register(body.package_path)
        doc = {k: v for k, v in manifest.to_doc().items() if k != "package_path"}
        return ManifestView(**doc)

    # -- labeling ----------------------------------------------------------

    @app.post("/api/labels", status_code=201)
    def create_label_task(body: LabelCreateRequest):
        task = platform.gateway.create_label_task(
            body.dataset, body.classes, body.instructions, body.doc_url
        )
        return task.to_doc()

    @app.get("/api/labels/{label_task_id}")
    def get_label_task(label_task_id: str):
        task = platform.gateway.poll_progress(label_task_id)
        if task.state == "completed" and task.result_snapshot is None:
            platform.gateway.collect_results(label_task_id)
            task = platform.gateway.get(label_task_id)
        return task.to_doc()

    # -- push channel ---------------------------------------------------------

    @app.websocket("/ws/{user_id}")
    async def push_channel(websocket: WebSocket, user_id: str):
        await websocket.accept()
        token, channel = platform.bus.hub.subscribe(user_id)
        try:
            while True:
                try:
                    frame = await asyncio.to_thread(channel.get, True, 2.0)
                except queue_mod.Empty:
                    # heartbeat doubles as disconnect detection on idle links
                    await websocket.send_text(json.dumps({"type": "ping"}))
                    continue
                await websocket.send_text(json.dumps(frame))
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            platform.bus.hub.unsubscribe(user_id, token)

    return app
