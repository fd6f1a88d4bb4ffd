"""HTTP surface of the interaction service.

All bodies are UTF-8 JSON; errors come back as
{"error": {"code", "message", "details"}} with a matching status code.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from ..errors import SessionError
from .sessions import SessionStore

STATUS_BY_CODE = {
    "unknown_session": 404,
    "unknown_system": 404,
    "validation": 400,
    "closed_session": 409,
    "stale_turn": 409,
    "session_error": 400,
}


class ProfileBody(BaseModel):
    items: list[int] = Field(default_factory=list)
    sentences: list[str] = Field(default_factory=list)


class CreateSessionBody(BaseModel):
    system_id: str
    profile: ProfileBody = Field(default_factory=ProfileBody)


class MessageBody(BaseModel):
    text: str


class OverrideBody(BaseModel):
    turn_id: int
    field: str
    value: object


def create_app(store: SessionStore, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="convrec interaction service")

    @app.exception_handler(SessionError)
    async def _session_error(_request: Request, exc: SessionError):
        return JSONResponse(
            status_code=STATUS_BY_CODE.get(exc.code, 400),
            content={
                "error": {"code": exc.code, "message": str(exc), "details": exc.details}
            },
        )

    @app.get("/api/systems")
    def list_systems():
        systems = []
        for system_id, serving in sorted(store.registry.items()):
            bundle = serving.system.bundle
            systems.append(
                {
                    "system_id": system_id,
                    "description": serving.description,
                    "dataset": serving.system.config.get("dataset", {}).get("name", ""),
                    "tasks": {
                        task: model.NAME
                        for task, model in serving.system.task_models.items()
                    },
                    "catalog_size": bundle.n_items,
                    "top_k": serving.top_k,
                }
            )
        return {"systems": systems}

    @app.post("/api/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        session = store.create(body.profile.model_dump(), body.system_id)
        return {"session": session}

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        return {"session": store.get(session_id)}

    @app.delete("/api/sessions/{session_id}")
    def close_session(session_id: str):
        return {"session": store.close(session_id)}

    @app.post("/api/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageBody):
        return {"turn": store.post_message(session_id, body.text)}

    @app.post("/api/sessions/{session_id}/override")
    def post_override(session_id: str, body: OverrideBody):
        return {
            "turn": store.apply_override(session_id, body.turn_id, body.field, body.value)
        }

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
