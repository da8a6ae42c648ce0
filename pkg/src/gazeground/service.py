"""HTTP API for the blinded review UI.

Served item payloads are identity-free: the image arrives through an
item-scoped URL so not even a filename can hint at the study, and the
summary endpoint (the only unblinded view) sits behind a bearer token from
the environment.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Header, HTTPException, Query
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .experteval import (
    DuplicateAnnotationError,
    ErrorCounts,
    EvalError,
    SessionStore,
    UnknownItemError,
)
from .genclient import DEFAULT_MODEL_REGISTRY
from .promptkit import METHOD_LABELS

SUMMARY_TOKEN_ENV = "GAZEGROUND_SUMMARY_TOKEN"


class CountsBody(BaseModel):
    false_prediction: int = Field(ge=0)
    omission: int = Field(ge=0)
    wrong_location: int = Field(ge=0)
    wrong_severity: int = Field(ge=0)
    absent_comparison: int = Field(ge=0)


class AnnotationBody(BaseModel):
    annotator_id: str
    item_id: str
    counts: CountsBody


def _served_payload(session_id: str, item: dict, progress: dict) -> dict:
    return {
        "item_id": item["item_id"],
        "candidate_text": item["candidate_text"],
        "references": item["references"],
        "image_url": f"/sessions/{session_id}/items/{item['item_id']}/image"
        if item.get("has_image")
        else None,
        "progress": progress,
    }


def create_app(
    store: SessionStore,
    image_base_dir: str | Path = ".",
    frontend_dir: Optional[str | Path] = None,
) -> FastAPI:
    app = FastAPI(title="gazeground blinded review")
    image_base = Path(image_base_dir)

    @app.get("/registry/blinding-terms")
    def blinding_terms() -> dict:
        # The client-side guard refuses to render payloads containing any of
        # these; method labels other than "-" are included verbatim.
        return {
            "model_names": list(DEFAULT_MODEL_REGISTRY),
            "method_labels": [m for m in METHOD_LABELS if m != "-"],
        }

    @app.get("/sessions/{session_id}/next")
    def next_item(session_id: str, annotator: str = Query(...)) -> dict:
        try:
            item = store.next_item(session_id, annotator)
            progress = store.progress(session_id, annotator)
        except UnknownItemError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        if item is None:
            return {"done": True, "progress": progress}
        return _served_payload(session_id, item, progress)

    @app.get("/sessions/{session_id}/items/{item_id}/image")
    def item_image(session_id: str, item_id: str):
        try:
            session = store.get(session_id)
        except UnknownItemError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        private = session.unblinding.get(item_id)
        if private is None or not private.get("image_path"):
            raise HTTPException(status_code=404, detail="no image for item")
        path = image_base / private["image_path"]
        if not path.exists():
            raise HTTPException(status_code=404, detail="image file missing")
        return FileResponse(path)

    @app.post("/sessions/{session_id}/annotations", status_code=201)
    def submit(session_id: str, body: AnnotationBody) -> dict:
        try:
            counts = ErrorCounts(**body.counts.model_dump())
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        try:
            record = store.submit(session_id, body.annotator_id, body.item_id, counts)
        except DuplicateAnnotationError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except UnknownItemError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return {
            "session_id": record.session_id,
            "annotator_id": record.annotator_id,
            "item_id": record.item_id,
            "counts": body.counts.model_dump(),
            "submitted_at": record.submitted_at,
        }

    @app.get("/sessions/{session_id}/progress")
    def progress(session_id: str, annotator: Optional[str] = Query(default=None)) -> dict:
        try:
            return store.progress(session_id, annotator)
        except UnknownItemError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.get("/sessions/{session_id}/summary")
    def summary(session_id: str, authorization: Optional[str] = Header(default=None)) -> JSONResponse:
        expected = os.environ.get(SUMMARY_TOKEN_ENV)
        if not expected:
            raise HTTPException(status_code=503, detail=f"{SUMMARY_TOKEN_ENV} not configured")
        if authorization != f"Bearer {expected}":
            raise HTTPException(status_code=403, detail="summary is unblinded; token required")
        try:
            rows = store.error_summary(session_id)
        except UnknownItemError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except EvalError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return JSONResponse({"session_id": session_id, "rows": rows})

    if frontend_dir is not None:
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True), name="ui")

    return app
