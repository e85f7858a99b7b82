"""HTTP API for the expert annotation study.

Serves tasks in each expert's own randomized order, records their waterlines
durably, and exports the dataset in the format the statistics tooling reads.
Also exposes the detection pipeline itself for one-off mask submissions.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, PlainTextResponse

from ..config import Config
from ..errors import WaterlineError
from ..geometry import Line, WaterlineParams, line_to_params, params_to_line
from ..mask import Mask
from ..pipeline import detect_waterline
from .schemas import (
    AnnotationSubmission,
    DetectRequest,
    DetectResponse,
    InitialLine,
    ProgressPayload,
    StoredAnnotation,
    TaskPayload,
)
from .store import DuplicateSubmissionError, StudyStore, UnknownExpertError


def create_app(
    manifest_path: str | Path,
    log_path: str | Path,
    experts: list[str] | None = None,
    seed: int = 0,
    config: Config | None = None,
) -> FastAPI:
    config = config if config is not None else Config(seed=seed)
    store = StudyStore(manifest_path, log_path, experts=experts, seed=seed)

    app = FastAPI(title="waterline annotation service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.store = store
    app.state.config = config

    def _expert_or_400(expert_id: str) -> None:
        try:
            store.check_expert(expert_id)
        except UnknownExpertError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "tasks": len(store.tasks), "config_hash": config.config_hash}

    @app.get("/tasks/next", response_model=TaskPayload)
    def tasks_next(expert: str) -> TaskPayload:
        _expert_or_400(expert)
        task = store.next_task(expert)
        completed, total = store.progress(expert)
        if task is None:
            raise HTTPException(
                status_code=404,
                detail={"expert_id": expert, "completed": completed, "total": total,
                        "remaining": 0},
            )
        line = params_to_line(task.initial_params)
        width = task.image.width
        return TaskPayload(
            task_id=task.task_id,
            image_id=task.image.image_id,
            image_url=f"/images/{task.image.image_id}",
            width=width,
            height=task.image.height,
            initial=InitialLine(
                h=task.initial_params.h,
                alpha=task.initial_params.alpha,
                center_x=task.initial_params.center_x,
            ),
            endpoints=[(0.0, line.y_at(0)), (float(width - 1), line.y_at(width - 1))],
            completed=completed,
            total=total,
        )

    @app.post("/annotations", response_model=StoredAnnotation, status_code=201)
    def post_annotation(sub: AnnotationSubmission) -> StoredAnnotation:
        _expert_or_400(sub.expert_id)
        task = store.by_task_id.get(sub.task_id)
        if task is None:
            raise HTTPException(status_code=404, detail=f"unknown task {sub.task_id!r}")
        width, height = task.image.width, task.image.height

        if sub.endpoints is not None:
            (x0, y0), (x1, y1) = sub.endpoints
            if (x0, x1) != (0.0, float(width - 1)):
                raise HTTPException(
                    status_code=422,
                    detail=f"endpoints must sit at x=0 and x={width - 1}, got x={x0}, x={x1}",
                )
            if not (0 <= y0 <= height - 1 and 0 <= y1 <= height - 1):
                raise HTTPException(
                    status_code=422,
                    detail=f"endpoint y must be within [0, {height - 1}], got {y0}, {y1}",
                )
            slope = (y1 - y0) / (x1 - x0)
            params = line_to_params(
                Line(slope=slope, intercept=y0), task.initial_params.center_x
            )
        else:
            if not 0 <= sub.h <= height - 1:
                raise HTTPException(
                    status_code=422, detail=f"h must be within [0, {height - 1}], got {sub.h}"
                )
            if not -90.0 < sub.alpha < 90.0:
                raise HTTPException(
                    status_code=422, detail=f"alpha must be within (-90, 90), got {sub.alpha}"
                )
            params = WaterlineParams(
                h=sub.h, alpha=sub.alpha, center_x=task.initial_params.center_x
            )

        try:
            record = store.submit(task, sub.expert_id, params)
        except DuplicateSubmissionError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return StoredAnnotation(
            task_id=task.task_id,
            image_id=record.image_id,
            expert_id=record.expert_id,
            h=record.params.h,
            alpha=record.params.alpha,
            center_x=record.params.center_x,
            modified=record.modified,
            timestamp=record.timestamp,
        )

    @app.get("/export")
    def export() -> PlainTextResponse:
        lines = [json.dumps(rec.to_dict()) for rec in store.export_records()]
        body = "\n".join(lines) + ("\n" if lines else "")
        return PlainTextResponse(body, media_type="application/x-ndjson")

    @app.get("/progress", response_model=ProgressPayload)
    def progress(expert: str) -> ProgressPayload:
        _expert_or_400(expert)
        completed, total = store.progress(expert)
        return ProgressPayload(
            expert_id=expert, completed=completed, total=total, remaining=total - completed
        )

    @app.get("/images/{image_id}")
    def image(image_id: str) -> FileResponse:
        path = store.image_path(image_id)
        if path is None or not path.exists():
            raise HTTPException(status_code=404, detail=f"unknown image {image_id!r}")
        return FileResponse(path)

    @app.post("/detect", response_model=DetectResponse)
    def detect(req: DetectRequest) -> DetectResponse:
        try:
            mask = Mask.from_rle({"width": req.width, "height": req.height, "rle": req.rle})
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        center_x = req.center_x if req.center_x is not None else config.center_x
        try:
            params = detect_waterline(mask, center_x=center_x)
        except WaterlineError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return DetectResponse(
            h=params.h,
            alpha=params.alpha,
            center_x=params.center_x,
            config_hash=config.config_hash,
        )

    return app
