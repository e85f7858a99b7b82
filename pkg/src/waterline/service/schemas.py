"""Request/response bodies of the annotation service.

None of the models facing the annotation UI carry the study group; the group
only exists in the manifest and in the exported dataset.
"""

from __future__ import annotations

from pydantic import BaseModel, model_validator


class InitialLine(BaseModel):
    h: float
    alpha: float
    center_x: int


class TaskPayload(BaseModel):
    """What an expert gets to work on next."""

    task_id: str
    image_id: str
    image_url: str
    width: int
    height: int
    initial: InitialLine
    # the line evaluated at the left and right image edge: [[0, y0], [width-1, y1]]
    endpoints: list[tuple[float, float]]
    completed: int
    total: int


class AnnotationSubmission(BaseModel):
    """Either two edge endpoints (the UI's anchors) or direct (h, alpha)."""

    task_id: str
    expert_id: str
    endpoints: list[tuple[float, float]] | None = None
    h: float | None = None
    alpha: float | None = None

    @model_validator(mode="after")
    def _one_form(self) -> "AnnotationSubmission":
        has_params = self.h is not None or self.alpha is not None
        if self.endpoints is not None:
            if has_params:
                raise ValueError("give endpoints or (h, alpha), not both")
            if len(self.endpoints) != 2:
                raise ValueError(f"need exactly 2 endpoints, got {len(self.endpoints)}")
        else:
            if self.h is None or self.alpha is None:
                raise ValueError("need either endpoints or both h and alpha")
        return self


class StoredAnnotation(BaseModel):
    """Acknowledgment after a durable write; group deliberately absent."""

    task_id: str
    image_id: str
    expert_id: str
    h: float
    alpha: float
    center_x: int
    modified: bool
    timestamp: float


class ProgressPayload(BaseModel):
    expert_id: str
    completed: int
    total: int
    remaining: int


class DetectRequest(BaseModel):
    """Run-length encoded mask, background first."""

    width: int
    height: int
    rle: list[int]
    center_x: int | None = None


class DetectResponse(BaseModel):
    h: float
    alpha: float
    center_x: int
    config_hash: str
