"""HTTP service exposing the evaluation engine over flat-array JSON.

Endpoints:

- ``GET /version`` - engine name and version.
- ``POST /evaluate`` - flat frame batch in, dataset report out.
- ``POST /postprocess`` - batch plus config in, transformed batch out.

Request/response models mirror :mod:`pdqeval.batch`; payload floats travel
as JSON numbers, which round-trip IEEE doubles exactly. Handlers are plain
blocking functions (FastAPI runs them on a thread pool) and the engine
itself is pure, so concurrent requests are safe.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .batch import FlatFrameBatch, evaluate_batch, postprocess_batch
from .errors import ValidationError


class FlatBatchModel(BaseModel):
    """Wire form of a flat frame batch; see pdqeval.batch for the layout."""

    num_classes: int
    frame_widths: list[int]
    frame_heights: list[int]
    frame_ids: list[str] | None = None
    det_frame: list[int] = Field(default_factory=list)
    det_label_probs: list[float] = Field(default_factory=list)
    det_boxes: list[float] = Field(default_factory=list)
    det_covars: list[float] | None = None
    gt_frame: list[int] = Field(default_factory=list)
    gt_classes: list[int] = Field(default_factory=list)
    gt_boxes: list[float] | None = None
    gt_rle_runs: list[int] = Field(default_factory=list)
    gt_rle_offsets: list[int] | None = None

    def to_batch(self) -> FlatFrameBatch:
        return FlatFrameBatch(
            num_classes=self.num_classes,
            frame_widths=self.frame_widths,
            frame_heights=self.frame_heights,
            det_frame=self.det_frame,
            det_label_probs=self.det_label_probs,
            det_boxes=self.det_boxes,
            det_covars=self.det_covars,
            gt_frame=self.gt_frame,
            gt_classes=self.gt_classes,
            gt_boxes=self.gt_boxes,
            gt_rle_runs=self.gt_rle_runs,
            gt_rle_offsets=self.gt_rle_offsets,
            frame_ids=tuple(self.frame_ids) if self.frame_ids is not None else None,
        )

    @classmethod
    def from_batch(cls, batch: FlatFrameBatch) -> "FlatBatchModel":
        return cls(
            num_classes=batch.num_classes,
            frame_widths=batch.frame_widths.tolist(),
            frame_heights=batch.frame_heights.tolist(),
            frame_ids=list(batch.frame_ids) if batch.frame_ids is not None else None,
            det_frame=batch.det_frame.tolist(),
            det_label_probs=batch.det_label_probs.tolist(),
            det_boxes=batch.det_boxes.tolist(),
            det_covars=batch.det_covars.tolist() if batch.det_covars is not None else None,
            gt_frame=batch.gt_frame.tolist(),
            gt_classes=batch.gt_classes.tolist(),
            gt_boxes=batch.gt_boxes.tolist() if batch.gt_boxes is not None else None,
            gt_rle_runs=batch.gt_rle_runs.tolist(),
            gt_rle_offsets=batch.gt_rle_offsets.tolist(),
        )


class EvaluateResponse(BaseModel):
    pdq: float
    apdq: float
    avg_spatial: float
    avg_label: float
    tp: int
    fp: int
    fn: int


class PostprocessRequest(BaseModel):
    batch: FlatBatchModel
    config: dict = Field(default_factory=dict)


class VersionResponse(BaseModel):
    name: str
    version: str


app = FastAPI(title="pdqeval", version=__version__)


@app.exception_handler(ValidationError)
def _validation_error(request: Request, exc: ValidationError) -> JSONResponse:
    return JSONResponse(status_code=422, content={"detail": str(exc), "path": exc.path})


@app.get("/version", response_model=VersionResponse)
def version() -> VersionResponse:
    return VersionResponse(name="pdqeval", version=__version__)


@app.post("/evaluate", response_model=EvaluateResponse)
def evaluate_endpoint(batch: FlatBatchModel) -> EvaluateResponse:
    return EvaluateResponse(**evaluate_batch(batch.to_batch()))


@app.post("/postprocess", response_model=FlatBatchModel)
def postprocess_endpoint(req: PostprocessRequest) -> FlatBatchModel:
    return FlatBatchModel.from_batch(postprocess_batch(req.batch.to_batch(), req.config))
