"""Flat-array batch interface: evaluate and post-process in-memory data.

This is the copy-friendly boundary used by the HTTP service and any client
that wants to avoid file round-trips. Everything is parallel flat arrays:

- per frame: width, height (and optional string ids; defaults to "0",
  "1", ...);
- per detection: owning frame index, C label probabilities, 4 box
  coordinates, and optionally 8 covariance entries (top-left row-major 2x2,
  then bottom-right);
- per ground truth: owning frame index, class id, optional 4 box
  coordinates (derived from the mask when omitted), and RLE runs stored
  concatenated with CSR-style offsets.

Results are numerically identical to running the CLI on equivalent files:
both paths reassemble the same domain objects and call the same engine.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .metric import evaluate
from .model import BBox, Cov2, Detection, Frame, GroundTruthObject, LabelDist, PBox, SegMask
from .postprocess import PostProcessConfig, run_pipeline


def _int_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int64)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be a flat array")
    return arr


def _float_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be a flat array")
    return arr


@dataclass(frozen=True)
class FlatFrameBatch:
    """Parallel flat arrays describing detections and ground truth."""

    num_classes: int
    frame_widths: np.ndarray
    frame_heights: np.ndarray
    det_frame: np.ndarray
    det_label_probs: np.ndarray
    det_boxes: np.ndarray
    det_covars: np.ndarray | None = None
    gt_frame: np.ndarray = None  # type: ignore[assignment]
    gt_classes: np.ndarray = None  # type: ignore[assignment]
    gt_boxes: np.ndarray | None = None
    gt_rle_runs: np.ndarray = None  # type: ignore[assignment]
    gt_rle_offsets: np.ndarray = None  # type: ignore[assignment]
    frame_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "frame_widths", _int_array(self.frame_widths, "frame_widths"))
        object.__setattr__(self, "frame_heights", _int_array(self.frame_heights, "frame_heights"))
        object.__setattr__(self, "det_frame", _int_array(self.det_frame, "det_frame"))
        object.__setattr__(self, "det_label_probs",
                           _float_array(self.det_label_probs, "det_label_probs"))
        object.__setattr__(self, "det_boxes", _float_array(self.det_boxes, "det_boxes"))
        if self.det_covars is not None:
            object.__setattr__(self, "det_covars", _float_array(self.det_covars, "det_covars"))
        object.__setattr__(self, "gt_frame",
                           _int_array([] if self.gt_frame is None else self.gt_frame, "gt_frame"))
        object.__setattr__(self, "gt_classes",
                           _int_array([] if self.gt_classes is None else self.gt_classes, "gt_classes"))
        if self.gt_boxes is not None:
            object.__setattr__(self, "gt_boxes", _float_array(self.gt_boxes, "gt_boxes"))
        object.__setattr__(self, "gt_rle_runs",
                           _int_array([] if self.gt_rle_runs is None else self.gt_rle_runs, "gt_rle_runs"))
        offsets = [0] if self.gt_rle_offsets is None else self.gt_rle_offsets
        object.__setattr__(self, "gt_rle_offsets", _int_array(offsets, "gt_rle_offsets"))
        if self.frame_ids is not None:
            object.__setattr__(self, "frame_ids", tuple(str(v) for v in self.frame_ids))
        self._validate()

    @property
    def num_frames(self) -> int:
        return int(self.frame_widths.size)

    @property
    def num_detections(self) -> int:
        return int(self.det_frame.size)

    @property
    def num_ground_truths(self) -> int:
        return int(self.gt_frame.size)

    def _validate(self) -> None:
        if self.num_classes < 1:
            raise ValidationError("num_classes must be at least 1")
        if self.frame_heights.size != self.num_frames:
            raise ValidationError("frame_widths and frame_heights lengths differ")
        if self.frame_ids is not None and len(self.frame_ids) != self.num_frames:
            raise ValidationError("frame_ids length differs from frame count")
        n, g = self.num_detections, self.num_ground_truths
        if self.det_label_probs.size != n * self.num_classes:
            raise ValidationError(
                f"det_label_probs has {self.det_label_probs.size} entries, "
                f"expected {n} x {self.num_classes}")
        if self.det_boxes.size != n * 4:
            raise ValidationError(f"det_boxes has {self.det_boxes.size} entries, expected {n} x 4")
        if self.det_covars is not None and self.det_covars.size != n * 8:
            raise ValidationError(f"det_covars has {self.det_covars.size} entries, expected {n} x 8")
        if self.gt_classes.size != g:
            raise ValidationError("gt_frame and gt_classes lengths differ")
        if self.gt_boxes is not None and self.gt_boxes.size != g * 4:
            raise ValidationError(f"gt_boxes has {self.gt_boxes.size} entries, expected {g} x 4")
        if self.gt_rle_offsets.size != g + 1:
            raise ValidationError(f"gt_rle_offsets needs {g + 1} entries, got {self.gt_rle_offsets.size}")
        if self.gt_rle_offsets[0] != 0 or self.gt_rle_offsets[-1] != self.gt_rle_runs.size:
            raise ValidationError("gt_rle_offsets must start at 0 and end at len(gt_rle_runs)")
        if np.any(np.diff(self.gt_rle_offsets) < 0):
            raise ValidationError("gt_rle_offsets must be non-decreasing")
        for name, idx in (("det_frame", self.det_frame), ("gt_frame", self.gt_frame)):
            if idx.size and (idx.min() < 0 or idx.max() >= self.num_frames):
                raise ValidationError(f"{name} index out of range for {self.num_frames} frames")

    def frame_id(self, index: int) -> str:
        if self.frame_ids is not None:
            return self.frame_ids[index]
        return str(index)


def batch_to_frames(batch: FlatFrameBatch) -> list[Frame]:
    """Reassemble domain Frames; raises ValidationError on inconsistencies."""
    C = batch.num_classes
    dets_per_frame: list[list[Detection]] = [[] for _ in range(batch.num_frames)]
    for i in range(batch.num_detections):
        f = int(batch.det_frame[i])
        fid = batch.frame_id(f)
        dist = LabelDist(batch.det_label_probs[i * C : (i + 1) * C])
        bb = batch.det_boxes[i * 4 : (i + 1) * 4]
        box = BBox(float(bb[0]), float(bb[1]), float(bb[2]), float(bb[3]))
        if batch.det_covars is None:
            cov_tl, cov_br = Cov2.zero(), Cov2.zero()
        else:
            cv = batch.det_covars[i * 8 : (i + 1) * 8]
            cov_tl = Cov2(float(cv[0]), float(cv[1]), float(cv[2]), float(cv[3]))
            cov_br = Cov2(float(cv[4]), float(cv[5]), float(cv[6]), float(cv[7]))
        dets_per_frame[f].append(Detection(dist, PBox(box, cov_tl, cov_br), fid))
    gts_per_frame: list[list[GroundTruthObject]] = [[] for _ in range(batch.num_frames)]
    for j in range(batch.num_ground_truths):
        f = int(batch.gt_frame[j])
        fid = batch.frame_id(f)
        cls = int(batch.gt_classes[j])
        if cls < 0 or cls >= C:
            raise ValidationError(f"gt_classes[{j}] = {cls} out of range for {C} classes")
        runs = batch.gt_rle_runs[int(batch.gt_rle_offsets[j]) : int(batch.gt_rle_offsets[j + 1])]
        mask = SegMask(int(batch.frame_widths[f]), int(batch.frame_heights[f]), runs)
        if batch.gt_boxes is None:
            gt = GroundTruthObject.from_mask(cls, mask, fid)
        else:
            bb = batch.gt_boxes[j * 4 : (j + 1) * 4]
            gt = GroundTruthObject(
                cls, BBox(float(bb[0]), float(bb[1]), float(bb[2]), float(bb[3])), mask, fid)
        gts_per_frame[f].append(gt)
    return [
        Frame(batch.frame_id(f), int(batch.frame_widths[f]), int(batch.frame_heights[f]),
              tuple(gts_per_frame[f]), tuple(dets_per_frame[f]))
        for f in range(batch.num_frames)
    ]


def frames_to_batch(frames: Sequence[Frame], num_classes: int | None = None) -> FlatFrameBatch:
    """Flatten domain Frames back into parallel arrays (frame order kept)."""
    if num_classes is None:
        for f in frames:
            if f.detections:
                num_classes = len(f.detections[0].label_dist)
                break
        if num_classes is None:
            raise ValidationError("num_classes is required when there are no detections")
    det_frame, det_probs, det_boxes, det_covars = [], [], [], []
    gt_frame, gt_classes, gt_boxes, runs, offsets = [], [], [], [], [0]
    for fi, f in enumerate(frames):
        for d in f.detections:
            det_frame.append(fi)
            det_probs.extend(float(p) for p in d.label_dist.probs)
            det_boxes.extend(d.box.as_tuple())
            det_covars.extend((d.pbox.cov_tl.xx, d.pbox.cov_tl.xy, d.pbox.cov_tl.yx,
                               d.pbox.cov_tl.yy, d.pbox.cov_br.xx, d.pbox.cov_br.xy,
                               d.pbox.cov_br.yx, d.pbox.cov_br.yy))
        for g in f.ground_truths:
            gt_frame.append(fi)
            gt_classes.append(g.class_id)
            gt_boxes.extend(g.box.as_tuple())
            runs.extend(g.mask.runs.tolist())
            offsets.append(len(runs))
    return FlatFrameBatch(
        num_classes=num_classes,
        frame_widths=[f.width for f in frames],
        frame_heights=[f.height for f in frames],
        det_frame=det_frame,
        det_label_probs=det_probs,
        det_boxes=det_boxes,
        det_covars=det_covars,
        gt_frame=gt_frame,
        gt_classes=gt_classes,
        gt_boxes=gt_boxes if gt_frame else None,
        gt_rle_runs=runs,
        gt_rle_offsets=offsets,
        frame_ids=tuple(f.frame_id for f in frames),
    )


def evaluate_batch(batch: FlatFrameBatch, threads: int = 1) -> dict:
    """Evaluate an in-memory batch; same numbers as the CLI on equal files."""
    report = evaluate(batch_to_frames(batch), threads=threads)
    return {
        "pdq": report.pdq,
        "apdq": report.apdq,
        "avg_spatial": report.avg_spatial,
        "avg_label": report.avg_label,
        "tp": report.n_tp,
        "fp": report.n_fp,
        "fn": report.n_fn,
    }


def postprocess_batch(
    batch: FlatFrameBatch, config: Mapping | PostProcessConfig | None = None
) -> FlatFrameBatch:
    """Run the post-processing pipeline on a batch, keeping the layout.

    Output detections are grouped by ascending frame index, pipeline order
    within each frame; ground-truth arrays pass through untouched.
    """
    if config is None:
        cfg = PostProcessConfig()
    elif isinstance(config, PostProcessConfig):
        cfg = config
    else:
        cfg = PostProcessConfig.from_mapping(config)
    frames = batch_to_frames(batch)
    processed = [f.with_detections(run_pipeline(f.detections, cfg)) for f in frames]
    out = frames_to_batch(processed, num_classes=batch.num_classes)
    if batch.frame_ids is None:
        out = replace(out, frame_ids=None)
    return out
