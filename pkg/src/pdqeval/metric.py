"""Pairwise qualities, per-frame optimal matching, and global aggregation.

Spatial quality of a (detection, ground truth) pair is an exponentiated
negative log-loss over the detection's probability map: foreground pixels
(the ground-truth mask) are scored with log p, background pixels (support
pixels strictly outside the ground-truth box) with log(1 - p), both
normalized by the foreground pixel count:

    fg_loss = -(1/|S|) * sum_{S} log max(p, eps)
    bg_loss = -(1/|S|) * sum_{B} log1p(-min(p, 1-eps))
    Q_S     = exp(-(fg_loss + bg_loss))

The clamp is one-sided per term (eps = 1e-14): a zero-probability
foreground pixel costs log eps instead of an infinity, while exact hits
(p = 1 on foreground, p = 0 on background) cost exactly zero so a perfect
detection scores exactly 1.0. Pixels outside the map's support count as
p = 0.

Label quality is the probability mass the detection assigns to the
ground-truth class; the pairwise score is the geometric mean of the two.
Frames are matched by maximum-total-pPDQ linear assignment, zero-quality
pairs are demoted to FP + FN, and the dataset score is

    PDQ = N_tp * aPDQ / (N_fp + N_fn + N_tp)

with aPDQ the mean pPDQ over true positives.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ValidationError
from .heatmap import DEFAULT_K_SIGMA, ProbMap, render
from .model import Detection, Frame, GroundTruthObject

PROB_EPS = 1e-14
_LOG_EPS = math.log(PROB_EPS)


@dataclass(frozen=True)
class PairQuality:
    """Spatial/label/pairwise quality for one detection-gt pair."""

    spatial: float
    label: float
    ppdq: float
    fg_loss: float
    bg_loss: float

    def __post_init__(self):
        if abs(self.ppdq - math.sqrt(self.spatial * self.label)) > 1e-12:
            raise ValidationError(
                f"ppdq {self.ppdq} inconsistent with sqrt({self.spatial} * {self.label})"
            )


@dataclass(frozen=True)
class Assignment:
    det_index: int
    gt_index: int
    quality: PairQuality


@dataclass(frozen=True)
class FrameEvaluation:
    """Matching outcome for one frame; every assigned pair has ppdq > 0."""

    frame_id: str
    assignments: tuple[Assignment, ...]
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class FrameSummary:
    frame_id: str
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class PdqReport:
    """Dataset-level scores; averages are over true positives only."""

    pdq: float
    apdq: float
    avg_spatial: float
    avg_label: float
    n_tp: int
    n_fp: int
    n_fn: int
    per_frame: tuple[FrameSummary, ...] = ()


def label_quality(d: Detection, class_id: int) -> float:
    """Probability mass the detection assigns to ``class_id``."""
    if class_id < 0 or class_id >= len(d.label_dist):
        raise ValidationError(
            f"class index {class_id} out of range for {len(d.label_dist)} classes"
        )
    return d.label_dist[class_id]


def pairwise_pdq(spatial: float, label: float) -> float:
    """Geometric mean of spatial and label quality."""
    return math.sqrt(spatial) * math.sqrt(label)


def _bg_log_terms(pm: ProbMap) -> np.ndarray:
    """log(1 - p) per support pixel, with p capped at 1 - eps."""
    return np.log1p(-np.minimum(pm.values, 1.0 - PROB_EPS))


def _box_lattice_rect(gt: GroundTruthObject, pm: ProbMap) -> tuple[int, int, int, int] | None:
    """Lattice rectangle of support pixels inside the closed gt box, or None."""
    bx0 = max(math.ceil(gt.box.x1), pm.x0)
    by0 = max(math.ceil(gt.box.y1), pm.y0)
    bx1 = min(math.floor(gt.box.x2), pm.x1)
    by1 = min(math.floor(gt.box.y2), pm.y1)
    if bx0 > bx1 or by0 > by1:
        return None
    return (bx0, by0, bx1, by1)


def _fg_log_sum(pm: ProbMap, xs: np.ndarray, ys: np.ndarray) -> float:
    inside = (xs >= pm.x0) & (xs <= pm.x1) & (ys >= pm.y0) & (ys <= pm.y1)
    n_out = int(xs.size - np.count_nonzero(inside))
    total = n_out * _LOG_EPS
    if n_out < xs.size:
        p = pm.values[ys[inside] - pm.y0, xs[inside] - pm.x0]
        total += float(np.log(np.maximum(p, PROB_EPS)).sum())
    return total


def _spatial_from_parts(
    pm: ProbMap,
    bg_terms: np.ndarray,
    bg_total: float,
    gt: GroundTruthObject,
    xs: np.ndarray,
    ys: np.ndarray,
) -> tuple[float, float, float]:
    n_fg = xs.size
    fg_loss = -_fg_log_sum(pm, xs, ys) / n_fg
    rect = _box_lattice_rect(gt, pm)
    if rect is None:
        box_sum = 0.0
    else:
        bx0, by0, bx1, by1 = rect
        box_sum = float(
            bg_terms[by0 - pm.y0 : by1 - pm.y0 + 1, bx0 - pm.x0 : bx1 - pm.x0 + 1].sum()
        )
    bg_loss = -(bg_total - box_sum) / n_fg
    return math.exp(-(fg_loss + bg_loss)), fg_loss, bg_loss


def spatial_quality(pm: ProbMap, gt: GroundTruthObject) -> tuple[float, float, float]:
    """(Q_S, fg_loss, bg_loss) of a probability map against one ground truth.

    The map must have been rendered for the same frame as ``gt``.
    """
    xs, ys = gt.mask.foreground_arrays()
    if xs.size == 0:
        raise ValidationError("ground-truth mask has no foreground pixels")
    bg_terms = _bg_log_terms(pm)
    return _spatial_from_parts(pm, bg_terms, float(bg_terms.sum()), gt, xs, ys)


def pair_quality(d: Detection, gt: GroundTruthObject, pm: ProbMap) -> PairQuality:
    """Assemble the full PairQuality for one detection against one object."""
    qs, fg_loss, bg_loss = spatial_quality(pm, gt)
    ql = label_quality(d, gt.class_id)
    return PairQuality(qs, ql, pairwise_pdq(qs, ql), fg_loss, bg_loss)


def _pair_matrix(frame: Frame, k_sigma: float) -> list[list[PairQuality]]:
    """All pairwise qualities, detections as rows, ground truths as columns."""
    gt_parts = []
    for gt in frame.ground_truths:
        xs, ys = gt.mask.foreground_arrays()
        if xs.size == 0:
            raise ValidationError(f"empty ground-truth mask in frame {frame.frame_id!r}")
        gt_parts.append((gt, xs, ys))
    rows = []
    for det in frame.detections:
        pm = render(det.pbox, frame.width, frame.height, k_sigma)
        bg_terms = _bg_log_terms(pm)
        bg_total = float(bg_terms.sum())
        row = []
        for gt, xs, ys in gt_parts:
            qs, fg_loss, bg_loss = _spatial_from_parts(pm, bg_terms, bg_total, gt, xs, ys)
            ql = label_quality(det, gt.class_id)
            row.append(PairQuality(qs, ql, pairwise_pdq(qs, ql), fg_loss, bg_loss))
        rows.append(row)
    return rows


def match_frame(frame: Frame, k_sigma: float = DEFAULT_K_SIGMA) -> FrameEvaluation:
    """Optimal one-to-one matching maximizing total pPDQ.

    Pairs matched at zero quality are demoted afterwards: their detections
    count as false positives and their objects as false negatives.
    """
    n_det = len(frame.detections)
    n_gt = len(frame.ground_truths)
    assignments: list[Assignment] = []
    if n_det > 0 and n_gt > 0:
        qualities = _pair_matrix(frame, k_sigma)
        scores = np.array([[q.ppdq for q in row] for row in qualities])
        det_idx, gt_idx = linear_sum_assignment(scores, maximize=True)
        for d, g in zip(det_idx.tolist(), gt_idx.tolist()):
            q = qualities[d][g]
            if q.ppdq > 0.0:
                assignments.append(Assignment(d, g, q))
    tp = len(assignments)
    return FrameEvaluation(frame.frame_id, tuple(assignments), tp, n_det - tp, n_gt - tp)


def evaluate_frames(
    frames: Sequence[Frame], k_sigma: float = DEFAULT_K_SIGMA, threads: int = 1
) -> list[FrameEvaluation]:
    """Match every frame, optionally in parallel.

    Frames are independent and results keep input order, so the thread count
    never changes any reported number.
    """
    if threads > 1 and len(frames) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda f: match_frame(f, k_sigma), frames))
    return [match_frame(f, k_sigma) for f in frames]


def aggregate(evals: Iterable[FrameEvaluation]) -> PdqReport:
    """Combine per-frame evaluations into the dataset report.

    Sums use math.fsum, which is exactly rounded and therefore independent
    of frame order and thread count.
    """
    evals = list(evals)
    n_tp = sum(e.tp for e in evals)
    n_fp = sum(e.fp for e in evals)
    n_fn = sum(e.fn for e in evals)
    ppdqs = [a.quality.ppdq for e in evals for a in e.assignments]
    spatials = [a.quality.spatial for e in evals for a in e.assignments]
    labels = [a.quality.label for e in evals for a in e.assignments]
    apdq = math.fsum(ppdqs) / n_tp if n_tp else 0.0
    avg_spatial = math.fsum(spatials) / n_tp if n_tp else 0.0
    avg_label = math.fsum(labels) / n_tp if n_tp else 0.0
    total = n_tp + n_fp + n_fn
    pdq = (n_tp * apdq) / total if total else 0.0
    per_frame = tuple(FrameSummary(e.frame_id, e.tp, e.fp, e.fn) for e in evals)
    return PdqReport(pdq, apdq, avg_spatial, avg_label, n_tp, n_fp, n_fn, per_frame)


def evaluate(
    frames: Sequence[Frame], k_sigma: float = DEFAULT_K_SIGMA, threads: int = 1
) -> PdqReport:
    """Full evaluation: match all frames and aggregate."""
    return aggregate(evaluate_frames(frames, k_sigma, threads))
