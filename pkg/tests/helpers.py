"""Shared fixture builders for the test suite."""

from __future__ import annotations

import numpy as np

from pdqeval.model import (
    BBox,
    Cov2,
    Detection,
    Frame,
    GroundTruthObject,
    LabelDist,
    PBox,
    SegMask,
)


def dist(values) -> LabelDist:
    return LabelDist(values)


def one_hot(class_id: int, num_classes: int) -> LabelDist:
    return LabelDist.one_hot(class_id, num_classes)


def det(box, label_dist, frame_id="f0", cov=None) -> Detection:
    b = BBox(*box)
    if cov is None:
        pbox = PBox.crisp(b)
    else:
        c = Cov2.diagonal(cov, cov) if np.isscalar(cov) else Cov2.from_rows(cov)
        pbox = PBox(b, c, c)
    return Detection(label_dist, pbox, frame_id)


def gt_rect(box, class_id, frame_w, frame_h, frame_id="f0") -> GroundTruthObject:
    b = BBox(*box)
    return GroundTruthObject(class_id, b, SegMask.box_fill(frame_w, frame_h, b), frame_id)


def frame_of(gts=(), dets=(), frame_w=64, frame_h=48, frame_id="f0") -> Frame:
    return Frame(frame_id, frame_w, frame_h, tuple(gts), tuple(dets))


def confusing_pair_frames(seed: int, n_frames: int = 15) -> list[Frame]:
    """Frames where about half the objects are covered only by a pair of
    low-score detections that overlap each other but disagree on class -
    the situation the recovery heuristic bets on."""
    rng = np.random.default_rng(seed)
    frames = []
    w = h = 160
    num_classes = 6
    for i in range(n_frames):
        fid = f"f{i:03d}"
        gts, dets = [], []
        for _ in range(int(rng.integers(2, 5))):
            bw, bh = int(rng.integers(20, 50)), int(rng.integers(20, 50))
            x0 = int(rng.integers(0, w - bw))
            y0 = int(rng.integers(0, h - bh))
            box = BBox(float(x0), float(y0), float(x0 + bw - 1), float(y0 + bh - 1))
            cls = int(rng.integers(0, num_classes))
            gts.append(GroundTruthObject(cls, box, SegMask.box_fill(w, h, box), fid))
            if rng.random() < 0.5:
                probs = np.zeros(num_classes)
                probs[cls] = rng.uniform(0.6, 0.95)
                dets.append(Detection(LabelDist(probs), PBox.crisp(box), fid))
            else:
                wrong = (cls + 1) % num_classes
                jit = rng.normal(0.0, 1.0, 4)
                twin = BBox(min(box.x1 + jit[0], box.x2), min(box.y1 + jit[1], box.y2),
                            max(box.x2 + jit[2], box.x1), max(box.y2 + jit[3], box.y1))
                p1 = np.zeros(num_classes)
                p1[cls] = rng.uniform(0.15, 0.45)
                p2 = np.zeros(num_classes)
                p2[wrong] = rng.uniform(0.15, 0.45)
                dets.append(Detection(LabelDist(p1), PBox.crisp(box), fid))
                dets.append(Detection(LabelDist(p2), PBox.crisp(twin), fid))
        frames.append(Frame(fid, w, h, tuple(gts), tuple(dets)))
    return frames


def random_match_frame(rng: np.random.Generator, num_classes: int = 5) -> Frame:
    """Small frame with up to 6 detections and 6 ground truths.

    Detections mix perturbed copies of ground-truth boxes with unrelated
    boxes, sparse label distributions, and a covariance about half the
    time, so pairwise quality matrices cover zeros, near-ties, and clear
    winners.
    """
    w, h = 96, 64
    n_gt = int(rng.integers(0, 7))
    n_det = int(rng.integers(0, 7))

    def lattice_box():
        bw = int(rng.integers(4, 28))
        bh = int(rng.integers(4, 20))
        x0 = int(rng.integers(0, w - bw))
        y0 = int(rng.integers(0, h - bh))
        return BBox(float(x0), float(y0), float(x0 + bw), float(y0 + bh))

    gts = []
    for _ in range(n_gt):
        b = lattice_box()
        gts.append(GroundTruthObject(
            int(rng.integers(0, num_classes)), b, SegMask.box_fill(w, h, b), "f0"))
    dets = []
    for _ in range(n_det):
        if gts and rng.random() < 0.6:
            src = gts[int(rng.integers(0, len(gts)))].box
            jit = rng.normal(0.0, 3.0, size=4)
            x1 = min(max(src.x1 + jit[0], 0.0), float(w))
            y1 = min(max(src.y1 + jit[1], 0.0), float(h))
            x2 = min(max(src.x2 + jit[2], 0.0), float(w))
            y2 = min(max(src.y2 + jit[3], 0.0), float(h))
            b = BBox(min(x1, x2), min(y1, y2), max(x1, x2), max(y1, y2))
        else:
            b = lattice_box()
        probs = np.zeros(num_classes)
        top = int(rng.integers(0, num_classes))
        score = float(rng.uniform(0.2, 1.0))
        probs[top] = score
        other = int(rng.integers(0, num_classes))
        if other != top:
            probs[other] = min(float(rng.uniform(0.0, 0.5)), 1.0 - score)
        if rng.random() < 0.5:
            c = Cov2.diagonal(float(rng.uniform(0.0, 25.0)), float(rng.uniform(0.0, 25.0)))
            pbox = PBox(b, c, c)
        else:
            pbox = PBox.crisp(b)
        dets.append(Detection(LabelDist(probs), pbox, "f0"))
    return Frame("f0", w, h, tuple(gts), tuple(dets))
