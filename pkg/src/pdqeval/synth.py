"""Seeded synthetic fixtures: rectangle ground truths plus noisy detections.

The generator is fully reproducible: it uses numpy's PCG64 generator with a
``SeedSequence`` spawned into one independent stream per frame, so outputs
are byte-identical for a given (spec, seed) on every platform and thread
count.

The all-zero noise profile produces a perfect oracle - one-hot correct
labels, crisp boxes equal to the ground-truth boxes - which must evaluate
to PDQ = 1.0 exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ValidationError
from .io import write_detections, write_ground_truth
from .model import BBox, Detection, Frame, GroundTruthObject, LabelDist, PBox, SegMask

_PROFILE_FIELDS = (
    "sigma_loc",
    "label_confusion",
    "spurious_rate",
    "miss_rate",
    "box_expand",
    "score_jitter",
)


@dataclass(frozen=True)
class NoiseProfile:
    """Detection corruption knobs; all zero means a perfect oracle.

    sigma_loc       Gaussian jitter (pixels) added to every box coordinate.
    label_confusion probability a detection's argmax moves to a wrong class.
    spurious_rate   expected extra low-score detections per ground truth.
    miss_rate       probability a ground truth gets no detection at all.
    box_expand      symmetric padding of detection boxes as a fraction of
                    box size (models detectors that box loosely).
    score_jitter    top-class score drawn from (1 - score_jitter, 1.0]
                    instead of exactly 1.
    """

    sigma_loc: float = 0.0
    label_confusion: float = 0.0
    spurious_rate: float = 0.0
    miss_rate: float = 0.0
    box_expand: float = 0.0
    score_jitter: float = 0.0

    def __post_init__(self):
        for name in ("label_confusion", "spurious_rate", "miss_rate", "score_jitter"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")
        if self.sigma_loc < 0.0 or self.box_expand < 0.0:
            raise ValidationError("sigma_loc and box_expand must be non-negative")
        if self.score_jitter > 0.5:
            raise ValidationError("score_jitter above 0.5 would break the argmax convention")

    @classmethod
    def from_mapping(cls, data: Mapping) -> "NoiseProfile":
        unknown = set(data) - set(_PROFILE_FIELDS)
        if unknown:
            raise ValidationError(f"unknown noise profile key(s): {', '.join(sorted(unknown))}")
        return cls(**{k: float(v) for k, v in data.items()})


@dataclass(frozen=True)
class SynthSpec:
    frames: int = 100
    max_objects: int = 10
    width: int = 640
    height: int = 480
    num_classes: int = 30
    seed: int = 0
    noise: NoiseProfile = field(default_factory=NoiseProfile)

    def __post_init__(self):
        if self.frames < 1:
            raise ValidationError("need at least one frame")
        if self.max_objects < 1 or self.num_classes < 2:
            raise ValidationError("need at least one object per frame and two classes")
        if self.width < 32 or self.height < 32:
            raise ValidationError("frame must be at least 32x32")


def class_names(num_classes: int) -> list[str]:
    return [f"class_{i:02d}" for i in range(num_classes)]


def _random_lattice_box(rng: np.random.Generator, w: int, h: int) -> BBox:
    # Inclusive lattice rectangle, at least 8x8, at most about a third of the frame.
    bw = int(rng.integers(8, max(9, w // 3) + 1))
    bh = int(rng.integers(8, max(9, h // 3) + 1))
    x0 = int(rng.integers(0, w - bw + 1))
    y0 = int(rng.integers(0, h - bh + 1))
    return BBox(float(x0), float(y0), float(x0 + bw - 1), float(y0 + bh - 1))


def _label_dist(
    rng: np.random.Generator, true_class: int, num_classes: int, noise: NoiseProfile
) -> LabelDist:
    score = 1.0 - (rng.uniform(0.0, noise.score_jitter) if noise.score_jitter > 0.0 else 0.0)
    top = true_class
    if noise.label_confusion > 0.0 and rng.random() < noise.label_confusion:
        top = int(rng.integers(0, num_classes - 1))
        if top >= true_class:
            top += 1
    probs = np.zeros(num_classes)
    probs[top] = score
    if top != true_class:
        probs[true_class] = (1.0 - score) * 0.8
    return LabelDist(probs)


def _noisy_box(rng: np.random.Generator, box: BBox, spec: SynthSpec) -> BBox:
    noise = spec.noise
    x1, y1, x2, y2 = box.as_tuple()
    if noise.box_expand > 0.0:
        dx = box.width * noise.box_expand / 2.0
        dy = box.height * noise.box_expand / 2.0
        x1, y1, x2, y2 = x1 - dx, y1 - dy, x2 + dx, y2 + dy
    if noise.sigma_loc > 0.0:
        jit = rng.normal(0.0, noise.sigma_loc, size=4)
        x1, y1, x2, y2 = x1 + jit[0], y1 + jit[1], x2 + jit[2], y2 + jit[3]
        if x1 > x2:
            x1, x2 = x2, x1
        if y1 > y2:
            y1, y2 = y2, y1
    x1 = min(max(x1, 0.0), float(spec.width))
    x2 = min(max(x2, 0.0), float(spec.width))
    y1 = min(max(y1, 0.0), float(spec.height))
    y2 = min(max(y2, 0.0), float(spec.height))
    return BBox(x1, y1, x2, y2)


def _spurious_detection(rng: np.random.Generator, spec: SynthSpec, frame_id: str) -> Detection:
    box = _random_lattice_box(rng, spec.width, spec.height)
    cls = int(rng.integers(0, spec.num_classes))
    probs = np.zeros(spec.num_classes)
    probs[cls] = rng.uniform(0.05, 0.45)
    return Detection(LabelDist(probs), PBox.crisp(box), frame_id)


def _generate_frame(rng: np.random.Generator, spec: SynthSpec, frame_id: str) -> Frame:
    noise = spec.noise
    n_obj = int(rng.integers(1, spec.max_objects + 1))
    gts = []
    for _ in range(n_obj):
        box = _random_lattice_box(rng, spec.width, spec.height)
        mask = SegMask.box_fill(spec.width, spec.height, box)
        cls = int(rng.integers(0, spec.num_classes))
        gts.append(GroundTruthObject(cls, box, mask, frame_id))
    dets = []
    for gt in gts:
        if noise.miss_rate > 0.0 and rng.random() < noise.miss_rate:
            continue
        box = _noisy_box(rng, gt.box, spec)
        dist = _label_dist(rng, gt.class_id, spec.num_classes, noise)
        dets.append(Detection(dist, PBox.crisp(box), frame_id))
    if noise.spurious_rate > 0.0:
        for _ in range(int(rng.binomial(n_obj, noise.spurious_rate))):
            dets.append(_spurious_detection(rng, spec, frame_id))
    return Frame(frame_id, spec.width, spec.height, tuple(gts), tuple(dets))


def generate(spec: SynthSpec) -> list[Frame]:
    """Generate frames carrying both ground truths and raw detections."""
    streams = np.random.SeedSequence(spec.seed).spawn(spec.frames)
    return [
        _generate_frame(np.random.Generator(np.random.PCG64(ss)), spec, f"{i:06d}")
        for i, ss in enumerate(streams)
    ]


def write_dataset(spec: SynthSpec, gt_path, det_path) -> None:
    """Generate and write the ground-truth and detection files."""
    frames = generate(spec)
    write_ground_truth(frames, gt_path, class_names=class_names(spec.num_classes))
    write_detections(((f.frame_id, f.detections) for f in frames), det_path)
