"""Core domain types: boxes, covariances, label distributions, masks, frames.

All types are immutable after construction and safe to share across threads.
Pixel coordinates follow the image convention: origin top-left, x right,
y down. A pixel (x, y) denotes the integer lattice point; boxes are
continuous and closed, so a lattice point on the box edge counts as inside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import RleDecodeError, ValidationError


def _check_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValidationError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box with continuous (sub-pixel) corner coordinates."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        _check_finite("bbox coordinate", self.x1, self.y1, self.x2, self.y2)
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise ValidationError(
                f"bbox corners out of order: ({self.x1}, {self.y1}, {self.x2}, {self.y2})"
            )

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)

    def contains_point(self, x: float, y: float) -> bool:
        """Closed-box containment: edge points are inside."""
        return self.x1 <= x <= self.x2 and self.y1 <= y <= self.y2

    def intersects_rect(self, w: float, h: float) -> bool:
        """True when the box overlaps the continuous rectangle [0,w] x [0,h]."""
        return self.x1 <= w and self.x2 >= 0 and self.y1 <= h and self.y2 >= 0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes.

    Returns 0.0 when the union has zero area (two degenerate boxes), so
    identical degenerate points score 0 by convention.
    """
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    inter = max(0.0, iw) * max(0.0, ih)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


@dataclass(frozen=True)
class Cov2:
    """Symmetric positive semi-definite 2x2 covariance, entries in pixels^2."""

    xx: float
    xy: float
    yx: float
    yy: float

    def __post_init__(self):
        _check_finite("covariance entry", self.xx, self.xy, self.yx, self.yy)
        if self.xy != self.yx:
            raise ValidationError(f"covariance not symmetric: xy={self.xy}, yx={self.yx}")
        if self.xx < 0.0 or self.yy < 0.0:
            raise ValidationError(
                f"covariance diagonal must be non-negative: ({self.xx}, {self.yy})"
            )
        det = self.xx * self.yy - self.xy * self.yx
        if det < -1e-9 * max(1.0, abs(self.xx * self.yy)):
            raise ValidationError(f"covariance not positive semi-definite (det={det})")

    @classmethod
    def zero(cls) -> "Cov2":
        return cls(0.0, 0.0, 0.0, 0.0)

    @classmethod
    def diagonal(cls, vx: float, vy: float) -> "Cov2":
        return cls(vx, 0.0, 0.0, vy)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "Cov2":
        if len(rows) != 2 or any(len(r) != 2 for r in rows):
            raise ValidationError("covariance must be a 2x2 matrix")
        return cls(float(rows[0][0]), float(rows[0][1]), float(rows[1][0]), float(rows[1][1]))

    @property
    def is_diagonal(self) -> bool:
        return self.xy == 0.0 and self.yx == 0.0

    def as_rows(self) -> list[list[float]]:
        return [[self.xx, self.xy], [self.yx, self.yy]]


@dataclass(frozen=True)
class PBox:
    """Probabilistic box: a crisp box plus one covariance per corner."""

    box: BBox
    cov_tl: Cov2
    cov_br: Cov2

    @classmethod
    def crisp(cls, box: BBox) -> "PBox":
        return cls(box, Cov2.zero(), Cov2.zero())


class LabelDist:
    """Per-class label probabilities; missing mass is implicit background.

    Entries must lie in [0, 1] and sum to at most 1 (+1e-6 slack). No
    renormalization is performed anywhere: a single entry is read off when
    scoring a pair, so the distribution is stored exactly as supplied.
    """

    __slots__ = ("probs",)

    def __init__(self, probs):
        arr = np.asarray(probs, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValidationError("label distribution must be a non-empty 1-D vector")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("label distribution entries must be finite")
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValidationError("label distribution entries must lie in [0, 1]")
        total = float(arr.sum())
        if total > 1.0 + 1e-6:
            raise ValidationError(f"label distribution sums to {total} > 1")
        arr = arr.copy()
        arr.setflags(write=False)
        self.probs = arr

    @classmethod
    def one_hot(cls, class_id: int, num_classes: int) -> "LabelDist":
        v = np.zeros(num_classes)
        v[class_id] = 1.0
        return cls(v)

    def __len__(self) -> int:
        return int(self.probs.size)

    def __getitem__(self, class_id: int) -> float:
        return float(self.probs[class_id])

    @property
    def score(self) -> float:
        """Largest class probability."""
        return float(self.probs.max())

    @property
    def label(self) -> int:
        """Argmax class; ties broken by lowest class index."""
        return int(self.probs.argmax())

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"LabelDist({self.probs.tolist()!r})"


@dataclass(frozen=True)
class Detection:
    """One probabilistic detection: label distribution + pbox."""

    label_dist: LabelDist
    pbox: PBox
    frame_id: str

    @property
    def score(self) -> float:
        return self.label_dist.score

    @property
    def label(self) -> int:
        return self.label_dist.label

    @property
    def box(self) -> BBox:
        return self.pbox.box


class SegMask:
    """Binary mask as row-major run-length encoding.

    Runs alternate background/foreground and always start with a background
    run (possibly of length 0). Run counts must sum to width*height.
    """

    __slots__ = ("width", "height", "runs")

    def __init__(self, width: int, height: int, runs):
        if width <= 0 or height <= 0:
            raise ValidationError(f"mask dimensions must be positive, got {width}x{height}")
        arr = np.asarray(runs, dtype=np.int64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValidationError("mask runs must be a non-empty 1-D sequence")
        total = width * height
        acc = 0
        for i, r in enumerate(arr):
            if r < 0:
                raise RleDecodeError(f"negative run count {r} at run {i}", run_index=i)
            acc += int(r)
            if acc > total:
                raise RleDecodeError(
                    f"runs exceed {width}x{height}={total} pixels at run {i}", run_index=i
                )
        if acc != total:
            raise RleDecodeError(
                f"runs sum to {acc}, expected {total} ({width}x{height})",
                run_index=int(arr.size - 1),
            )
        arr = arr.copy()
        arr.setflags(write=False)
        self.width = int(width)
        self.height = int(height)
        self.runs = arr

    @classmethod
    def from_bitmap(cls, bitmap) -> "SegMask":
        """Encode a 2-D boolean array (row-major) into RLE."""
        bm = np.asarray(bitmap, dtype=bool)
        if bm.ndim != 2:
            raise ValidationError("bitmap must be 2-D")
        flat = bm.ravel()
        if flat.size == 0:
            raise ValidationError("bitmap must be non-empty")
        changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
        bounds = np.concatenate(([0], changes, [flat.size]))
        runs = np.diff(bounds).tolist()
        if flat[0]:
            runs = [0] + runs
        return cls(bm.shape[1], bm.shape[0], runs)

    @classmethod
    def box_fill(cls, width: int, height: int, box: BBox) -> "SegMask":
        """Rectangle mask: every lattice point inside the closed box."""
        x0 = max(0, math.ceil(box.x1))
        x1 = min(width - 1, math.floor(box.x2))
        y0 = max(0, math.ceil(box.y1))
        y1 = min(height - 1, math.floor(box.y2))
        bm = np.zeros((height, width), dtype=bool)
        if x0 <= x1 and y0 <= y1:
            bm[y0 : y1 + 1, x0 : x1 + 1] = True
        return cls.from_bitmap(bm)

    def to_bitmap(self) -> np.ndarray:
        flat = np.zeros(self.width * self.height, dtype=bool)
        pos = 0
        fg = False
        for r in self.runs:
            if fg:
                flat[pos : pos + r] = True
            pos += int(r)
            fg = not fg
        return flat.reshape(self.height, self.width)

    def foreground_indices(self) -> np.ndarray:
        """Linear (row-major) indices of foreground pixels, ascending."""
        ends = np.cumsum(self.runs)
        starts = ends - self.runs
        pieces = [np.arange(starts[i], ends[i]) for i in range(1, len(self.runs), 2)]
        if not pieces:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(pieces)

    def foreground_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(xs, ys) integer coordinates of foreground pixels, row-major order."""
        idx = self.foreground_indices()
        return idx % self.width, idx // self.width

    @property
    def num_foreground(self) -> int:
        return int(self.runs[1::2].sum())


def mask_foreground_pixels(m: SegMask) -> Iterator[tuple[int, int]]:
    """Yield (x, y) for every foreground pixel in row-major order."""
    xs, ys = m.foreground_arrays()
    for x, y in zip(xs.tolist(), ys.tolist()):
        yield (x, y)


@dataclass(frozen=True)
class GroundTruthObject:
    """Annotated object: class, tight box, segmentation mask."""

    class_id: int
    box: BBox
    mask: SegMask
    frame_id: str

    def __post_init__(self):
        if self.class_id < 0:
            raise ValidationError(f"class_id must be non-negative, got {self.class_id}")
        if self.mask.num_foreground == 0:
            raise ValidationError("ground-truth mask has no foreground pixels")
        xs, ys = self.mask.foreground_arrays()
        # Foreground must sit inside the box up to half-pixel slack.
        if (
            xs.min() < self.box.x1 - 0.5
            or xs.max() > self.box.x2 + 0.5
            or ys.min() < self.box.y1 - 0.5
            or ys.max() > self.box.y2 + 0.5
        ):
            raise ValidationError("mask foreground extends outside the bounding box")

    @classmethod
    def from_mask(cls, class_id: int, mask: SegMask, frame_id: str) -> "GroundTruthObject":
        """Derive the box as the tight axis-aligned hull of the mask."""
        xs, ys = mask.foreground_arrays()
        if xs.size == 0:
            raise ValidationError("cannot derive a box from an empty mask")
        box = BBox(float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max()))
        return cls(class_id, box, mask, frame_id)


@dataclass(frozen=True)
class Frame:
    """One image worth of ground truth and detections."""

    frame_id: str
    width: int
    height: int
    ground_truths: tuple[GroundTruthObject, ...] = field(default_factory=tuple)
    detections: tuple[Detection, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(f"frame dimensions must be positive, got {self.width}x{self.height}")
        object.__setattr__(self, "ground_truths", tuple(self.ground_truths))
        object.__setattr__(self, "detections", tuple(self.detections))
        for g in self.ground_truths:
            if g.frame_id != self.frame_id:
                raise ValidationError(
                    f"ground truth frame_id {g.frame_id!r} != frame {self.frame_id!r}"
                )
            if not g.box.intersects_rect(self.width, self.height):
                raise ValidationError(f"ground-truth box outside frame {self.frame_id!r}")
        for d in self.detections:
            if d.frame_id != self.frame_id:
                raise ValidationError(
                    f"detection frame_id {d.frame_id!r} != frame {self.frame_id!r}"
                )
            if not d.box.intersects_rect(self.width, self.height):
                raise ValidationError(f"detection box outside frame {self.frame_id!r}")

    def with_detections(self, detections: Sequence[Detection]) -> "Frame":
        return Frame(self.frame_id, self.width, self.height, self.ground_truths, tuple(detections))
