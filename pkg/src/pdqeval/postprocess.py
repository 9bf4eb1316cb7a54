"""Detection post-processing: threshold, rescore, recover, shrink, covariance.

The full pipeline (``run_pipeline``) applies, in order:

1. drop detections scoring below ``score_threshold`` (kept aside for step 3)
2. set kept detections' label distributions to one-hot at their argmax
3. recover pairs of discarded detections that overlap each other strongly
   but disagree on class - the bet being that one of them is a real object
4. shrink every box about its center
5. assign a fresh diagonal corner covariance, either a fixed value or a
   fraction of the (post-shrink) box width/height

Covariance entries are variances in pixels^2. With ``cov_entries="stddev"``
the configured numbers are read as standard deviations instead and squared
before storage, so downstream consumers always see variances.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .errors import ValidationError
from .model import BBox, Cov2, Detection, LabelDist, PBox, iou


@dataclass(frozen=True)
class CovarianceMode:
    """fixed(v): corner variance v for every box; fraction(f): f * box size."""

    kind: str  # "fixed" | "fraction"
    value: float

    def __post_init__(self):
        if self.kind not in ("fixed", "fraction"):
            raise ValidationError(f"unknown covariance mode {self.kind!r}")
        if self.kind == "fraction" and not (0.0 <= self.value <= 1.0):
            raise ValidationError(f"covariance fraction must lie in [0, 1], got {self.value}")
        if self.kind == "fixed" and self.value < 0.0:
            raise ValidationError(f"fixed covariance must be non-negative, got {self.value}")

    @classmethod
    def parse(cls, text: str) -> "CovarianceMode":
        """Parse the compact "fixed:7.5" / "fraction:0.3" form."""
        kind, sep, value = text.partition(":")
        if not sep:
            raise ValidationError(
                f"covariance mode must look like 'fixed:7.5' or 'fraction:0.3', got {text!r}"
            )
        try:
            v = float(value)
        except ValueError:
            raise ValidationError(f"bad covariance mode value {value!r}") from None
        return cls(kind.strip(), v)

    def __str__(self) -> str:
        return f"{self.kind}:{self.value:g}"


_CONFIG_FIELDS = (
    "score_threshold",
    "set_scores_to_one",
    "recover",
    "recover_iou_threshold",
    "recover_score_floor",
    "shrink_factor",
    "cov_mode",
    "cov_entries",
)


@dataclass(frozen=True)
class PostProcessConfig:
    score_threshold: float = 0.5
    set_scores_to_one: bool = True
    recover: bool = True
    recover_iou_threshold: float = 0.75
    recover_score_floor: float = 0.05
    shrink_factor: float = 0.1
    cov_mode: CovarianceMode = field(default_factory=lambda: CovarianceMode("fraction", 0.30))
    cov_entries: str = "variance"  # "variance" | "stddev"

    def __post_init__(self):
        for name in ("score_threshold", "recover_iou_threshold", "recover_score_floor"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")
        if not (0.0 <= self.shrink_factor < 1.0):
            raise ValidationError(f"shrink_factor must lie in [0, 1), got {self.shrink_factor}")
        if self.cov_entries not in ("variance", "stddev"):
            raise ValidationError(f"cov_entries must be 'variance' or 'stddev', got {self.cov_entries!r}")

    @classmethod
    def from_mapping(cls, data: Mapping) -> "PostProcessConfig":
        unknown = set(data) - set(_CONFIG_FIELDS)
        if unknown:
            raise ValidationError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        kw = dict(data)
        if "cov_mode" in kw and not isinstance(kw["cov_mode"], CovarianceMode):
            kw["cov_mode"] = CovarianceMode.parse(str(kw["cov_mode"]))
        return cls(**kw)

    def to_mapping(self) -> dict:
        return {
            "score_threshold": self.score_threshold,
            "set_scores_to_one": self.set_scores_to_one,
            "recover": self.recover,
            "recover_iou_threshold": self.recover_iou_threshold,
            "recover_score_floor": self.recover_score_floor,
            "shrink_factor": self.shrink_factor,
            "cov_mode": str(self.cov_mode),
            "cov_entries": self.cov_entries,
        }


def filter_by_score(
    dets: Sequence[Detection], threshold: float
) -> tuple[list[Detection], list[Detection]]:
    """Partition into (kept, discarded) by score >= threshold, order preserved."""
    kept, discarded = [], []
    for d in dets:
        (kept if d.score >= threshold else discarded).append(d)
    return kept, discarded


def set_scores_to_one(dets: Iterable[Detection]) -> list[Detection]:
    """One-hot every label distribution at its argmax class."""
    out = []
    for d in dets:
        dist = LabelDist.one_hot(d.label, len(d.label_dist))
        out.append(replace(d, label_dist=dist))
    return out


def recover_confusing(
    kept: Sequence[Detection], discarded: Sequence[Detection], cfg: PostProcessConfig
) -> list[Detection]:
    """Re-add discarded detections that come in class-ambiguous pairs.

    A pair qualifies when both members score at least ``recover_score_floor``,
    their argmax classes differ, and their boxes overlap with IOU at least
    ``recover_iou_threshold``. Both members of every qualifying pair are
    appended (deduplicated, original order) after the kept detections.
    """
    candidates = [
        (i, d) for i, d in enumerate(discarded) if d.score >= cfg.recover_score_floor
    ]
    picked: set[int] = set()
    for a in range(len(candidates)):
        ia, da = candidates[a]
        for b in range(a + 1, len(candidates)):
            ib, db = candidates[b]
            if da.label == db.label:
                continue
            if iou(da.box, db.box) >= cfg.recover_iou_threshold:
                picked.add(ia)
                picked.add(ib)
    return list(kept) + [discarded[i] for i in sorted(picked)]


def shrink_boxes(dets: Sequence[Detection], factor: float) -> list[Detection]:
    """Scale every box's width and height by (1 - factor) about its center."""
    if factor == 0.0:
        return list(dets)
    out = []
    for d in dets:
        b = d.box
        dx = b.width * factor / 2.0
        dy = b.height * factor / 2.0
        box = BBox(b.x1 + dx, b.y1 + dy, b.x2 - dx, b.y2 - dy)
        out.append(replace(d, pbox=replace(d.pbox, box=box)))
    return out


def assign_covariance(
    dets: Sequence[Detection], cov_mode: CovarianceMode, cov_entries: str = "variance"
) -> list[Detection]:
    """Give both corners of every box a fresh diagonal covariance."""
    out = []
    for d in dets:
        b = d.box
        if cov_mode.kind == "fixed":
            vx = vy = cov_mode.value
        else:
            vx = cov_mode.value * b.width
            vy = cov_mode.value * b.height
        if cov_entries == "stddev":
            vx, vy = vx * vx, vy * vy
        cov = Cov2.diagonal(vx, vy)
        out.append(replace(d, pbox=PBox(b, cov, cov)))
    return out


def run_pipeline(dets: Sequence[Detection], cfg: PostProcessConfig) -> list[Detection]:
    """Apply the full post-processing chain to one frame's detections.

    Recovered detections get one-hot scores too (when rescoring is on), and
    the fractional covariance is computed from the already-shrunk box.
    """
    kept, discarded = filter_by_score(dets, cfg.score_threshold)
    if cfg.set_scores_to_one:
        kept = set_scores_to_one(kept)
    if cfg.recover:
        n_kept = len(kept)
        merged = recover_confusing(kept, discarded, cfg)
        recovered = merged[n_kept:]
        if cfg.set_scores_to_one:
            recovered = set_scores_to_one(recovered)
        kept = merged[:n_kept] + recovered
    kept = shrink_boxes(kept, cfg.shrink_factor)
    kept = assign_covariance(kept, cfg.cov_mode, cfg.cov_entries)
    return kept
