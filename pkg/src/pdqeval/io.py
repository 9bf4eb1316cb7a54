"""File formats: ground truth, detections, reports.

Both dataset files are UTF-8 JSON lines (one record per frame, LF endings).

Ground truth::

    {"class_names": ["chair", ...]}                                # optional header
    {"frame_id": "000000", "width": 640, "height": 480,
     "objects": [{"class_id": 3, "bbox": [x1, y1, x2, y2],
                  "mask": {"size": [640, 480], "rle": [n0, n1, ...]}}]}

``bbox`` may be omitted (derived as the tight hull of the mask), and
``mask`` may be replaced by ``"polygon": [[x, y], ...]`` or a list of rings,
rasterized at load time with the even-odd rule sampled at integer lattice
points. RLE runs are row-major and alternate background/foreground starting
with a background run.

Detections::

    {"frame_id": "000000",
     "detections": [{"label_probs": [...], "bbox": [x1, y1, x2, y2],
                     "covars": [[[a, b], [c, d]], [[e, f], [g, h]]]}]}

``covars`` holds the top-left then bottom-right corner covariance and
defaults to zero matrices (a crisp box) when omitted.

Validation failures raise :class:`ValidationError` with the line number and
a JSON-pointer-style path to the offending field. Writers are
deterministic: identical inputs produce byte-identical files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .model import (
    BBox,
    Cov2,
    Detection,
    Frame,
    GroundTruthObject,
    LabelDist,
    PBox,
    SegMask,
)
from .metric import PdqReport, FrameSummary

REPORT_CSV_COLUMNS = ("pdq", "apdq", "avg_spatial", "avg_label", "tp", "fp", "fn")


@dataclass(frozen=True)
class FrameInfo:
    frame_id: str
    width: int
    height: int


@dataclass(frozen=True)
class DatasetManifest:
    """Class list plus per-frame metadata collected while loading ground truth."""

    class_names: tuple[str, ...] | None
    frames: tuple[FrameInfo, ...]

    @property
    def num_classes(self) -> int | None:
        return len(self.class_names) if self.class_names is not None else None

    def frame_ids(self) -> set[str]:
        return {f.frame_id for f in self.frames}


def _iter_jsonl(path):
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                yield line_no, json.loads(stripped)
            except json.JSONDecodeError as e:
                raise ValidationError(f"invalid JSON: {e.msg}", line=line_no) from None


def _expect(cond: bool, message: str, path: str, line: int):
    if not cond:
        raise ValidationError(message, path=path, line=line)


def _get_int(obj, key, path, line):
    v = obj.get(key)
    _expect(isinstance(v, int) and not isinstance(v, bool),
            f"expected an integer for {key!r}", f"{path}/{key}", line)
    return int(v)


def _get_str(obj, key, path, line):
    v = obj.get(key)
    _expect(isinstance(v, str), f"expected a string for {key!r}", f"{path}/{key}", line)
    return v


def _get_list(obj, key, path, line, required=True):
    if key not in obj:
        _expect(not required, f"missing required field {key!r}", path, line)
        return None
    v = obj[key]
    _expect(isinstance(v, list), f"expected a list for {key!r}", f"{path}/{key}", line)
    return v


def _parse_bbox(raw, path, line) -> BBox:
    _expect(isinstance(raw, list) and len(raw) == 4, "bbox must be [x1, y1, x2, y2]", path, line)
    vals = []
    for i, v in enumerate(raw):
        _expect(isinstance(v, (int, float)) and not isinstance(v, bool),
                "bbox entries must be numbers", f"{path}/{i}", line)
        _expect(math.isfinite(float(v)), "bbox entries must be finite", f"{path}/{i}", line)
        vals.append(float(v))
    try:
        return BBox(*vals)
    except ValidationError as e:
        raise ValidationError(str(e), path=path, line=line) from None


def rasterize_polygon(rings: Sequence, width: int, height: int) -> SegMask:
    """Even-odd rasterization of one or more rings at integer lattice points.

    A lattice point is foreground when a ray to x = +inf crosses an odd
    number of edges; points exactly on an edge follow the half-open
    convention of the crossing test, which keeps the result deterministic.
    """
    if rings and rings[0] and isinstance(rings[0][0], (int, float)):
        rings = [rings]
    edges = []
    for ring in rings:
        n = len(ring)
        if n < 3:
            raise ValidationError("polygon ring needs at least 3 points")
        for i in range(n):
            x1, y1 = float(ring[i][0]), float(ring[i][1])
            x2, y2 = float(ring[(i + 1) % n][0]), float(ring[(i + 1) % n][1])
            edges.append((x1, y1, x2, y2))
    bm = np.zeros((height, width), dtype=bool)
    xs = np.arange(width)
    for y in range(height):
        crossings = []
        for x1, y1, x2, y2 in edges:
            if (y1 > y) != (y2 > y):
                crossings.append(x1 + (y - y1) * (x2 - x1) / (y2 - y1))
        if not crossings:
            continue
        cr = np.sort(np.asarray(crossings))
        count_gt = cr.size - np.searchsorted(cr, xs, side="right")
        bm[y] = (count_gt % 2) == 1
    return SegMask.from_bitmap(bm)


def _parse_mask(obj, frame_w, frame_h, path, line) -> SegMask:
    if "polygon" in obj:
        poly = _get_list(obj, "polygon", path, line)
        try:
            return rasterize_polygon(poly, frame_w, frame_h)
        except ValidationError as e:
            raise ValidationError(str(e), path=f"{path}/polygon", line=line) from None
    mask = obj.get("mask")
    _expect(isinstance(mask, dict), "object needs a 'mask' or 'polygon' field", path, line)
    size = _get_list(mask, "size", f"{path}/mask", line)
    _expect(len(size) == 2 and all(isinstance(v, int) for v in size),
            "mask size must be [width, height]", f"{path}/mask/size", line)
    _expect(size[0] == frame_w and size[1] == frame_h,
            f"mask size {size} differs from frame size [{frame_w}, {frame_h}]",
            f"{path}/mask/size", line)
    rle = _get_list(mask, "rle", f"{path}/mask", line)
    _expect(all(isinstance(v, int) and not isinstance(v, bool) for v in rle),
            "RLE runs must be integers", f"{path}/mask/rle", line)
    try:
        return SegMask(size[0], size[1], rle)
    except ValidationError as e:
        raise ValidationError(str(e), path=f"{path}/mask/rle", line=line) from None


def load_ground_truth(path) -> tuple[DatasetManifest, list[Frame]]:
    """Load and fully validate a ground-truth file.

    Returns the manifest (class names when the header is present, plus frame
    metadata) and one detection-free Frame per input record, in file order.
    """
    class_names: tuple[str, ...] | None = None
    frames: list[Frame] = []
    infos: list[FrameInfo] = []
    seen: set[str] = set()
    for line_no, obj in _iter_jsonl(path):
        _expect(isinstance(obj, dict), "each line must be a JSON object", "", line_no)
        if "class_names" in obj and "frame_id" not in obj:
            _expect(not frames and class_names is None,
                    "class_names header must be the first record", "/class_names", line_no)
            names = _get_list(obj, "class_names", "", line_no)
            _expect(all(isinstance(n, str) for n in names),
                    "class names must be strings", "/class_names", line_no)
            _expect(len(set(names)) == len(names), "class names must be unique",
                    "/class_names", line_no)
            _expect(len(names) >= 1, "class list must be non-empty", "/class_names", line_no)
            class_names = tuple(names)
            continue
        frame_id = _get_str(obj, "frame_id", "", line_no)
        _expect(frame_id not in seen, f"duplicate frame_id {frame_id!r}", "/frame_id", line_no)
        seen.add(frame_id)
        width = _get_int(obj, "width", "", line_no)
        height = _get_int(obj, "height", "", line_no)
        _expect(width > 0 and height > 0, "frame dimensions must be positive", "/width", line_no)
        objects = _get_list(obj, "objects", "", line_no)
        gts = []
        for i, raw in enumerate(objects):
            opath = f"/objects/{i}"
            _expect(isinstance(raw, dict), "object must be a JSON object", opath, line_no)
            class_id = _get_int(raw, "class_id", opath, line_no)
            _expect(class_id >= 0, "class_id must be non-negative", f"{opath}/class_id", line_no)
            if class_names is not None:
                _expect(class_id < len(class_names),
                        f"class_id {class_id} out of range for {len(class_names)} classes",
                        f"{opath}/class_id", line_no)
            mask = _parse_mask(raw, width, height, opath, line_no)
            try:
                if "bbox" in raw:
                    box = _parse_bbox(raw["bbox"], f"{opath}/bbox", line_no)
                    gt = GroundTruthObject(class_id, box, mask, frame_id)
                else:
                    gt = GroundTruthObject.from_mask(class_id, mask, frame_id)
            except ValidationError as e:
                raise ValidationError(
                    f"invalid ground truth (frame {frame_id!r}, object {i}): {e}",
                    path=opath, line=line_no) from None
            gts.append(gt)
        try:
            frame = Frame(frame_id, width, height, tuple(gts))
        except ValidationError as e:
            raise ValidationError(str(e), path="", line=line_no) from None
        frames.append(frame)
        infos.append(FrameInfo(frame_id, width, height))
    return DatasetManifest(class_names, tuple(infos)), frames


def _parse_cov_pair(raw, path, line) -> tuple[Cov2, Cov2]:
    _expect(isinstance(raw, list) and len(raw) == 2,
            "covars must hold two 2x2 matrices", path, line)
    covs = []
    for ci, rows in enumerate(raw):
        cpath = f"{path}/{ci}"
        ok = (
            isinstance(rows, list) and len(rows) == 2
            and all(isinstance(r, list) and len(r) == 2 for r in rows)
            and all(isinstance(v, (int, float)) and not isinstance(v, bool)
                    and math.isfinite(float(v)) for r in rows for v in r)
        )
        _expect(ok, "covariance must be a 2x2 matrix of finite numbers", cpath, line)
        try:
            covs.append(Cov2.from_rows(rows))
        except ValidationError as e:
            raise ValidationError(str(e), path=cpath, line=line) from None
    return covs[0], covs[1]


def load_detections(
    path, manifest: DatasetManifest | None = None
) -> dict[str, list[Detection]]:
    """Load a detection file into per-frame lists (file order preserved).

    With a manifest, frame ids must be known and probability vectors must
    match the class count; without one the class count is inferred from the
    first detection and enforced across the file.
    """
    num_classes = manifest.num_classes if manifest is not None else None
    known = manifest.frame_ids() if manifest is not None else None
    out: dict[str, list[Detection]] = {}
    for line_no, obj in _iter_jsonl(path):
        _expect(isinstance(obj, dict), "each line must be a JSON object", "", line_no)
        frame_id = _get_str(obj, "frame_id", "", line_no)
        _expect(frame_id not in out, f"duplicate frame_id {frame_id!r}", "/frame_id", line_no)
        if known is not None:
            _expect(frame_id in known, f"unknown frame_id {frame_id!r}", "/frame_id", line_no)
        raw_dets = _get_list(obj, "detections", "", line_no)
        dets = []
        for i, raw in enumerate(raw_dets):
            dpath = f"/detections/{i}"
            _expect(isinstance(raw, dict), "detection must be a JSON object", dpath, line_no)
            probs = _get_list(raw, "label_probs", dpath, line_no)
            _expect(all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in probs),
                    "label_probs must be numbers", f"{dpath}/label_probs", line_no)
            if num_classes is None:
                num_classes = len(probs)
            _expect(len(probs) == num_classes,
                    f"label_probs has {len(probs)} entries, expected {num_classes}",
                    f"{dpath}/label_probs", line_no)
            try:
                dist = LabelDist(probs)
            except ValidationError as e:
                raise ValidationError(str(e), path=f"{dpath}/label_probs", line=line_no) from None
            box = _parse_bbox(_get_list(raw, "bbox", dpath, line_no), f"{dpath}/bbox", line_no)
            if "covars" in raw:
                cov_tl, cov_br = _parse_cov_pair(raw["covars"], f"{dpath}/covars", line_no)
            else:
                cov_tl, cov_br = Cov2.zero(), Cov2.zero()
            dets.append(Detection(dist, PBox(box, cov_tl, cov_br), frame_id))
        out[frame_id] = dets
    return out


def attach_detections(
    frames: Sequence[Frame], detections: Mapping[str, Sequence[Detection]]
) -> list[Frame]:
    """Merge loaded detections onto ground-truth frames (missing -> empty)."""
    return [f.with_detections(tuple(detections.get(f.frame_id, ()))) for f in frames]


def _float(v) -> float:
    return float(v)


def _det_record(frame_id: str, dets: Sequence[Detection]) -> dict:
    return {
        "frame_id": frame_id,
        "detections": [
            {
                "label_probs": [_float(p) for p in d.label_dist.probs],
                "bbox": [_float(v) for v in d.box.as_tuple()],
                "covars": [d.pbox.cov_tl.as_rows(), d.pbox.cov_br.as_rows()],
            }
            for d in dets
        ],
    }


def _dump_jsonl(records: Iterable[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":")))
            fh.write("\n")


def write_detections(
    records: Iterable[tuple[str, Sequence[Detection]]], path
) -> None:
    """Write per-frame detection lists in the documented schema.

    Covariances are always written explicitly so output files re-ingest
    byte-identically.
    """
    _dump_jsonl((_det_record(fid, dets) for fid, dets in records), path)


def write_ground_truth(
    frames: Sequence[Frame], path, class_names: Sequence[str] | None = None
) -> None:
    """Write ground-truth frames (masks as RLE) with an optional class header."""
    def gen():
        if class_names is not None:
            yield {"class_names": list(class_names)}
        for f in frames:
            yield {
                "frame_id": f.frame_id,
                "width": f.width,
                "height": f.height,
                "objects": [
                    {
                        "class_id": g.class_id,
                        "bbox": [_float(v) for v in g.box.as_tuple()],
                        "mask": {"size": [g.mask.width, g.mask.height],
                                 "rle": g.mask.runs.tolist()},
                    }
                    for g in f.ground_truths
                ],
            }
    _dump_jsonl(gen(), path)


def _fmt6(v: float) -> str:
    return f"{v:.6g}"


def write_report(report: PdqReport, path, format: str = "json") -> None:
    """Serialize a report deterministically.

    JSON keeps full float precision (exact round-trip); CSV is the tabular
    summary with floats at 6 significant digits and a fixed column order.
    """
    if format == "json":
        doc = {
            "pdq": report.pdq,
            "apdq": report.apdq,
            "avg_spatial": report.avg_spatial,
            "avg_label": report.avg_label,
            "tp": report.n_tp,
            "fp": report.n_fp,
            "fn": report.n_fn,
            "per_frame": [
                {"frame_id": s.frame_id, "tp": s.tp, "fp": s.fp, "fn": s.fn}
                for s in report.per_frame
            ],
        }
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(doc, separators=(",", ":")))
            fh.write("\n")
    elif format == "csv":
        row = [_fmt6(report.pdq), _fmt6(report.apdq), _fmt6(report.avg_spatial),
               _fmt6(report.avg_label), str(report.n_tp), str(report.n_fp), str(report.n_fn)]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(REPORT_CSV_COLUMNS) + "\n")
            fh.write(",".join(row) + "\n")
    else:
        raise ValidationError(f"unknown report format {format!r}")


def read_report(path) -> PdqReport:
    """Parse a JSON report written by :func:`write_report`."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    per_frame = tuple(
        FrameSummary(p["frame_id"], p["tp"], p["fp"], p["fn"]) for p in doc.get("per_frame", [])
    )
    return PdqReport(
        doc["pdq"], doc["apdq"], doc["avg_spatial"], doc["avg_label"],
        doc["tp"], doc["fp"], doc["fn"], per_frame,
    )
