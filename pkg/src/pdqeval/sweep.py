"""Grid sweeps over post-processing configurations.

Each grid point re-runs the full pipeline on the raw detections and
re-evaluates from scratch; at desk scale that simplicity beats incremental
reuse. Rows come back sorted by descending PDQ (ties keep grid order) with
the best row flagged.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import SweepCapError, ValidationError
from .metric import PdqReport, evaluate
from .model import Frame
from .postprocess import CovarianceMode, PostProcessConfig, run_pipeline

DEFAULT_MAX_POINTS = 10_000

_AXIS_FIELDS = (
    "score_threshold",
    "set_scores_to_one",
    "recover",
    "recover_iou_threshold",
    "recover_score_floor",
    "shrink_factor",
    "cov_mode",
    "cov_entries",
)

SWEEP_CSV_COLUMNS = _AXIS_FIELDS + (
    "pdq", "apdq", "avg_spatial", "avg_label", "tp", "fp", "fn", "best",
)


@dataclass(frozen=True)
class SweepSpec:
    """One list of values per config field; omitted fields use the default."""

    axes: dict
    max_points: int = DEFAULT_MAX_POINTS

    @classmethod
    def from_mapping(cls, data: Mapping) -> "SweepSpec":
        data = dict(data)
        max_points = data.pop("max_points", DEFAULT_MAX_POINTS)
        if not isinstance(max_points, int) or max_points < 1:
            raise ValidationError(f"max_points must be a positive integer, got {max_points!r}")
        unknown = set(data) - set(_AXIS_FIELDS)
        if unknown:
            raise ValidationError(f"unknown sweep axis(es): {', '.join(sorted(unknown))}")
        defaults = PostProcessConfig()
        axes = {}
        for name in _AXIS_FIELDS:
            if name in data:
                values = data[name]
                if not isinstance(values, list) or not values:
                    raise ValidationError(f"axis {name!r} must be a non-empty list")
                if name == "cov_mode":
                    values = [
                        v if isinstance(v, CovarianceMode) else CovarianceMode.parse(str(v))
                        for v in values
                    ]
                axes[name] = list(values)
            else:
                axes[name] = [getattr(defaults, name)]
        return cls(axes, max_points)

    @property
    def num_points(self) -> int:
        n = 1
        for values in self.axes.values():
            n *= len(values)
        return n

    def grid(self) -> list[PostProcessConfig]:
        """All configurations in deterministic axis order."""
        if self.num_points > self.max_points:
            raise SweepCapError(
                f"sweep grid has {self.num_points} points, more than the cap of {self.max_points}"
            )
        ordered = [self.axes[name] for name in _AXIS_FIELDS]
        return [
            PostProcessConfig(**dict(zip(_AXIS_FIELDS, combo)))
            for combo in itertools.product(*ordered)
        ]


@dataclass(frozen=True)
class SweepRow:
    grid_index: int
    config: PostProcessConfig
    report: PdqReport
    best: bool = False


def run_sweep(frames: Sequence[Frame], spec: SweepSpec, threads: int = 1) -> list[SweepRow]:
    """Evaluate every grid point against frames carrying raw detections."""
    configs = spec.grid()

    def one(item: tuple[int, PostProcessConfig]) -> SweepRow:
        idx, cfg = item
        processed = [f.with_detections(run_pipeline(f.detections, cfg)) for f in frames]
        return SweepRow(idx, cfg, evaluate(processed))

    work = list(enumerate(configs))
    if threads > 1 and len(work) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, work))
    else:
        rows = [one(w) for w in work]
    rows.sort(key=lambda r: (-r.report.pdq, r.grid_index))
    if rows:
        rows[0] = SweepRow(rows[0].grid_index, rows[0].config, rows[0].report, best=True)
    return rows


def _cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, CovarianceMode):
        return str(value)
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def write_sweep_csv(rows: Sequence[SweepRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(SWEEP_CSV_COLUMNS) + "\n")
        for row in rows:
            cfg = row.config
            cells = [_cell(getattr(cfg, name)) for name in _AXIS_FIELDS]
            rep = row.report
            cells += [
                f"{rep.pdq:.6g}", f"{rep.apdq:.6g}", f"{rep.avg_spatial:.6g}",
                f"{rep.avg_label:.6g}", str(rep.n_tp), str(rep.n_fp), str(rep.n_fn),
                "1" if row.best else "0",
            ]
            fh.write(",".join(cells) + "\n")
