"""Command-line interface: evaluate, postprocess, sweep, synth, serve.

Exit codes: 0 success, 1 validation error (bad data or configuration),
2 I/O error. The thread count for evaluate/sweep defaults to the
PDQEVAL_THREADS environment variable, falling back to 1.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import ValidationError
from .io import (
    attach_detections,
    load_detections,
    load_ground_truth,
    write_detections,
    write_report,
)
from .metric import evaluate
from .postprocess import PostProcessConfig, run_pipeline
from .sweep import SweepSpec, run_sweep, write_sweep_csv
from .synth import NoiseProfile, SynthSpec, write_dataset


def _default_threads() -> int:
    raw = os.environ.get("PDQEVAL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _load_json_file(path, what: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as e:
        raise ValidationError(f"invalid JSON in {what} file {path}: {e.msg}") from None
    if not isinstance(data, dict):
        raise ValidationError(f"{what} file {path} must hold a JSON object")
    return data


def _parse_noise(raw: str) -> NoiseProfile:
    """Accept 'none', an inline JSON object, or a path to a JSON file."""
    text = raw.strip()
    if text in ("", "none"):
        return NoiseProfile()
    if text.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ValidationError(f"invalid inline noise profile: {e.msg}") from None
        if not isinstance(data, dict):
            raise ValidationError("noise profile must be a JSON object")
        return NoiseProfile.from_mapping(data)
    return NoiseProfile.from_mapping(_load_json_file(text, "noise profile"))


def _cmd_evaluate(args) -> int:
    manifest, gt_frames = load_ground_truth(args.gt)
    detections = load_detections(args.det, manifest)
    frames = attach_detections(gt_frames, detections)
    report = evaluate(frames, threads=args.threads)
    write_report(report, args.out, args.format)
    print(f"PDQ {report.pdq:.6f}")
    return 0


def _cmd_postprocess(args) -> int:
    detections = load_detections(args.det)
    if args.config is not None:
        cfg = PostProcessConfig.from_mapping(_load_json_file(args.config, "config"))
    else:
        cfg = PostProcessConfig()
    records = [(fid, run_pipeline(dets, cfg)) for fid, dets in detections.items()]
    write_detections(records, args.out)
    return 0


def _cmd_sweep(args) -> int:
    manifest, gt_frames = load_ground_truth(args.gt)
    detections = load_detections(args.det, manifest)
    frames = attach_detections(gt_frames, detections)
    spec = SweepSpec.from_mapping(_load_json_file(args.spec, "sweep spec"))
    rows = run_sweep(frames, spec, threads=args.threads)
    write_sweep_csv(rows, args.out)
    best = rows[0]
    print(f"best PDQ {best.report.pdq:.6f} at {best.config.to_mapping()}")
    return 0


def _cmd_synth(args) -> int:
    spec = SynthSpec(
        frames=args.frames,
        max_objects=args.objects_per_frame,
        width=args.width,
        height=args.height,
        num_classes=args.classes,
        seed=args.seed,
        noise=_parse_noise(args.noise),
    )
    write_dataset(spec, args.out_gt, args.out_det)
    print(f"wrote {spec.frames} frames to {args.out_gt} / {args.out_det}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdqeval",
        description="Probability-based detection quality: evaluation, "
        "post-processing, sweeps, and synthetic fixtures.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="score a detection file against ground truth")
    p.add_argument("--gt", required=True, help="ground-truth JSONL file")
    p.add_argument("--det", required=True, help="detections JSONL file")
    p.add_argument("--out", required=True, help="report output path")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--threads", type=int, default=_default_threads(),
                   help="frame-level parallelism (default: PDQEVAL_THREADS or 1)")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("postprocess", help="run the post-processing pipeline on detections")
    p.add_argument("--det", required=True)
    p.add_argument("--config", default=None, help="JSON config mirroring PostProcessConfig")
    p.add_argument("--out", required=True, help="transformed detections (same schema)")
    p.set_defaults(func=_cmd_postprocess)

    p = sub.add_parser("sweep", help="grid-sweep post-processing configs and rank by PDQ")
    p.add_argument("--gt", required=True)
    p.add_argument("--det", required=True, help="raw detections; re-processed per grid point")
    p.add_argument("--spec", required=True, help="JSON file with one list of values per axis")
    p.add_argument("--out", required=True, help="CSV output, rows sorted by descending PDQ")
    p.add_argument("--threads", type=int, default=_default_threads())
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("synth", help="generate a seeded synthetic dataset")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--objects-per-frame", type=int, default=10,
                   help="maximum ground truths per frame")
    p.add_argument("--noise", default="none",
                   help="'none', inline JSON, or a JSON file path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=480)
    p.add_argument("--classes", type=int, default=30)
    p.add_argument("--out-gt", required=True)
    p.add_argument("--out-det", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
