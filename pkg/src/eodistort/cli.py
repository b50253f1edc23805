"""Command-line entry point.

Subcommands: distort, stats, sweep, stage, collect, evaluate, report.
stdout carries machine-readable results only; diagnostics go to stderr.
Exit codes: 0 success, 1 usage or validation failure, 2 external predictor
failure.  ``EO_DISTORT_SEED`` provides a fallback seed when no flag or
config value is given.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

from . import dataset, distortions, raster_io, report as report_mod, sweep as sweep_mod
from .dataset import ChannelStats
from .errors import (
    EoDistortError,
    ExternalCommandFailed,
    ExternalTimeout,
    MissingPrediction,
    SweepCellError,
)

_EXTERNAL_ERRORS = (ExternalCommandFailed, ExternalTimeout, MissingPrediction)


def _fail(message: str, code: int = 1) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _env_seed() -> int:
    return int(os.environ.get("EO_DISTORT_SEED", "0"))


def _parse_fill_means(text: str) -> ChannelStats:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 3:
        raise ValueError("expected three comma-separated means, e.g. 101.5,99.2,100.0")
    return ChannelStats(mean_r=parts[0], mean_g=parts[1], mean_b=parts[2], pixel_count=1)


def cmd_distort(args: argparse.Namespace) -> int:
    if args.transform == distortions.COLOR_DUP and args.channel is None:
        return _fail("--channel is required for --transform color-dup")
    if args.transform == distortions.CONTEXT_MASK and args.fill_means is None:
        return _fail("--fill-means is required for --transform context-mask")
    labels_path = args.labels or raster_io.default_labels_path(args.image)
    try:
        image = raster_io.load_image(args.image)
        labels = raster_io.load_labels(labels_path)
        fill = _parse_fill_means(args.fill_means) if args.fill_means else None
        seed = args.seed if args.seed is not None else _env_seed()
        spec = distortions.DistortionSpec(
            kind=args.transform,
            class_id=args.class_id,
            intensity=args.intensity,
            channel=args.channel if args.transform == distortions.COLOR_DUP else None,
            seed=seed,
            replicate=args.replicate,
            fill=fill if args.transform == distortions.CONTEXT_MASK else None,
        )
        out = distortions.apply(image, labels, spec, image_index=0)
        raster_io.save_image(out, args.out)
    except (EoDistortError, ValueError) as exc:
        return _fail(str(exc))
    spec_doc = {
        "transform": args.transform,
        "class_id": args.class_id,
        "intensity": args.intensity,
        "channel": args.channel,
        "seed": seed,
        "replicate": args.replicate,
        "fill_means": None if fill is None else list(fill.means),
    }
    digest = hashlib.sha256(json.dumps(spec_doc, sort_keys=True).encode()).hexdigest()
    print(json.dumps({"spec": spec_doc, "digest": digest, "out": str(args.out)}))
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    try:
        manifest = dataset.load_manifest(args.manifest)
        stats = dataset.compute_channel_means(manifest, args.split)
        histogram = dataset.class_pixel_histogram(manifest, args.split)
    except EoDistortError as exc:
        return _fail(str(exc))
    print(json.dumps({
        "split": args.split,
        "channel_means": {"r": stats.mean_r, "g": stats.mean_g, "b": stats.mean_b},
        "pixel_count": stats.pixel_count,
        "class_pixel_histogram": {str(k): v for k, v in sorted(histogram.items())},
    }))
    return 0


def _write_outputs(rep, out_dir: Path) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "report.csv"
    report_mod.to_csv(rep, csv_path)
    (out_dir / "report.json").write_text(json.dumps(rep.to_dict(), indent=2) + "\n")
    curves = report_mod.build_curves(report_mod.read_csv(csv_path))
    svgs = report_mod.render_all(curves, out_dir)
    return {"csv": str(csv_path), "json": str(out_dir / "report.json"),
            "svg": [str(p) for p in svgs]}


def _flush_partial(exc: SweepCellError, config, out_dir: Path) -> None:
    """Best-effort partial CSV so completed cells survive a failed sweep."""
    if not exc.partial_records:
        return
    try:
        manifest = dataset.load_manifest(config.manifest_path)
        partial = sweep_mod.SweepReport(
            records=exc.partial_records, split=config.split, seed=config.seed,
            class_names=dict(manifest.class_table),
        )
        out_dir.mkdir(parents=True, exist_ok=True)
        report_mod.to_csv(partial, out_dir / "report.partial.csv")
        print(f"partial results: {out_dir / 'report.partial.csv'}", file=sys.stderr)
    except EoDistortError:
        pass


def cmd_sweep(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    try:
        config = sweep_mod.load_sweep_config(args.config)
    except EoDistortError as exc:
        return _fail(str(exc))
    try:
        rep = sweep_mod.run_sweep(config, jobs=args.jobs)
    except SweepCellError as exc:
        _flush_partial(exc, config, out_dir)
        code = 2 if isinstance(exc.cause, _EXTERNAL_ERRORS) else 1
        return _fail(str(exc), code)
    except EoDistortError as exc:
        return _fail(str(exc))
    paths = _write_outputs(rep, out_dir)
    print(json.dumps({"records": len(rep.records), **paths}))
    return 0


def cmd_stage(args: argparse.Namespace) -> int:
    try:
        config = sweep_mod.load_sweep_config(args.config)
        cells = sweep_mod.stage_sweep(config, args.out_dir, jobs=args.jobs)
    except EoDistortError as exc:
        return _fail(str(exc))
    print(json.dumps({"staging_root": str(args.out_dir), "cells": len(cells)}))
    return 0


def cmd_collect(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    try:
        config = sweep_mod.load_sweep_config(args.config)
    except EoDistortError as exc:
        return _fail(str(exc))
    try:
        rep = sweep_mod.collect_sweep(config, args.staging_dir)
    except SweepCellError as exc:
        _flush_partial(exc, config, out_dir)
        code = 2 if isinstance(exc.cause, _EXTERNAL_ERRORS) else 1
        return _fail(str(exc), code)
    except MissingPrediction as exc:
        return _fail(str(exc), 2)
    except EoDistortError as exc:
        return _fail(str(exc))
    paths = _write_outputs(rep, out_dir)
    print(json.dumps({"records": len(rep.records), **paths}))
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    try:
        manifest = dataset.load_manifest(args.manifest)
        result = sweep_mod.evaluate_predictions(manifest, args.split, args.pred_dir)
    except MissingPrediction as exc:
        return _fail(str(exc), 2)
    except EoDistortError as exc:
        return _fail(str(exc))
    print(json.dumps(result))
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    try:
        rows = report_mod.read_csv(args.csv)
        curves = report_mod.build_curves(rows)
        if args.compare_csv:
            other = report_mod.read_csv(args.compare_csv)
            report_mod.attach_comparison(curves, other)
        svgs = report_mod.render_all(curves, args.out_svg_dir)
    except EoDistortError as exc:
        return _fail(str(exc))
    print(json.dumps({"svg": [str(p) for p in svgs]}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eo-distort",
        description="Class-conditional image distortions and robustness sweeps "
                    "for land-cover segmentation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("distort", help="distort one image for one class")
    p.add_argument("--image", required=True)
    p.add_argument("--labels", help="default: <image stem>_labels.png next to the image")
    p.add_argument("--class-id", type=int, required=True)
    p.add_argument("--transform", required=True, choices=list(distortions.KINDS))
    p.add_argument("--intensity", type=float, required=True)
    p.add_argument("--channel", choices=list(distortions.CHANNELS))
    p.add_argument("--seed", type=int)
    p.add_argument("--replicate", type=int, default=0)
    p.add_argument("--fill-means", help="r,g,b fill means for context-mask")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_distort)

    p = sub.add_parser("stats", help="channel means and class pixel histogram of a split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", required=True, choices=list(dataset.SPLITS))
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("sweep", help="run a sweep and write report.csv plus SVG charts")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=int, default=0, help="worker cap; default: CPU count")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stage", help="materialize distorted images for offline prediction")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=int, default=0)
    p.set_defaults(func=cmd_stage)

    p = sub.add_parser("collect", help="ingest staged predictions and write the report")
    p.add_argument("--config", required=True)
    p.add_argument("--staging-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("evaluate", help="undistorted IoU from precomputed prediction maps")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", required=True, choices=list(dataset.SPLITS))
    p.add_argument("--pred-dir", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="regenerate SVG charts from a report CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--out-svg-dir", required=True)
    p.add_argument("--compare-csv", help="overlay this CSV's mean curves, dashed")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
