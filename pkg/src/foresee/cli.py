"""Batch command-line front end.

Subcommands operate on KITTI-style directory trees (one file per sample
id) and write results only under their --out path. Exit codes are stable:
0 success, 2 parse failure, 3 shape mismatch, 4 missing samples, 1
anything else. Every run is deterministic for fixed inputs: sample ids
are processed in sorted order and result files carry no timestamps.

If a directory argument does not exist and FORESEE_DATA_ROOT is set, the
path is retried relative to that root.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, dataio, metrics, pointcloud
from .core import make_binspec, decode_depthmap
from .errors import (
    EmptyRegionError,
    ForeseeError,
    MissingSampleError,
    ParseError,
    ShapeMismatchError,
)
from .fusion import mask_merge, max_merge

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARSE = 2
EXIT_SHAPE = 3
EXIT_MISSING = 4

DATA_ROOT_ENV = "FORESEE_DATA_ROOT"


def _resolve_dir(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        root = os.environ.get(DATA_ROOT_ENV)
        if root and not p.is_absolute():
            candidate = Path(root) / p
            if candidate.exists():
                return candidate
    return p


def _sample_ids(directory: Path, suffix: str, index_file: str | None) -> list[str]:
    if index_file:
        ids = dataio.read_index(Path(index_file).read_text())
    else:
        if not directory.is_dir():
            raise MissingSampleError(f"not a directory: {directory}")
        ids = sorted(p.stem for p in directory.iterdir() if p.suffix == suffix)
    if not ids:
        raise MissingSampleError(f"no samples found under {directory}")
    return sorted(ids)


def _require_files(ids: list[str], directory: Path, suffix: str, kind: str) -> None:
    missing = [i for i in ids if not (directory / f"{i}{suffix}").is_file()]
    if missing:
        raise MissingSampleError(
            f"{kind} missing for {len(missing)} sample(s): {', '.join(missing[:10])}",
            ids=missing,
        )


def _map_samples(ids: list[str], jobs: int, fn):
    """Apply fn to every id, optionally in a thread pool; results keyed by id."""
    if jobs <= 1:
        return {i: fn(i) for i in ids}
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return dict(zip(ids, pool.map(fn, ids)))


def _load_scene(gt_dir: Path, label_dir: Path, sample_id: str, classes):
    gt = dataio.read_depth_image((gt_dir / f"{sample_id}.png").read_bytes())
    boxes = dataio.parse_labels(
        (label_dir / f"{sample_id}.txt").read_text(),
        classes=classes, source=f"{sample_id}.txt",
    )
    fg = dataio.rasterize_mask(boxes, gt.height, gt.width)
    return gt, fg


def _parse_classes(value: str | None):
    if not value:
        return None
    return {c.strip() for c in value.split(",") if c.strip()}


def cmd_evaluate(args) -> int:
    pred_dir = _resolve_dir(args.pred_dir)
    gt_dir = _resolve_dir(args.gt_dir)
    label_dir = _resolve_dir(args.label_dir)
    out = Path(args.out)
    ids = _sample_ids(gt_dir, ".png", args.index)
    _require_files(ids, pred_dir, ".png", "prediction")
    _require_files(ids, label_dir, ".txt", "labels")
    classes = _parse_classes(args.classes)

    def one(sample_id: str) -> metrics.MetricsReport:
        gt, fg = _load_scene(gt_dir, label_dir, sample_id, classes)
        pred = dataio.read_depth_image((pred_dir / f"{sample_id}.png").read_bytes())
        return metrics.evaluate(pred, gt, fg)

    reports = _map_samples(ids, args.jobs, one)
    out.mkdir(parents=True, exist_ok=True)
    for sample_id in ids:
        (out / f"{sample_id}.txt").write_text(
            metrics.format_report_kv(reports[sample_id], silog_x100=args.silog_x100)
        )
    pooled = metrics.aggregate([reports[i] for i in ids])
    (out / "aggregate.txt").write_text(
        metrics.format_report_kv(pooled, silog_x100=args.silog_x100)
    )
    (out / "aggregate_table.txt").write_text(
        metrics.format_report_text(pooled, silog_x100=args.silog_x100)
    )
    print(metrics.format_report_text(pooled, silog_x100=args.silog_x100), end="")
    return EXIT_OK


def cmd_analyze(args) -> int:
    gt_dir = _resolve_dir(args.gt_dir)
    label_dir = _resolve_dir(args.label_dir)
    out = Path(args.out)
    ids = _sample_ids(gt_dir, ".png", args.index)
    _require_files(ids, label_dir, ".txt", "labels")
    classes = _parse_classes(args.classes)

    scenes_by_id = _map_samples(
        ids, args.jobs, lambda i: _load_scene(gt_dir, label_dir, i, classes)
    )
    scenes = [scenes_by_id[i] for i in ids]
    out.mkdir(parents=True, exist_ok=True)
    if args.mode == "values":
        anchors = [float(a) for a in args.anchors.split(",")] if args.anchors else None
        report = analysis.depth_value_distribution(scenes, width=args.window, anchors=anchors)
        text = analysis.format_distribution_columns(report)
        (out / "depth_value_distribution.tsv").write_text(text)
        print(text, end="")
    else:
        report = analysis.gradient_distribution(scenes, scaling=args.scaling)
        table = analysis.format_gradient_table(report)
        (out / "gradient_levels.txt").write_text(table)
        columns = ["region\tlevel\tpercent"]
        for region, row in (("fg", report.fg_percent), ("bg", report.bg_percent)):
            for level, value in zip(("I", "II", "III"), row):
                columns.append(f"{region}\t{level}\t{value:.6f}")
        (out / "gradient_levels.tsv").write_text("\n".join(columns) + "\n")
        print(table, end="")
    return EXIT_OK


def cmd_to_pointcloud(args) -> int:
    depth_dir = _resolve_dir(args.depth_dir)
    calib_dir = _resolve_dir(args.calib_dir)
    out = Path(args.out)
    ids = _sample_ids(depth_dir, ".png", args.index)
    _require_files(ids, calib_dir, ".txt", "calibration")
    suffix = ".ply" if args.format == "ply" else ".bin"
    max_height = float(args.max_height)

    def one(sample_id: str) -> bytes:
        depth = dataio.read_depth_image((depth_dir / f"{sample_id}.png").read_bytes())
        intr = dataio.parse_calib(
            (calib_dir / f"{sample_id}.txt").read_text(),
            key=args.projection, source=f"{sample_id}.txt",
        )
        pc = pointcloud.depth_to_points(depth, intr)
        if np.isfinite(max_height):
            pc = pointcloud.filter_height(pc, max_height, sensor_y=args.sensor_y)
        fmt = "ascii-ply" if args.format == "ply" else "kitti-bin"
        return pointcloud.export_pointcloud(pc, fmt)

    payloads = _map_samples(ids, args.jobs, one)
    out.mkdir(parents=True, exist_ok=True)
    for sample_id in ids:
        (out / f"{sample_id}{suffix}").write_bytes(payloads[sample_id])
    print(f"wrote {len(ids)} point cloud(s) to {out}")
    return EXIT_OK


def cmd_merge(args) -> int:
    p_f = dataio.read_logits(Path(args.fg_logits).read_bytes())
    p_b = dataio.read_logits(Path(args.bg_logits).read_bytes())
    if args.mode == "max":
        merged = max_merge(p_f, p_b)
    else:
        if not args.labels:
            raise ParseError("mask mode needs --labels", source="merge")
        boxes = dataio.parse_labels(Path(args.labels).read_text(), source=args.labels)
        fg = dataio.rasterize_mask(boxes, p_f.height, p_f.width)
        merged = mask_merge(p_f, p_b, fg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(dataio.write_logits(merged))
    if args.decode_png:
        spec = make_binspec(args.d_min, args.d_max, merged.channels)
        depth = decode_depthmap(merged, spec)
        png = Path(args.decode_png)
        png.parent.mkdir(parents=True, exist_ok=True)
        png.write_bytes(dataio.write_depth_image(depth))
    print(f"wrote merged logits to {out}")
    return EXIT_OK


def cmd_train_toy(args) -> int:
    # imported lazily: the toy trainer is heavy relative to the file tools
    from .toytrain import experiments
    from .toytrain.config import format_config, parse_config

    if args.config:
        config = parse_config(Path(args.config).read_text(), source=args.config)
    else:
        config = experiments.ToyConfig()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(format_config(config))

    if args.experiment == "sweep":
        lambdas = [float(x) for x in args.lambdas.split(",")]
        points = experiments.run_lambda_sweep(lambdas, config)
        text = experiments.format_sweep_columns(points)
        (out / "sweep.tsv").write_text(text)
        print(text, end="")
    elif args.experiment == "ablation":
        results = experiments.run_ablation(config)
        table = experiments.format_ablation_table(results)
        (out / "ablation.txt").write_text(table)
        for name, report in results.items():
            safe = name.replace("/", "_").replace("+", "_")
            (out / f"{safe}.txt").write_text(metrics.format_report_kv(report))
        print(table, end="")
    else:
        train_set, eval_set = experiments.make_dataset(config)
        model = experiments.train_model(config, "dual", train_set=train_set)
        report = experiments.evaluate_model(config, model, "max", eval_set=eval_set)
        (out / "report.txt").write_text(metrics.format_report_kv(report))
        (out / "report_table.txt").write_text(metrics.format_report_text(report))
        print(metrics.format_report_text(report), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="foresee",
        description="Foreground/background-separated depth estimation tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="score predicted depth maps against ground truth")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--label-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--index", default=None, help="sample id list file")
    p.add_argument("--classes", default=None, help="comma-separated foreground classes")
    p.add_argument("--silog-x100", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", help="dataset depth-value / gradient statistics")
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--label-dir", required=True)
    p.add_argument("--mode", choices=["values", "gradients"], required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=float, default=8.0)
    p.add_argument("--anchors", default=None, help="comma-separated anchor depths")
    p.add_argument("--scaling", choices=["per-image", "global"], default="per-image")
    p.add_argument("--index", default=None)
    p.add_argument("--classes", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("to-pointcloud", help="convert depth maps to pseudo-LiDAR")
    p.add_argument("--depth-dir", required=True)
    p.add_argument("--calib-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["ply", "bin"], default="bin")
    p.add_argument("--max-height", default="1.0",
                   help="drop points higher than this above the sensor (inf disables)")
    p.add_argument("--sensor-y", type=float, default=0.0,
                   help="sensor height in camera coordinates (y down)")
    p.add_argument("--projection", default="P2", help="calibration projection key")
    p.add_argument("--index", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_to_pointcloud)

    p = sub.add_parser("merge", help="merge foreground/background logit volumes")
    p.add_argument("--fg-logits", required=True)
    p.add_argument("--bg-logits", required=True)
    p.add_argument("--mode", choices=["max", "mask"], required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--labels", default=None, help="label file for mask mode")
    p.add_argument("--decode-png", default=None, help="also decode to a depth PNG")
    p.add_argument("--d-min", type=float, default=1.0)
    p.add_argument("--d-max", type=float, default=80.0)
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("train-toy", help="deterministic synthetic training experiments")
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--experiment", choices=["sweep", "ablation", "single"], required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lambdas", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")
    p.set_defaults(func=cmd_train_toy)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ShapeMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    except MissingSampleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ForeseeError, EmptyRegionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
