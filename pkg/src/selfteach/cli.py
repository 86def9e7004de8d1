"""Command-line entry points.

Subcommands: simulate, filter, schedule-trace, gamma-trace, resume.
Exit codes: 0 success, 2 config error, 3 IO error, 4 data error.
Environment: SELFTEACH_OUTPUT_DIR (output dir when no --output is given),
SELFTEACH_LOG_LEVEL (python logging level name).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import runner
from .config import RunConfig, config_to_dict, default_config, load_config
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    InputError,
    SelfTeachError,
    StateError,
)
from .labels import (
    detections_from_coco,
    detections_to_coco,
    filter_detections,
    ground_truth_from_coco,
    macro_f1,
    match_metrics,
)
from .mask_schedule import SchedulerConfig, replay_epoch_losses
from .thresholds import ThresholdConfig, smoothing_coefficient

log = logging.getLogger("selfteach")


def _output_dir(args, cfg_dir: str | None = None) -> Path:
    if getattr(args, "output", None):
        return Path(args.output)
    env = os.environ.get("SELFTEACH_OUTPUT_DIR")
    if env:
        return Path(env)
    if cfg_dir:
        return Path(cfg_dir)
    return Path("selfteach_runs")


def _load_run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if args.seed is not None:
        cfg = runner.replica_config(cfg, args.seed)
    overrides = {}
    if getattr(args, "fixed_mask_ratio", None) is not None:
        overrides["fixed_mask_ratio"] = args.fixed_mask_ratio
    if getattr(args, "fixed_threshold", None) is not None:
        overrides["fixed_threshold"] = args.fixed_threshold
    if getattr(args, "no_teacher", False):
        overrides["no_teacher"] = True
    if overrides:
        from .config import config_from_dict

        cfg = config_from_dict({**config_to_dict(cfg), **overrides})
    return cfg


def _cmd_simulate(args) -> int:
    cfg = _load_run_config(args)
    out_dir = _output_dir(args, cfg.output_dir)
    if args.replicas is not None:
        if args.replicas < 1:
            raise ConfigError(f"--replicas must be >= 1, got {args.replicas}")
        seeds = [cfg.seed + k for k in range(args.replicas)]
        jobs = [
            (config_to_dict(cfg), seed, str(out_dir / f"seed_{seed}")) for seed in seeds
        ]
        with ProcessPoolExecutor(max_workers=min(len(jobs), os.cpu_count() or 1)) as pool:
            for seed, summary in pool.map(runner.run_replica, jobs):
                log.info("replica seed=%d macro_f1=%.4f", seed, summary["macro_f1"])
                print(f"seed {seed}: macro_f1={summary['macro_f1']:.4f}")
        return 0
    summary = runner.simulate(
        cfg, out_dir, stop_after=args.stop_after, dump_confidences=args.dump_confidences
    )
    log.info("simulate finished: %d iterations -> %s", summary["iterations"], out_dir)
    print(f"wrote {out_dir}/metrics.csv ({summary['iterations']} iterations, "
          f"macro_f1={summary['macro_f1']:.4f})")
    return 0


def _cmd_resume(args) -> int:
    out_dir = _output_dir(args)
    summary = runner.resume(args.checkpoint, out_dir)
    print(f"resumed to iteration {summary['iterations']}, wrote {out_dir}/metrics.csv")
    return 0


def _read_json(path: str):
    try:
        text = Path(path).read_text()
    except OSError:
        raise
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from exc


def _thresholds_from_file(path: str) -> dict[int, float]:
    if path.endswith(".csv"):
        final: dict[int, float] = {}
        lines = Path(path).read_text().splitlines()
        if not lines or not lines[0].startswith("iteration,class_id"):
            raise DataError(f"{path} is not a thresholds.csv trajectory")
        for ln, line in enumerate(lines[1:], start=2):
            parts = line.split(",")
            try:
                final[int(parts[1])] = float(parts[5])
            except (IndexError, ValueError) as exc:
                raise DataError(f"{path}:{ln}: bad trajectory row") from exc
        return final
    data = _read_json(path)
    if not isinstance(data, dict):
        raise DataError(f"{path}: expected an object mapping class id -> threshold")
    try:
        return {int(k): float(v) for k, v in data.items()}
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: bad threshold map: {exc}") from exc


def _cmd_filter(args) -> int:
    records = _read_json(args.results)
    if not isinstance(records, list):
        raise DataError(f"{args.results}: expected a COCO results array")
    dets = detections_from_coco(records)
    if args.threshold is not None:
        thresholds = {d.class_id: args.threshold for d in dets}
    else:
        if not args.thresholds:
            raise ConfigError("filter needs --thresholds FILE or --threshold VALUE")
        thresholds = _thresholds_from_file(args.thresholds)
    report = filter_detections(dets, thresholds)
    out_dir = _output_dir(args)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "filtered.json").write_text(
        json.dumps(detections_to_coco(report.kept), indent=1) + "\n"
    )
    payload = {
        "input": len(dets),
        "kept": len(report.kept),
        "kept_per_class": {str(c): n for c, n in sorted(report.kept_counts.items())},
        "dropped_per_class": {str(c): n for c, n in sorted(report.dropped_counts.items())},
        "thresholds": {str(c): t for c, t in sorted(report.thresholds.items())},
    }
    if args.gt:
        gt_records = _read_json(args.gt)
        if not isinstance(gt_records, list):
            raise DataError(f"{args.gt}: expected a COCO annotations array")
        gt = ground_truth_from_coco(gt_records)
        metrics = match_metrics(report.kept, gt, iou_thr=args.iou_thr)
        payload["per_class"] = {
            str(cid): {
                "tp": m.tp, "fp": m.fp, "fn": m.fn,
                "precision": m.precision, "recall": m.recall, "f1": m.f1,
            }
            for cid, m in metrics.items()
        }
        payload["macro_f1"] = macro_f1(metrics)
        lines = ["class_id,tp,fp,fn,precision,recall,f1"]
        for cid, m in metrics.items():
            lines.append(
                f"{cid},{m.tp},{m.fp},{m.fn},{m.precision!r},{m.recall!r},{m.f1!r}"
            )
        (out_dir / "metrics.csv").write_text("\n".join(lines) + "\n")
    (out_dir / "report.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    print(f"kept {len(report.kept)}/{len(dets)} detections -> {out_dir}/filtered.json")
    return 0


def _cmd_schedule_trace(args) -> int:
    from dataclasses import replace as dc_replace

    if args.config:
        cfg = load_config(args.config).scheduler
        if args.epochs is not None and args.epochs != cfg.total_epochs:
            cfg = dc_replace(cfg, total_epochs=args.epochs)
    else:
        cfg = SchedulerConfig(total_epochs=args.epochs or 100)
    epochs = cfg.total_epochs
    if args.losses:
        try:
            losses = [float(line) for line in Path(args.losses).read_text().split()]
        except ValueError as exc:
            raise DataError(f"{args.losses}: expected one loss per line: {exc}") from exc
    else:
        rng = np.random.default_rng(args.loss_seed)
        losses = [float(x) for x in rng.uniform(0.2, 2.0, epochs)]
    if len(losses) < epochs:
        raise DataError(f"need {epochs} losses, got {len(losses)}")
    losses = losses[:epochs]
    rows = replay_epoch_losses(losses, cfg)
    lines = ["step,epoch,x,eta,loss,mu"]
    for (epoch, x, eta, mu), loss in zip(rows, losses):
        lines.append(f"{epoch},{epoch},{x!r},{eta!r},{loss!r},{mu!r}")
    _write_trace(args.out, lines)
    return 0


def _cmd_gamma_trace(args) -> int:
    if args.steps < 1:
        raise ConfigError(f"--steps must be >= 1, got {args.steps}")
    literal = ThresholdConfig(alpha_at=args.alpha_at, gamma_mode="literal", total_iters=args.steps)
    described = ThresholdConfig(alpha_at=args.alpha_at, gamma_mode="described", total_iters=args.steps)
    lines = ["step,x,gamma_literal,gamma_described"]
    for i in range(args.steps + 1):
        x = i / args.steps
        g_lit = smoothing_coefficient(i, args.steps, literal)
        g_desc = smoothing_coefficient(i, args.steps, described)
        lines.append(f"{i},{x!r},{g_lit!r},{g_desc!r}")
    _write_trace(args.out, lines)
    return 0


def _write_trace(out: str | None, lines: list[str]) -> None:
    text = "\n".join(lines) + "\n"
    if out:
        path = Path(out)
        if path.parent != Path("."):
            path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="selfteach",
        description="Feedback-controlled self-training simulator and pseudo-label tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a synthetic self-training scenario")
    sim.add_argument("--config", help="run config JSON (default: all defaults)")
    sim.add_argument("--output", help="output directory")
    sim.add_argument("--seed", type=int, help="replace the master seed (re-cascades)")
    sim.add_argument("--fixed-mask-ratio", type=float, dest="fixed_mask_ratio",
                     help="freeze the mask ratio (ablation)")
    sim.add_argument("--fixed-threshold", type=float, dest="fixed_threshold",
                     help="freeze all class thresholds (ablation)")
    sim.add_argument("--no-teacher", action="store_true", dest="no_teacher",
                     help="disable EMA teacher updates (ablation)")
    sim.add_argument("--replicas", type=int, help="run N re-seeded replicas concurrently")
    sim.add_argument("--stop-after", type=int, dest="stop_after",
                     help="stop after N iterations (checkpoint for resume)")
    sim.add_argument("--dump-confidences", action="store_true", dest="dump_confidences",
                     help="also write per-iteration per-class confidence lists")
    sim.set_defaults(func=_cmd_simulate)

    res = sub.add_parser("resume", help="continue a checkpointed run to completion")
    res.add_argument("--checkpoint", required=True)
    res.add_argument("--output", help="output directory for the resumed tail")
    res.set_defaults(func=_cmd_resume)

    flt = sub.add_parser("filter", help="filter a COCO results dump by per-class thresholds")
    flt.add_argument("--results", required=True, help="COCO results-format JSON array")
    flt.add_argument("--thresholds", help="JSON class->threshold map or a thresholds.csv trajectory")
    flt.add_argument("--threshold", type=float, help="one threshold for every class")
    flt.add_argument("--gt", help="COCO annotations subset for quality metrics")
    flt.add_argument("--iou-thr", type=float, default=0.5, dest="iou_thr")
    flt.add_argument("--output", help="output directory")
    flt.set_defaults(func=_cmd_filter)

    tr = sub.add_parser("schedule-trace", help="dump the per-epoch (eta, mu) trajectory as CSV")
    tr.add_argument("--epochs", type=int, help="trace horizon (default: config's or 100)")
    tr.add_argument("--losses", help="file with one loss per line")
    tr.add_argument("--loss-seed", type=int, default=0, dest="loss_seed",
                    help="seed for a synthetic loss stream (when no --losses)")
    tr.add_argument("--config", help="run config JSON supplying the scheduler section")
    tr.add_argument("--out", help="output CSV path (default: stdout)")
    tr.set_defaults(func=_cmd_schedule_trace)

    ga = sub.add_parser("gamma-trace", help="dump gamma(x) for both modes as CSV")
    ga.add_argument("--steps", type=int, default=100)
    ga.add_argument("--alpha-at", type=float, default=10.0, dest="alpha_at")
    ga.add_argument("--out", help="output CSV path (default: stdout)")
    ga.set_defaults(func=_cmd_gamma_trace)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("SELFTEACH_LOG_LEVEL", "WARNING"))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, CheckpointError, InputError, StateError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 4
    except SelfTeachError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
