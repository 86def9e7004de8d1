"""Run orchestration and report emission (CSV time series + JSON summary).

All outputs are deterministic functions of (config, seed): file bytes are
identical across repeated runs, and a run resumed from a checkpoint writes
exactly the rows an uninterrupted run would have written from that point.

File schemas (column order is fixed):

* metrics.csv     - iteration,epoch,mu,eta,gamma,l_mask,l_teach,l_total,
                    kept,total,precision,recall,f1,thr_<class>...
* thresholds.csv  - iteration,class_id,mean,var,gamma,n
                    (mean/var/gamma empty when the class was not updated or
                    thresholding is fixed)
* schedule.csv    - epoch,x,eta,mu (mu as used at the epoch's first iteration)
* summary.json    - final-epoch per-class precision/recall/F1, final mask
                    ratio, final thresholds, macro F1
"""

from __future__ import annotations

import json
from pathlib import Path

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, config_to_dict
from .errors import CheckpointError
from .training import MetricsRow, TrainingEngine


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def build_engine(cfg: RunConfig) -> TrainingEngine:
    return TrainingEngine(
        scenario_cfg=cfg.scenario,
        scheduler_cfg=cfg.scheduler,
        threshold_cfg=cfg.thresholds,
        loop_cfg=cfg.loop,
        decoder_cfg=cfg.decoder,
        fixed_mask_ratio=cfg.fixed_mask_ratio,
        fixed_threshold=cfg.fixed_threshold,
        no_teacher=cfg.no_teacher,
    )


def metrics_header(class_ids: list[int]) -> str:
    fixed = "iteration,epoch,mu,eta,gamma,l_mask,l_teach,l_total,kept,total,precision,recall,f1"
    return fixed + "".join(f",thr_{cid}" for cid in sorted(class_ids))


def metrics_line(row: MetricsRow, class_ids: list[int]) -> str:
    cells = [
        _fmt(row.iteration),
        _fmt(row.epoch),
        _fmt(row.mu),
        _fmt(row.eta),
        _fmt(row.gamma),
        _fmt(row.l_mask),
        _fmt(row.l_teach),
        _fmt(row.l_total),
        _fmt(row.kept),
        _fmt(row.total),
        _fmt(row.precision),
        _fmt(row.recall),
        _fmt(row.f1),
    ]
    cells += [_fmt(row.thresholds[cid]) for cid in sorted(class_ids)]
    return ",".join(cells)


def write_metrics_csv(rows: list[MetricsRow], class_ids: list[int], path: Path) -> None:
    lines = [metrics_header(class_ids)]
    lines += [metrics_line(row, class_ids) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def write_thresholds_csv(rows: list[MetricsRow], class_ids: list[int], path: Path) -> None:
    lines = ["iteration,class_id,mean,var,gamma,n"]
    for row in rows:
        for cid in sorted(class_ids):
            stats = row.stats.get(cid)
            mean, var = stats if stats is not None else (None, None)
            gamma = row.gamma if stats is not None else None
            lines.append(
                ",".join(
                    [_fmt(row.iteration), _fmt(cid), _fmt(mean), _fmt(var), _fmt(gamma), _fmt(row.thresholds[cid])]
                )
            )
    path.write_text("\n".join(lines) + "\n")


def write_schedule_csv(rows: list[MetricsRow], total_epochs: int, path: Path) -> None:
    lines = ["epoch,x,eta,mu"]
    seen: set[int] = set()
    for row in rows:
        if row.epoch in seen:
            continue
        seen.add(row.epoch)
        lines.append(
            ",".join([_fmt(row.epoch), _fmt(row.epoch / total_epochs), _fmt(row.eta), _fmt(row.mu)])
        )
    path.write_text("\n".join(lines) + "\n")


def build_summary(engine: TrainingEngine) -> dict:
    per_class = {}
    f1_sum = 0.0
    for cid, m in sorted(engine.epoch_summary().items()):
        per_class[str(cid)] = {
            "tp": m.tp,
            "fp": m.fp,
            "fn": m.fn,
            "precision": m.precision,
            "recall": m.recall,
            "f1": m.f1,
        }
        f1_sum += m.f1
    thresholds = (
        {str(cid): st.n for cid, st in sorted(engine.thr_states.items())}
        if engine.fixed_threshold is None
        else {str(cid): engine.fixed_threshold for cid in engine.scenario_cfg.class_ids}
    )
    return {
        "iterations": engine.iteration,
        "final_epoch": engine.ts.epoch,
        "final_mu": engine.scheduler.mu if engine.fixed_mask_ratio is None else engine.fixed_mask_ratio,
        "final_eta": engine.scheduler.eta,
        "final_thresholds": thresholds,
        "per_class": per_class,
        "macro_f1": f1_sum / len(per_class) if per_class else 0.0,
        "drift_bonus": engine.predictor.drift_bonus,
    }


def write_outputs(engine: TrainingEngine, cfg: RunConfig, out_dir: Path) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = engine.log.rows
    class_ids = engine.scenario_cfg.class_ids
    write_metrics_csv(rows, class_ids, out_dir / "metrics.csv")
    write_thresholds_csv(rows, class_ids, out_dir / "thresholds.csv")
    write_schedule_csv(rows, cfg.loop.total_epochs, out_dir / "schedule.csv")
    summary = build_summary(engine)
    (out_dir / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    save_checkpoint(cfg, engine.states_to_dict(), out_dir / "checkpoint.json")
    if engine.confidence_trace is not None:
        (out_dir / "confidences.json").write_text(
            json.dumps({"iterations": engine.confidence_trace}, sort_keys=True, indent=1) + "\n"
        )
    return summary


def simulate(
    cfg: RunConfig,
    out_dir: str | Path,
    stop_after: int | None = None,
    dump_confidences: bool = False,
) -> dict:
    """Run the scenario (optionally only up to ``stop_after`` iterations)
    and write all outputs under ``out_dir``. Returns the summary dict."""
    engine = build_engine(cfg)
    if dump_confidences:
        engine.confidence_trace = []
    if stop_after is None:
        engine.run()
    else:
        engine.run(max_iterations=stop_after)
    return write_outputs(engine, cfg, Path(out_dir))


def resume(checkpoint_path: str | Path, out_dir: str | Path) -> dict:
    """Continue a checkpointed run to completion; outputs (including
    metrics rows) cover only the resumed iterations."""
    cfg, states = load_checkpoint(checkpoint_path)
    engine = build_engine(cfg)
    try:
        engine.restore_states(states)
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"checkpoint {checkpoint_path} is corrupt: {exc}") from exc
    engine.run()
    return write_outputs(engine, cfg, Path(out_dir))


def replica_config(cfg: RunConfig, replica_seed: int) -> RunConfig:
    """The same run re-seeded: master seed replaced and re-cascaded."""
    from .config import config_from_dict

    data = config_to_dict(cfg)
    data["seed"] = replica_seed
    data["scenario"] = dict(data["scenario"], seed=replica_seed)
    data["loop"] = dict(data["loop"], seed=replica_seed)
    return config_from_dict(data)


def run_replica(args: tuple[dict, int, str]) -> tuple[int, dict]:
    """Process-pool entry point: (config dict, seed, output dir)."""
    from .config import config_from_dict

    data, seed, out_dir = args
    cfg = replica_config(config_from_dict(data), seed)
    summary = simulate(cfg, out_dir)
    return seed, summary
