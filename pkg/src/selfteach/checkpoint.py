"""Versioned JSON checkpoints for pause/resume with identical continuation.

A checkpoint bundles the full run config, every module's state, and the
iteration cursor. All randomness in a run is derived from (seed, iteration)
streams, so seeds plus the cursor fully determine the remaining stream; no
mutable generator state needs to be stored. Floats survive the JSON round
trip bit-exactly (shortest-repr encoding).
"""

from __future__ import annotations

import json
from pathlib import Path

from .config import RunConfig, config_from_dict, config_to_dict
from .errors import CheckpointError

SCHEMA_VERSION = 1


def checkpoint_to_dict(run_cfg: RunConfig, states: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "run": config_to_dict(run_cfg),
        "states": states,
    }


def save_checkpoint(run_cfg: RunConfig, states: dict, path: str | Path) -> None:
    payload = checkpoint_to_dict(run_cfg, states)
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")


def load_checkpoint(path: str | Path) -> tuple[RunConfig, dict]:
    """Read and validate a checkpoint; returns (run config, states dict)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"checkpoint {path} is corrupt: {exc}") from exc
    if not isinstance(payload, dict) or "schema_version" not in payload:
        raise CheckpointError(f"checkpoint {path} is corrupt: missing schema_version")
    version = payload["schema_version"]
    if version != SCHEMA_VERSION:
        raise CheckpointError(
            f"checkpoint {path} has unsupported schema version {version} "
            f"(expected {SCHEMA_VERSION})"
        )
    for key in ("run", "states"):
        if key not in payload:
            raise CheckpointError(f"checkpoint {path} is corrupt: missing {key!r}")
    try:
        run_cfg = config_from_dict(payload["run"])
    except Exception as exc:
        raise CheckpointError(f"checkpoint {path} has an invalid run config: {exc}") from exc
    return run_cfg, payload["states"]
