# dap_core/manifest.py
from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field

from .storage import LocalStorage

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"


class RunManifest(BaseModel):
    """
    Everything needed to rerun a command: the resolved config (usable as
    --config directly), the seed and the sha256 of every output.
    """
    schema_version: int = SCHEMA_VERSION
    tool_version: str
    command: str
    seed: int
    config: dict[str, Any]
    started_at: str
    wall_clock_s: float = Field(..., ge=0)
    outputs: dict[str, str] = Field(default_factory=dict)


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def to_json(manifest: RunManifest) -> dict:
    return manifest.model_dump(mode="json")


def from_json(payload: dict) -> RunManifest:
    return RunManifest.model_validate(payload)


def write_manifest(storage: LocalStorage, manifest: RunManifest) -> Path:
    payload = to_json(manifest.model_copy(update={"outputs": dict(sorted(storage.outputs.items()))}))
    p = storage.get_path(MANIFEST_NAME)
    p.write_text(json.dumps(payload, indent=2, sort_keys=False) + "\n", encoding="utf-8")
    return p


def load_manifest(path: str | Path) -> RunManifest:
    return from_json(json.loads(Path(path).read_text(encoding="utf-8")))
