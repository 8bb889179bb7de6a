# dap_core/storage.py
from __future__ import annotations

import hashlib
import logging
from pathlib import Path
from typing import Callable

log = logging.getLogger(__name__)


def sha256_of(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


class LocalStorage:
    """
    Output directory of one run. Every file written through it is recorded
    with its sha256 for the manifest.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.outputs: dict[str, str] = {}

    def get_path(self, key: str) -> Path:
        return self.root / key

    def put(self, key: str, data: bytes) -> Path:
        p = self.get_path(key)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_bytes(data)
        return self.record(key)

    def write_with(self, key: str, writer: Callable[[Path], object]) -> Path:
        """Let `writer` produce the file at the key's path, then record it."""
        writer(self.get_path(key))
        return self.record(key)

    def record(self, key: str) -> Path:
        p = self.get_path(key)
        self.outputs[key] = sha256_of(p)
        log.info(f"wrote {p}")
        return p
